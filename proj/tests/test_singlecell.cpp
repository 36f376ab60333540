#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mimopc/singlecell.hpp"

using namespace mimopc;

namespace {

SingleCellInstance one_user(double c, Precoder pc = Precoder::MRT) {
  SingleCellInstance sc;
  sc.beta = Vector::Constant(1, 1.0);
  sc.gamma = Vector::Constant(1, 0.5);
  sc.alpha = Vector::Constant(1, 1.0);
  sc.rho_dl = 1.0;
  sc.m_max = 10;
  sc.c = c;
  sc.precoder = pc;
  return sc;
}

}  // namespace

TEST(SingleCell, EffectiveSinrExamples) {
  const auto sc = one_user(2.0);
  EXPECT_DOUBLE_EQ(effective_sinr_sc(sc, Vector::Constant(1, 1.0), 4)[0], 1.0);
  EXPECT_EQ(effective_sinr_sc(sc, Vector::Zero(1), 4)[0], 0.0);

  SingleCellInstance zf = one_user(0.0, Precoder::ZF);
  zf.gamma = zf.beta;
  EXPECT_DOUBLE_EQ(effective_sinr_sc(zf, Vector::Constant(1, 3.0), 5)[0], 4.0 * 1.0 * 3.0);
  EXPECT_THROW(effective_sinr_sc(zf, Vector::Constant(1, 3.0), 1), DomainError);
  EXPECT_THROW(effective_sinr_sc(zf, Vector::Constant(1, -1.0), 5), DomainError);
}

TEST(SingleCell, MinPowerOneUser) {
  const auto sys = build_sc_system(one_user(2.0));
  EXPECT_DOUBLE_EQ(sys.trace_tf, 2.0);
  EXPECT_DOUBLE_EQ(sys.tau, 2.0);
  const auto ps = min_power_sc(sys, 4.0);
  ASSERT_TRUE(ps.feasible());
  EXPECT_NEAR(ps.p[0], 1.0, 1e-15);
  EXPECT_FALSE(min_power_sc(sys, 2.0).feasible());
  EXPECT_NEAR(min_power_sc(sys, 3.0).p[0], 2.0, 1e-15);
}

TEST(SingleCell, MinAntennaCounts) {
  const auto sc = one_user(2.0);
  EXPECT_EQ(m_min_sinr(sc), 3);
  EXPECT_EQ(m_min_joint(sc), 4);

  SingleCellInstance two;
  two.beta = Vector::Constant(2, 1.0);
  two.gamma = Vector::Constant(2, 0.5);
  two.alpha = Vector::Constant(2, 1.05);
  two.rho_dl = 1e12;
  two.m_max = 20;
  EXPECT_NEAR(build_sc_system(two).trace_tf, 4.2, 1e-14);
  EXPECT_EQ(m_min_sinr(two), 5);
  EXPECT_EQ(m_min_joint(two), 5);
  two.precoder = Precoder::ZF;
  // (beta - gamma)/gamma = 1, so tr = 2.1 -> Mbar 3 -> M = 5
  EXPECT_EQ(m_min_sinr(two), 3);
  EXPECT_EQ(antennas_from_effective(Precoder::ZF, m_min_sinr(two), 2), 5);
}

TEST(SingleCell, MinJointGrowsFasterThanTargets) {
  fixtures::Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto sc = fixtures::random_sc(rng, 8, trial % 2 ? Precoder::MRT : Precoder::ZF);
    const auto sys = build_sc_system(sc);
    const double base = m_min_joint_continuous(sys, sc.rho_dl);
    sc.alpha *= 2.0;
    EXPECT_NEAR(m_min_joint_continuous(build_sc_system(sc), sc.rho_dl), 2.0 * base, 1e-12 * base);
    EXPECT_GE(m_min_joint(sc), m_min_sinr(sc));
  }
}

TEST(SingleCell, ContinuousOptimumExamples) {
  EXPECT_DOUBLE_EQ(m_dagger(one_user(2.0)), 3.0);
  EXPECT_DOUBLE_EQ(m_dagger(one_user(0.5)), 4.0);
  // budget floor of 4 binds for c = 2; c huge clamps to the floor as well
  EXPECT_DOUBLE_EQ(m_opt_continuous(one_user(2.0)), 4.0);
  EXPECT_DOUBLE_EQ(m_opt_continuous(one_user(1e9)), 4.0);
  EXPECT_DOUBLE_EQ(m_opt_continuous(one_user(0.0)), 10.0);
  EXPECT_DOUBLE_EQ(m_opt_continuous(one_user(0.02)), 10.0);
}

TEST(SingleCell, SolveWorkedExample) {
  const auto s = solve_p2(one_user(2.0));
  ASSERT_EQ(s.status, SolveStatus::Feasible);
  EXPECT_EQ(s.mbar_star, 4);
  EXPECT_EQ(s.m_star, 4);
  EXPECT_NEAR(s.p_star[0], 1.0, 1e-15);
  EXPECT_NEAR(s.cost, 9.0, 1e-14);
  // oracle: the whole grid 4..10
  const auto sys = build_sc_system(one_user(2.0));
  for (int mb = 4; mb <= 10; ++mb) EXPECT_GE(reduced_cost(sys, 2.0, mb), 9.0 - 1e-12);
}

TEST(SingleCell, ZeroCostUsesAllAntennas) {
  const auto s = solve_p2(one_user(0.0));
  ASSERT_EQ(s.status, SolveStatus::Feasible);
  EXPECT_EQ(s.mbar_star, 10);
  EXPECT_NEAR(s.p_star[0], 2.0 / 8.0, 1e-15);
  EXPECT_NEAR(cost_u(0.0, 10, s.p_star), s.p_star.sum(), 0.0);
}

TEST(SingleCell, InfeasibleStatuses) {
  auto sc = one_user(1.0);
  sc.m_max = 2;  // tr = 2, boundary
  EXPECT_EQ(solve_p2(sc).status, SolveStatus::InfeasibleSINR);
  sc.m_max = 3;  // SINR-feasible, but needs 4 for the budget
  EXPECT_EQ(solve_p2(sc).status, SolveStatus::InfeasiblePower);
}

TEST(SingleCell, ZfReportsBothCosts) {
  SingleCellInstance sc;
  sc.beta = Vector::Constant(2, 1.0);
  sc.gamma = Vector::Constant(2, 0.5);
  sc.alpha = Vector::Constant(2, 1.0);
  sc.rho_dl = 100.0;
  sc.m_max = 30;
  sc.c = 0.1;
  sc.precoder = Precoder::ZF;
  const auto s = solve_p2(sc);
  ASSERT_EQ(s.status, SolveStatus::Feasible);
  EXPECT_EQ(s.m_star, s.mbar_star + 2);
  EXPECT_NEAR(s.cost_antennas - s.cost, sc.c * 2, 1e-12);
}

TEST(SingleCell, CostU) {
  EXPECT_DOUBLE_EQ(cost_u(0.1, 10, Vector::Zero(3)), 1.0);
  EXPECT_DOUBLE_EQ(cost_u(0.0, 10, Vector::Constant(2, 0.5)), 1.0);
  EXPECT_THROW(cost_u(0.0, 1, Vector::Constant(1, -1.0)), DomainError);
}

TEST(SingleCell, GapExamples) {
  SingleCellInstance sc;
  sc.beta = Vector::Constant(3, 2.0);
  sc.gamma = Vector::Constant(3, 1.0);
  sc.alpha = Vector::Constant(3, 2.0);
  sc.rho_dl = 1.0;
  sc.m_max = 100;
  sc.c = 0.01;
  EXPECT_DOUBLE_EQ(mrt_zf_gap(sc), 3.0);
  auto zf = sc;
  zf.precoder = Precoder::ZF;
  EXPECT_NEAR(m_dagger(sc) - (m_dagger(zf) + 3), 3.0, 1e-12);

  sc.alpha = Vector::Constant(4, 0.5);
  sc.beta = Vector::Constant(4, 2.0);
  sc.gamma = Vector::Constant(4, 1.0);
  EXPECT_DOUBLE_EQ(mrt_zf_gap(sc), -2.0);
  sc.alpha.setOnes();
  EXPECT_EQ(mrt_zf_gap(sc), 0.0);
}

TEST(SingleCellProperty, ClosedFormMatchesDenseSolve) {
  fixtures::Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const auto sc = fixtures::random_feasible_sc(rng, 12, trial % 2 ? Precoder::MRT : Precoder::ZF);
    const auto sys = build_sc_system(sc);
    for (int mb = m_min_sinr(sys); mb <= sys.mbar_max; mb += 7) {
      const auto ps = min_power_sc(sys, mb);
      ASSERT_TRUE(ps.feasible());
      const Vector ref = fixtures::dense_sc_power(sc, mb);
      EXPECT_LE((ps.p - ref).norm(), 1e-9 * ref.norm());
      EXPECT_NEAR(ps.p.sum(), sys.tau / (mb - sys.trace_tf), 1e-9 * ps.p.sum());
    }
  }
}

TEST(SingleCellProperty, PowerDecreasesWithAntennas) {
  fixtures::Rng rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const auto sc = fixtures::random_feasible_sc(rng, 12, trial % 2 ? Precoder::MRT : Precoder::ZF);
    const auto sys = build_sc_system(sc);
    Vector prev = min_power_sc(sys, m_min_sinr(sys)).p;
    for (int mb = m_min_sinr(sys) + 1; mb <= sys.mbar_max; ++mb) {
      const auto ps = min_power_sc(sys, mb);
      ASSERT_TRUE(ps.feasible()) << "feasibility must persist upward";
      EXPECT_TRUE((ps.p.array() <= prev.array() * (1.0 + 1e-12)).all());
      EXPECT_LT(ps.p.sum(), prev.sum());
      prev = ps.p;
    }
  }
}

TEST(SingleCellProperty, TargetsMetWithEquality) {
  fixtures::Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const auto sc = fixtures::random_feasible_sc(rng, 12, trial % 2 ? Precoder::MRT : Precoder::ZF);
    const auto s = solve_p2(sc);
    const Vector lib = effective_sinr_sc(sc, s.p_star, s.m_star);
    const Vector ref = fixtures::sinr_sc(sc, s.p_star, s.mbar_star);
    EXPECT_LE((lib - sc.alpha).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((ref - sc.alpha).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(s.p_star.sum(), sc.rho_dl * (1.0 + 1e-12));
  }
}

TEST(SingleCellProperty, ReducedCostIsDiscretelyConvex) {
  fixtures::Rng rng(24);
  for (int trial = 0; trial < 200; ++trial) {
    const auto sc = fixtures::random_feasible_sc(rng, 12, trial % 2 ? Precoder::MRT : Precoder::ZF);
    const auto sys = build_sc_system(sc);
    const int lo = m_min_joint(sys, sc.rho_dl);
    for (int mb = lo + 1; mb < sys.mbar_max; ++mb) {
      const double second = reduced_cost(sys, sc.c, mb + 1) - 2 * reduced_cost(sys, sc.c, mb) +
                            reduced_cost(sys, sc.c, mb - 1);
      EXPECT_GE(second, -1e-12 * reduced_cost(sys, sc.c, mb));
    }
  }
}

TEST(SingleCellProperty, TotalPowerTimesMarginIsConstant) {
  fixtures::Rng rng(25);
  for (int trial = 0; trial < 100; ++trial) {
    const auto sc = fixtures::random_feasible_sc(rng, 1, Precoder::ZF);
    const auto sys = build_sc_system(sc);
    const double ref = min_power_sc(sys, sys.mbar_max).p.sum() * (sys.mbar_max - sys.trace_tf);
    for (int mb = m_min_sinr(sys); mb < sys.mbar_max; ++mb)
      EXPECT_NEAR(min_power_sc(sys, mb).p.sum() * (mb - sys.trace_tf), ref, 1e-10 * ref);
  }
}

TEST(SingleCellProperty, OptimumBeatsEveryGridPoint) {
  fixtures::Rng rng(26);
  for (int trial = 0; trial < 300; ++trial) {
    const auto sc = fixtures::random_feasible_sc(rng, 12, trial % 2 ? Precoder::MRT : Precoder::ZF);
    const auto s = solve_p2(sc);
    const auto grid = fixtures::grid_search_sc(sc);
    EXPECT_LE(s.cost, grid.cost * (1.0 + 1e-9));
    EXPECT_EQ(s.mbar_star, grid.mbar);
    EXPECT_TRUE(s.mbar_star == static_cast<int>(std::floor(s.m_continuous)) ||
                s.mbar_star == static_cast<int>(std::ceil(s.m_continuous)));
  }
}

TEST(SingleCell, ViewOfOneCellInstance) {
  MultiCellInstance inst(1, 2);
  inst.beta = {1.0, 2.0};
  inst.np = 2;
  inst.rho_ul = 1.0;
  inst.m_max = 9;
  const auto g = compute_gammas_mc(inst);
  const auto sc = single_cell_view(inst, g);
  EXPECT_DOUBLE_EQ(sc.gamma[1], compute_gamma_sc(2.0, 2.0, 1.0));
  EXPECT_THROW(single_cell_view(MultiCellInstance(2, 1), g), ConfigError);
}
