#pragma once

// Multi-cell downlink with pilot contamination.
//
// Stacking SINR_lk >= alpha_lk over all L*K users gives
//   (M - T F - T A M) p >= v
// with M = diag(Mbar_l per user), T = diag(alpha), F the noncoherent
// interference ratios, A the coherent (pilot-sharing) ratios and v = alpha/gamma.
// Feasible iff r(T F M^{-1} + T A) < 1, impossible for every M once r(T A) >= 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mimopc/gp.hpp"
#include "mimopc/linalg.hpp"
#include "mimopc/scenario.hpp"
#include "mimopc/singlecell.hpp"
#include "mimopc/types.hpp"

namespace mimopc {

struct MCSystem {
  int L = 0;
  int K = 0;
  Precoder precoder = Precoder::MRT;
  Vector t;          // alpha per flat index
  Matrix f;          // noncoherent interference ratios
  Matrix a;          // coherent interference ratios, zero diagonal blocks
  Vector v;          // alpha / gamma_own
  Vector inv_gamma;  // 1 / gamma_own, so v = t .* inv_gamma
  double coherent_radius = 0.0;  // r(T A)

  int dim() const { return L * K; }
};

/// Antennas per cell (physical count).
struct AntennaVector {
  std::vector<int> m;

  static AntennaVector uniform(int cells, int count) { return {std::vector<int>(cells, count)}; }
  int cells() const { return static_cast<int>(m.size()); }
  long total() const {
    long s = 0;
    for (int x : m) s += x;
    return s;
  }
  auto operator<=>(const AntennaVector&) const = default;
};

namespace detail {

// Effective antennas Mbar expanded to one entry per flat user index.
inline Vector effective_per_user(const MCSystem& sys, const AntennaVector& m) {
  if (m.cells() != sys.L) throw DomainError("antenna vector has wrong number of cells");
  Vector mbar(sys.dim());
  for (int l = 0; l < sys.L; ++l) {
    const double e = effective_antennas(sys.precoder, m.m[l], sys.K);
    if (!(e >= 1.0))
      throw DomainError(sys.precoder == Precoder::ZF ? "ZF needs more than K antennas in every cell"
                                                     : "every cell needs at least one antenna");
    for (int k = 0; k < sys.K; ++k) mbar[flat_index(l, k, sys.K)] = e;
  }
  return mbar;
}

inline Vector effective_per_user(const MCSystem& sys, const std::vector<double>& mbar_cells) {
  Vector mbar(sys.dim());
  for (int l = 0; l < sys.L; ++l)
    for (int k = 0; k < sys.K; ++k) mbar[flat_index(l, k, sys.K)] = mbar_cells[l];
  return mbar;
}

}  // namespace detail

inline MCSystem build_mc_system(const MultiCellInstance& inst, const GammaTable& g) {
  inst.validate();
  if (g.L != inst.L || g.K != inst.K) throw DomainError("gamma table does not match instance");
  MCSystem sys;
  sys.L = inst.L;
  sys.K = inst.K;
  sys.precoder = inst.precoder;
  const int n = sys.dim();
  sys.t.resize(n);
  sys.v.resize(n);
  sys.inv_gamma.resize(n);
  sys.f = Matrix::Zero(n, n);
  sys.a = Matrix::Zero(n, n);

  for (int l = 0; l < inst.L; ++l) {
    for (int k = 0; k < inst.K; ++k) {
      const int i = flat_index(l, k, inst.K);
      const double own = g.at(l, k, l);
      if (!(own > 0.0))
        throw std::logic_error("build_mc_system: missing own-cell gamma for cell " + std::to_string(l));
      sys.t[i] = inst.alpha_at(l, k);
      sys.inv_gamma[i] = 1.0 / own;
      sys.v[i] = sys.t[i] / own;
      for (int j = 0; j < inst.L; ++j) {
        const bool shared = inst.shares_pilot(l, j);
        const double gj = g.at(l, k, j);
        if (shared && !(gj > 0.0))
          throw std::logic_error("build_mc_system: missing gamma for pilot-sharing pair");
        double leak = inst.beta_at(l, k, j);
        if (inst.precoder == Precoder::ZF && shared) leak = std::max(0.0, leak - gj);
        for (int kk = 0; kk < inst.K; ++kk) sys.f(i, flat_index(j, kk, inst.K)) = leak / own;
        if (shared && j != l) sys.a(i, flat_index(j, k, inst.K)) = gj / own;
      }
    }
  }
  sys.coherent_radius = spectral_radius(sys.t.asDiagonal() * sys.a);
  return sys;
}

/// T F M^{-1} + T A at the given per-user effective antennas.
inline Matrix interference_operator(const MCSystem& sys, const Vector& mbar) {
  return sys.t.asDiagonal() * (sys.f * mbar.cwiseInverse().asDiagonal() + sys.a);
}

inline SolveStatus feasibility_mc(const MCSystem& sys, const Vector& mbar) {
  if (sys.coherent_radius >= 1.0 - kFeasibilityMargin) return SolveStatus::InfeasibleCoherent;
  if (spectral_radius(interference_operator(sys, mbar)) >= 1.0 - kFeasibilityMargin)
    return SolveStatus::InfeasibleSINR;
  return SolveStatus::Feasible;
}

inline SolveStatus feasibility_mc(const MCSystem& sys, const AntennaVector& m) {
  return feasibility_mc(sys, detail::effective_per_user(sys, m));
}

/// p = (M - T F - T A M)^{-1} v when the radius test passes.
inline PowerSolution min_power_mc(const MCSystem& sys, const Vector& mbar) {
  PowerSolution out;
  out.status = feasibility_mc(sys, mbar);
  if (out.status != SolveStatus::Feasible) return out;
  Matrix sys_matrix = -(sys.t.asDiagonal() * (sys.f + sys.a * mbar.asDiagonal()));
  sys_matrix.diagonal() += mbar;
  out.p = solve_linear(sys_matrix, sys.v);
  return out;
}

inline PowerSolution min_power_mc(const MCSystem& sys, const AntennaVector& m) {
  return min_power_mc(sys, detail::effective_per_user(sys, m));
}

/// Closed-form effective SINR per flat user index, evaluated term by term.
inline Vector effective_sinr_mc(const MultiCellInstance& inst, const GammaTable& g, const Vector& p,
                                const AntennaVector& m) {
  const int L = inst.L;
  const int K = inst.K;
  if (p.size() != L * K) throw DomainError("effective_sinr_mc: power vector has wrong length");
  if (m.cells() != L) throw DomainError("effective_sinr_mc: antenna vector has wrong length");
  if ((p.array() < 0.0).any()) throw DomainError("effective_sinr_mc: negative power");
  std::vector<double> mbar(L);
  for (int l = 0; l < L; ++l) {
    mbar[l] = effective_antennas(inst.precoder, m.m[l], K);
    if (!(mbar[l] > 0.0)) throw DomainError("effective_sinr_mc: invalid antenna count");
  }
  Vector sinr(L * K);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      double denom = 1.0;
      for (int j = 0; j < L; ++j) {
        double cell_power = 0.0;
        for (int kk = 0; kk < K; ++kk) cell_power += p[flat_index(j, kk, K)];
        double leak = inst.beta_at(l, k, j);
        if (inst.precoder == Precoder::ZF && inst.shares_pilot(l, j)) leak -= g.at(l, k, j);
        denom += leak * cell_power;
        if (j != l && inst.shares_pilot(l, j))
          denom += mbar[j] * g.at(l, k, j) * p[flat_index(j, k, K)];
      }
      sinr[flat_index(l, k, K)] = mbar[l] * g.at(l, k, l) * p[flat_index(l, k, K)] / denom;
    }
  }
  return sinr;
}

struct MCSolution {
  SolveStatus status = SolveStatus::InfeasibleSINR;
  AntennaVector m;
  Vector p;
  double cost = std::numeric_limits<double>::quiet_NaN();         // sum p + c sum M_l
  double total_power = std::numeric_limits<double>::quiet_NaN();  // sum p
  std::vector<double> gp_continuous_m;                            // relaxed M_l
  double gp_lower_bound = std::numeric_limits<double>::quiet_NaN();
  AntennaVector ceil_m;                                           // before local refinement
  double ceil_cost = std::numeric_limits<double>::quiet_NaN();
  int gp_newton_steps = 0;

  bool feasible() const { return status == SolveStatus::Feasible; }
};

namespace detail {

inline bool within_budgets(const MultiCellInstance& inst, const Vector& p) {
  for (int l = 0; l < inst.L; ++l) {
    double s = 0.0;
    for (int k = 0; k < inst.K; ++k) s += p[flat_index(l, k, inst.K)];
    if (s > inst.rho_dl[l] * (1.0 + 1e-9)) return false;
  }
  return true;
}

inline double p4_cost(const MultiCellInstance& inst, const AntennaVector& m, const Vector& p) {
  return p.sum() + inst.c * static_cast<double>(m.total());
}

// Fills status/p/cost for a fixed antenna vector, including the budget check.
inline MCSolution evaluate_antennas(const MultiCellInstance& inst, const MCSystem& sys,
                                    const AntennaVector& m) {
  MCSolution sol;
  sol.m = m;
  PowerSolution ps;
  try {
    ps = min_power_mc(sys, m);
  } catch (const NumericalError&) {
    // Only reachable right at the radius boundary.
    sol.status = SolveStatus::InfeasibleSINR;
    return sol;
  }
  sol.status = ps.status;
  if (!ps.feasible()) return sol;
  if (!within_budgets(inst, ps.p)) {
    sol.status = SolveStatus::InfeasiblePower;
    return sol;
  }
  sol.p = ps.p;
  sol.total_power = ps.p.sum();
  sol.cost = p4_cost(inst, m, ps.p);
  return sol;
}

}  // namespace detail

/// All cells at M_max; optimal for pure transmit-power minimization.
inline MCSolution solve_p3(const MultiCellInstance& inst, const GammaTable& g) {
  const MCSystem sys = build_mc_system(inst, g);
  return detail::evaluate_antennas(inst, sys, AntennaVector::uniform(inst.L, inst.m_max));
}

inline MCSolution solve_p3(const MultiCellInstance& inst) { return solve_p3(inst, compute_gammas_mc(inst)); }

/// 1 / r(A): the common SINR reachable by all users as antennas grow without bound.
inline double asymptotic_maxmin(const MCSystem& sys) {
  const double r = spectral_radius(sys.a);
  return r == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / r;
}

/// Largest common SINR target alpha met by every user at antennas m.
/// Without the budget this is 1 / r(F M^{-1} + A); with it, bisection on alpha
/// until the minimum-power solution fits every cell budget (1e-6 relative).
inline double maxmin_sinr(const MultiCellInstance& inst, const GammaTable& g, const AntennaVector& m,
                          bool honor_power_budget) {
  MCSystem sys = build_mc_system(inst, g);
  const Vector mbar = detail::effective_per_user(sys, m);
  const Matrix op = sys.f * mbar.cwiseInverse().asDiagonal() + sys.a;
  const double r = spectral_radius(op);
  const double unconstrained = r == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / r;
  if (!honor_power_budget) return unconstrained;

  auto fits = [&](double alpha) {
    sys.t.setConstant(alpha);
    sys.v = alpha * sys.inv_gamma;
    sys.coherent_radius = alpha * spectral_radius(sys.a);
    try {
      const PowerSolution ps = min_power_mc(sys, mbar);
      return ps.feasible() && detail::within_budgets(inst, ps.p);
    } catch (const NumericalError&) {
      return false;
    }
  };

  double lo = 0.0;
  double hi = unconstrained;
  if (!std::isfinite(hi)) {
    hi = 1.0;
    while (fits(hi)) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e300) return std::numeric_limits<double>::infinity();
    }
  } else if (fits(hi * (1.0 - 1e-8))) {
    return hi;
  }
  while (hi - lo > 1e-7 * hi) {
    const double mid = 0.5 * (lo + hi);
    (fits(mid) ? lo : hi) = mid;
  }
  return lo;
}

inline double maxmin_sinr(const MultiCellInstance& inst, const AntennaVector& m, bool honor_power_budget) {
  return maxmin_sinr(inst, compute_gammas_mc(inst), m, honor_power_budget);
}

// ---------------------------------------------------------------------------
// Joint antenna + power problem through its GP relaxation

/// GP relaxation of the joint problem plus the variable bookkeeping needed to
/// map the answer back. Antenna variables are x_l = Mbar_l, so ZF stays posynomial.
struct P4Gp {
  gp::StandardForm gp;
  int L = 0;
  int K = 0;
  Precoder precoder = Precoder::MRT;
  double objective_constant = 0.0;  // c*L*K for ZF, dropped from the GP objective

  gp::VarId p_var(int l, int k) const { return flat_index(l, k, K); }
  gp::VarId x_var(int l) const { return L * K + l; }
};

inline P4Gp build_p4_gp(const MultiCellInstance& inst, const GammaTable& g) {
  const MCSystem sys = build_mc_system(inst, g);
  if (sys.coherent_radius >= 1.0 - kFeasibilityMargin)
    throw DomainError("build_p4_gp: coherent interference makes every antenna count infeasible");

  P4Gp out;
  out.L = inst.L;
  out.K = inst.K;
  out.precoder = inst.precoder;
  const int L = inst.L;
  const int K = inst.K;
  const double x_max = effective_antennas(inst.precoder, inst.m_max, K);
  auto& gpf = out.gp;
  for (int l = 0; l < L; ++l)
    for (int k = 0; k < K; ++k) gpf.add_variable("p_" + std::to_string(l) + "_" + std::to_string(k));
  for (int l = 0; l < L; ++l) gpf.add_variable("x_" + std::to_string(l), 1.0);

  using gp::Monomial;
  using gp::Posynomial;
  std::vector<Monomial> obj;
  for (int i = 0; i < L * K; ++i) obj.push_back(Monomial::var(i));
  if (inst.c > 0.0)
    for (int l = 0; l < L; ++l) obj.emplace_back(inst.c, std::map<gp::VarId, double>{{out.x_var(l), 1.0}});
  gpf.objective = Posynomial(std::move(obj));
  if (inst.precoder == Precoder::ZF) out.objective_constant = inst.c * L * K;

  // Inverted SINR: alpha (1 + noncoherent + coherent) / (x_l gamma p_lk) <= 1.
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      const double own = g.at(l, k, l);
      const Monomial signal(own / inst.alpha_at(l, k),
                            {{out.x_var(l), 1.0}, {out.p_var(l, k), 1.0}});
      std::vector<Monomial> interference{Monomial(1.0)};
      for (int j = 0; j < L; ++j) {
        const bool shared = inst.shares_pilot(l, j);
        double leak = inst.beta_at(l, k, j);
        if (inst.precoder == Precoder::ZF && shared) leak -= g.at(l, k, j);
        if (leak > 0.0)
          for (int kk = 0; kk < K; ++kk) interference.emplace_back(leak, std::map<gp::VarId, double>{{out.p_var(j, kk), 1.0}});
        if (shared && j != l)
          interference.emplace_back(g.at(l, k, j), std::map<gp::VarId, double>{{out.x_var(j), 1.0}, {out.p_var(j, k), 1.0}});
      }
      gpf.inequalities.push_back(Posynomial(std::move(interference)) / signal);
    }
  }
  for (int l = 0; l < L; ++l)
    gpf.inequalities.push_back(Posynomial(Monomial(1.0 / x_max, {{out.x_var(l), 1.0}})));
  for (int l = 0; l < L; ++l) {
    std::vector<Monomial> cell;
    for (int k = 0; k < K; ++k) cell.emplace_back(1.0 / inst.rho_dl[l], std::map<gp::VarId, double>{{out.p_var(l, k), 1.0}});
    gpf.inequalities.push_back(Posynomial(std::move(cell)));
  }
  return out;
}

struct P4Options {
  bool refine = true;  // greedy +-1 moves per cell after rounding up
  double gp_tol = 1e-8;
};

/// Joint optimum via GP relaxation, ceiling rounding and greedy refinement.
/// Throws NumericalError if the GP does not converge.
inline MCSolution solve_p4(const MultiCellInstance& inst, const GammaTable& g, const P4Options& opt = {}) {
  const MCSystem sys = build_mc_system(inst, g);
  MCSolution sol;
  if (sys.coherent_radius >= 1.0 - kFeasibilityMargin) {
    sol.status = SolveStatus::InfeasibleCoherent;
    return sol;
  }
  // Feasibility only grows with antennas and power only falls, so M_max decides existence.
  const MCSolution at_max = detail::evaluate_antennas(inst, sys, AntennaVector::uniform(inst.L, inst.m_max));
  if (!at_max.feasible()) {
    sol.status = at_max.status;
    return sol;
  }

  const P4Gp p4 = build_p4_gp(inst, g);
  gp::SolverOptions so;
  so.tol = opt.gp_tol;
  const gp::Result gr = gp::solve(p4.gp, so);
  if (gr.status != gp::Status::Optimal)
    throw NumericalError("solve_p4: GP solver returned " + std::string(gp::to_string(gr.status)), gr.cost);

  sol.gp_newton_steps = gr.newton_steps;
  sol.gp_lower_bound = gr.cost + p4.objective_constant;
  sol.gp_continuous_m.resize(inst.L);
  AntennaVector rounded;
  rounded.m.resize(inst.L);
  const int lo = inst.m_floor();
  for (int l = 0; l < inst.L; ++l) {
    const double m_cont = antennas_from_effective(inst.precoder, gr.x[p4.x_var(l)], inst.K);
    sol.gp_continuous_m[l] = m_cont;
    // Values a hair above an integer are solver noise, not a reason to add an antenna.
    rounded.m[l] = std::clamp(static_cast<int>(std::ceil(m_cont - 1e-6)), lo, inst.m_max);
  }

  MCSolution best = detail::evaluate_antennas(inst, sys, rounded);
  if (!best.feasible()) {
    for (int l = 0; l < inst.L; ++l)
      rounded.m[l] = std::clamp(static_cast<int>(std::ceil(sol.gp_continuous_m[l])), lo, inst.m_max);
    best = detail::evaluate_antennas(inst, sys, rounded);
  }
  if (!best.feasible()) best = at_max;  // cannot happen when the GP optimum is accurate
  const AntennaVector ceil_m = best.m;
  const double ceil_cost = best.cost;

  if (opt.refine) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int l = 0; l < inst.L; ++l) {
        for (int step : {-1, +1}) {
          AntennaVector cand = best.m;
          cand.m[l] += step;
          if (cand.m[l] < lo || cand.m[l] > inst.m_max) continue;
          MCSolution trial = detail::evaluate_antennas(inst, sys, cand);
          if (trial.feasible() && trial.cost < best.cost * (1.0 - 1e-12)) {
            best = std::move(trial);
            improved = true;
          }
        }
      }
    }
  }

  best.gp_continuous_m = std::move(sol.gp_continuous_m);
  best.gp_lower_bound = sol.gp_lower_bound;
  best.gp_newton_steps = sol.gp_newton_steps;
  best.ceil_m = ceil_m;
  best.ceil_cost = ceil_cost;
  return best;
}

inline MCSolution solve_p4(const MultiCellInstance& inst, const P4Options& opt = {}) {
  return solve_p4(inst, compute_gammas_mc(inst), opt);
}

inline constexpr double kExhaustiveGuard = 1e6;

/// Number of antenna vectors exhaustive_p4 would visit: M_max^L.
inline double exhaustive_combinations(const MultiCellInstance& inst) {
  return std::pow(static_cast<double>(inst.m_max), inst.L);
}

/// Ground truth for the joint problem by enumerating every antenna vector.
/// Ties keep the lexicographically smallest vector. Refuses when M_max^L >= 1e6.
inline MCSolution exhaustive_p4(const MultiCellInstance& inst, const GammaTable& g) {
  if (exhaustive_combinations(inst) >= kExhaustiveGuard)
    throw ConfigError("exhaustive_p4: M_max^L = " + std::to_string(exhaustive_combinations(inst)) +
                      " combinations exceeds the 1e6 guard");
  const MCSystem sys = build_mc_system(inst, g);
  MCSolution best;
  if (sys.coherent_radius >= 1.0 - kFeasibilityMargin) {
    best.status = SolveStatus::InfeasibleCoherent;
    return best;
  }
  const int lo = inst.m_floor();
  AntennaVector m = AntennaVector::uniform(inst.L, lo);
  bool any_sinr_feasible = false;
  while (true) {
    MCSolution cand = detail::evaluate_antennas(inst, sys, m);
    if (cand.status != SolveStatus::InfeasibleSINR) any_sinr_feasible = true;
    if (cand.feasible() && !(best.feasible() && cand.cost >= best.cost)) best = std::move(cand);
    int l = inst.L - 1;
    while (l >= 0 && m.m[l] == inst.m_max) m.m[l--] = lo;
    if (l < 0) break;
    ++m.m[l];
  }
  if (!best.feasible()) best.status = any_sinr_feasible ? SolveStatus::InfeasiblePower : SolveStatus::InfeasibleSINR;
  return best;
}

inline MCSolution exhaustive_p4(const MultiCellInstance& inst) { return exhaustive_p4(inst, compute_gammas_mc(inst)); }

}  // namespace mimopc
