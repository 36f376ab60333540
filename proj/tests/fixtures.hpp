#pragma once

// Random instance generators and brute-force oracles shared by the tests and
// the acceptance runner. Oracles deliberately avoid the library's closed forms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mimopc/gp.hpp"
#include "mimopc/multicell.hpp"
#include "mimopc/scenario.hpp"
#include "mimopc/singlecell.hpp"

namespace fixtures {

using mimopc::GammaTable;
using mimopc::Matrix;
using mimopc::MultiCellInstance;
using mimopc::Precoder;
using mimopc::SingleCellInstance;
using mimopc::Vector;

namespace gp = mimopc::gp;
using mimopc::effective_antennas;

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Any valid single-cell instance; may be infeasible.
inline SingleCellInstance random_sc(Rng& rng, int k_max, Precoder pc) {
  const int K = uniform_int(rng, 1, k_max);
  SingleCellInstance sc;
  sc.beta.resize(K);
  sc.gamma.resize(K);
  sc.alpha.resize(K);
  for (int k = 0; k < K; ++k) {
    sc.beta[k] = log_uniform(rng, 0.1, 10.0);
    sc.gamma[k] = sc.beta[k] * uniform(rng, 0.2, 0.95);
    sc.alpha[k] = log_uniform(rng, 0.2, 3.0);
  }
  sc.precoder = pc;
  sc.m_max = uniform_int(rng, K + 2, 40 * K + 20);
  sc.rho_dl = log_uniform(rng, 0.2, 20.0) * K;
  sc.c = log_uniform(rng, 1e-3, 2.0);
  return sc;
}

/// Redraws until solve_p2 reports a feasible instance.
inline SingleCellInstance random_feasible_sc(Rng& rng, int k_max, Precoder pc) {
  while (true) {
    SingleCellInstance sc = random_sc(rng, k_max, pc);
    if (mimopc::solve_p2(sc).status == mimopc::SolveStatus::Feasible) return sc;
  }
}

/// Multi-cell instance with strong own-cell gains and weaker cross gains.
inline MultiCellInstance random_mc(Rng& rng, int L, int K, Precoder pc, int m_max, bool shared_pilots) {
  MultiCellInstance inst(L, K);
  for (int l = 0; l < L; ++l) {
    inst.pilot_group[l] = shared_pilots ? 0 : uniform_int(rng, 0, 1);
    inst.rho_dl[l] = log_uniform(rng, 1.0, 50.0) * K;
    for (int k = 0; k < K; ++k) {
      inst.alpha_at(l, k) = log_uniform(rng, 0.3, 2.0);
      const double own = log_uniform(rng, 0.5, 5.0);
      for (int j = 0; j < L; ++j) inst.beta_at(l, k, j) = j == l ? own : own * log_uniform(rng, 0.005, 0.2);
    }
  }
  inst.np = K;
  inst.rho_ul = log_uniform(rng, 0.5, 10.0);
  inst.m_max = m_max;
  inst.c = log_uniform(rng, 1e-3, 0.3);
  inst.precoder = pc;
  return inst;
}

/// Two cells, one user each, symmetric gains; estimate quality set directly so
/// that A = [[0, 0.25], [0.25, 0]].
inline MultiCellInstance symmetric_two_cell(Precoder pc, double alpha) {
  MultiCellInstance inst(2, 1);
  inst.beta_at(0, 0, 0) = inst.beta_at(1, 0, 1) = 1.0;
  inst.beta_at(0, 0, 1) = inst.beta_at(1, 0, 0) = 0.25;
  inst.alpha.assign(2, alpha);
  inst.np = 1;
  inst.rho_ul = 1.0;
  inst.rho_dl.assign(2, 1e9);
  inst.m_max = 100;
  inst.precoder = pc;
  return inst;
}

inline GammaTable symmetric_two_cell_gamma() {
  GammaTable g(2, 1);
  g.at(0, 0, 0) = g.at(1, 0, 1) = 0.5;
  g.at(0, 0, 1) = g.at(1, 0, 0) = 0.125;
  return g;
}

// ---------------------------------------------------------------------------
// Oracles

/// Minimum power by a dense solve of (Mbar I - diag(alpha) F) p = alpha/gamma.
inline Vector dense_sc_power(const SingleCellInstance& sc, double mbar) {
  const int K = sc.K();
  Matrix a = Matrix::Identity(K, K) * mbar;
  for (int i = 0; i < K; ++i) {
    const double f = sc.precoder == Precoder::MRT ? sc.beta[i] / sc.gamma[i] : (sc.beta[i] - sc.gamma[i]) / sc.gamma[i];
    for (int j = 0; j < K; ++j) a(i, j) -= sc.alpha[i] * f;
  }
  const Vector nu = sc.alpha.cwiseQuotient(sc.gamma);
  return a.fullPivLu().solve(nu);
}

/// SINR per user written out from the signal/interference model.
inline Vector sinr_sc(const SingleCellInstance& sc, const Vector& p, double mbar) {
  Vector out(sc.K());
  const double total = p.sum();
  for (int k = 0; k < sc.K(); ++k) {
    const double interf = sc.precoder == Precoder::MRT ? sc.beta[k] * total : (sc.beta[k] - sc.gamma[k]) * total;
    out[k] = mbar * sc.gamma[k] * p[k] / (1.0 + interf);
  }
  return out;
}

/// Brute force over integer Mbar in [lo, Mbar_max]: the first minimizer of c Mbar + sum p.
struct GridOptimum {
  int mbar = 0;
  double cost = std::numeric_limits<double>::infinity();
  std::vector<double> costs;  // indexed by mbar - lo
  int lo = 0;
};

inline GridOptimum grid_search_sc(const SingleCellInstance& sc) {
  GridOptimum g;
  const int mbar_max = sc.precoder == Precoder::MRT ? sc.m_max : sc.m_max - sc.K();
  // smallest Mbar whose dense solution is positive and within the budget
  for (int mb = 1; mb <= mbar_max; ++mb) {
    const Vector p = dense_sc_power(sc, mb);
    const bool ok = (p.array() > 0.0).all() && p.sum() <= sc.rho_dl * (1.0 + 1e-12);
    if (!ok) {
      if (g.costs.empty()) continue;
      // monotone in Mbar, so a later failure cannot happen; keep the guard anyway
      g.costs.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    if (g.costs.empty()) g.lo = mb;
    const double u = sc.c * mb + p.sum();
    g.costs.push_back(u);
    if (u < g.cost) {
      g.cost = u;
      g.mbar = mb;
    }
  }
  return g;
}

/// Dense SINR per flat user index for a multi-cell instance, summed term by term.
inline Vector sinr_mc(const MultiCellInstance& inst, const GammaTable& g, const Vector& p, const std::vector<int>& m) {
  const int L = inst.L;
  const int K = inst.K;
  Vector out(L * K);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      double noncoherent = 0.0;
      double coherent = 0.0;
      for (int j = 0; j < L; ++j) {
        const bool shared = inst.pilot_group[j] == inst.pilot_group[l];
        const double b = inst.beta_at(l, k, j) - (inst.precoder == Precoder::ZF && shared ? g.at(l, k, j) : 0.0);
        for (int kk = 0; kk < K; ++kk) noncoherent += b * p[j * K + kk];
        if (shared && j != l) {
          const double mbar_j = inst.precoder == Precoder::MRT ? m[j] : m[j] - K;
          coherent += mbar_j * g.at(l, k, j) * p[j * K + k];
        }
      }
      const double mbar_l = inst.precoder == Precoder::MRT ? m[l] : m[l] - K;
      out[l * K + k] = mbar_l * g.at(l, k, l) * p[l * K + k] / (1.0 + noncoherent + coherent);
    }
  }
  return out;
}

/// A single-cell instance seen as a one-cell multi-cell instance (rho_ul unused).
inline MultiCellInstance as_multicell(const SingleCellInstance& sc) {
  MultiCellInstance inst(1, sc.K());
  for (int k = 0; k < sc.K(); ++k) {
    inst.beta_at(0, k, 0) = sc.beta[k];
    inst.alpha_at(0, k) = sc.alpha[k];
  }
  inst.np = sc.K();
  inst.rho_ul = 1.0;
  inst.rho_dl = {sc.rho_dl};
  inst.m_max = sc.m_max;
  inst.c = sc.c;
  inst.precoder = sc.precoder;
  return inst;
}

inline GammaTable sc_gamma(const SingleCellInstance& sc) {
  GammaTable g(1, sc.K());
  for (int k = 0; k < sc.K(); ++k) g.at(0, k, 0) = sc.gamma[k];
  return g;
}

// GPs with known optima

// minimize x s.t. 2/x <= 1
inline gp::StandardForm tight_constraint() {
  gp::StandardForm f;
  f.add_variable("x");
  f.objective = gp::Monomial::var(0);
  f.inequalities.push_back(gp::Monomial(2.0, {{0, -1.0}}));
  return f;
}

// minimize x + 1/x
inline gp::StandardForm am_gm() {
  gp::StandardForm f;
  f.add_variable("x");
  f.objective = gp::Posynomial({gp::Monomial::var(0), gp::Monomial::var(0, -1.0)});
  return f;
}

// One-user single-cell joint problem over (p, Mbar) as a GP.
inline gp::StandardForm one_user_joint(const SingleCellInstance& sc) {
  const double f = sc.precoder == Precoder::MRT ? sc.beta[0] : sc.beta[0] - sc.gamma[0];
  const double mbar_max = effective_antennas(sc.precoder, sc.m_max, 1);
  gp::StandardForm g;
  g.add_variable("p");
  g.add_variable("mbar", 1.0, mbar_max);
  g.objective = gp::Posynomial({gp::Monomial::var(0), gp::Monomial(sc.c, {{1, 1.0}})});
  // alpha (1 + f p) / (mbar gamma p) <= 1
  const gp::Monomial signal(sc.gamma[0] / sc.alpha[0], {{0, 1.0}, {1, 1.0}});
  g.inequalities.push_back(gp::Posynomial({gp::Monomial(1.0), gp::Monomial(f, {{0, 1.0}})}) / signal);
  g.inequalities.push_back(gp::Monomial(1.0 / sc.rho_dl, {{0, 1.0}}));
  return g;
}

inline gp::StandardForm random_gp(Rng& rng, int n) {
  gp::StandardForm g;
  for (int i = 0; i < n; ++i) g.add_variable("x" + std::to_string(i));
  auto mono = [&](int max_vars) {
    gp::Monomial m(log_uniform(rng, 0.1, 10.0));
    for (int v = 0; v < max_vars; ++v)
      m.exponents[uniform_int(rng, 0, n - 1)] += uniform(rng, -2.0, 2.0);
    m.prune();
    return m;
  };
  std::vector<gp::Monomial> obj;
  for (int t = 0; t < 4; ++t) obj.push_back(mono(3));
  g.objective = gp::Posynomial(obj);
  for (int c = 0; c < 3; ++c) {
    std::vector<gp::Monomial> terms;
    for (int t = 0; t < 3; ++t) terms.push_back(mono(2));
    g.inequalities.push_back(gp::Posynomial(terms));
  }
  return g;
}

}  // namespace fixtures
