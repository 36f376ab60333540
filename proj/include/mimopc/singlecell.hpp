#pragma once

// Single-cell joint antenna/power optimization with MRT or ZF precoding.
//
// With SINR_k >= alpha_k for all k the constraints stack into
//   (Mbar I - T F) p >= nu,   T = diag(alpha), F = f 1^T, nu_k = alpha_k / gamma_k,
// where Mbar = M (MRT) or M - K (ZF). T F is rank one, so its spectral radius is
// its trace and the minimum-power solution has a closed form; total power is
// tau / (Mbar - tr TF) with tau = sum nu.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mimopc/linalg.hpp"
#include "mimopc/scenario.hpp"
#include "mimopc/types.hpp"

namespace mimopc {

struct SingleCellInstance {
  Vector beta;
  Vector gamma;
  Vector alpha;
  double rho_dl = 1.0;
  int m_max = 1;
  double c = 0.0;
  Precoder precoder = Precoder::MRT;

  int K() const { return static_cast<int>(beta.size()); }

  void validate() const {
    if (beta.size() == 0 || gamma.size() != beta.size() || alpha.size() != beta.size())
      throw ConfigError("single-cell instance: beta, gamma, alpha must be nonempty and equal length");
    for (Eigen::Index k = 0; k < beta.size(); ++k) {
      if (!(beta[k] > 0.0) || !(gamma[k] > 0.0) || !(alpha[k] > 0.0))
        throw ConfigError("single-cell instance: beta, gamma, alpha must be positive");
      if (gamma[k] > beta[k]) throw ConfigError("single-cell instance: gamma must not exceed beta");
    }
    if (!(rho_dl > 0.0)) throw ConfigError("single-cell instance: rho_dl must be positive");
    if (!(c >= 0.0)) throw ConfigError("single-cell instance: c must be nonnegative");
    if (m_max < 1) throw ConfigError("single-cell instance: m_max must be >= 1");
    if (precoder == Precoder::ZF && m_max <= K())
      throw ConfigError("single-cell instance: ZF needs m_max > K");
  }
};

/// Cell 0 of a one-cell multi-cell instance, with its estimate quality.
inline SingleCellInstance single_cell_view(const MultiCellInstance& inst, const GammaTable& g) {
  if (inst.L != 1) throw ConfigError("single_cell_view: instance has more than one cell");
  SingleCellInstance sc;
  sc.beta.resize(inst.K);
  sc.gamma.resize(inst.K);
  sc.alpha.resize(inst.K);
  for (int k = 0; k < inst.K; ++k) {
    sc.beta[k] = inst.beta_at(0, k, 0);
    sc.gamma[k] = g.at(0, k, 0);
    sc.alpha[k] = inst.alpha_at(0, k);
  }
  sc.rho_dl = inst.rho_dl[0];
  sc.m_max = inst.m_max;
  sc.c = inst.c;
  sc.precoder = inst.precoder;
  return sc;
}

struct SCSystem {
  Vector t_diag;  // alpha
  Vector f_row;   // beta/gamma (MRT) or (beta-gamma)/gamma (ZF)
  Vector nu;      // alpha/gamma
  int mbar_max = 0;
  double trace_tf = 0.0;
  double tau = 0.0;

  /// T F as u 1^T with u = alpha .* f.
  RankOneMatrix tf() const {
    return {t_diag.cwiseProduct(f_row), Vector::Ones(t_diag.size())};
  }
};

inline SCSystem build_sc_system(const SingleCellInstance& inst) {
  inst.validate();
  SCSystem sys;
  const int K = inst.K();
  sys.t_diag = inst.alpha;
  if (inst.precoder == Precoder::MRT)
    sys.f_row = inst.beta.cwiseQuotient(inst.gamma);
  else
    sys.f_row = (inst.beta - inst.gamma).cwiseQuotient(inst.gamma);
  sys.nu = inst.alpha.cwiseQuotient(inst.gamma);
  sys.mbar_max = static_cast<int>(effective_antennas(inst.precoder, inst.m_max, K));
  sys.trace_tf = sys.t_diag.dot(sys.f_row);
  sys.tau = sys.nu.sum();
  return sys;
}

/// Effective SINR per user at antenna count m (physical antennas).
inline Vector effective_sinr_sc(const SingleCellInstance& inst, const Vector& p, double m) {
  const int K = inst.K();
  if (p.size() != K) throw DomainError("effective_sinr_sc: power vector has wrong length");
  if ((p.array() < 0.0).any()) throw DomainError("effective_sinr_sc: negative power");
  const double mbar = effective_antennas(inst.precoder, m, K);
  if (!(mbar > 0.0))
    throw DomainError(inst.precoder == Precoder::ZF ? "effective_sinr_sc: ZF needs m > K"
                                                    : "effective_sinr_sc: m must be positive");
  const double total = p.sum();
  Vector sinr(K);
  for (int k = 0; k < K; ++k) {
    const double leak = inst.precoder == Precoder::MRT ? inst.beta[k] : inst.beta[k] - inst.gamma[k];
    sinr[k] = mbar * inst.gamma[k] * p[k] / (1.0 + leak * total);
  }
  return sinr;
}

struct PowerSolution {
  SolveStatus status = SolveStatus::InfeasibleSINR;
  Vector p;

  bool feasible() const { return status == SolveStatus::Feasible; }
};

/// Minimum-power vector at effective antenna count mbar:
///   p = (1/Mbar) (I + T F / (Mbar - tr TF)) nu,
/// feasible iff tr(TF) < Mbar.
inline PowerSolution min_power_sc(const SCSystem& sys, double mbar) {
  if (!(mbar > 0.0)) throw DomainError("min_power_sc: mbar must be positive");
  PowerSolution out;
  if (sys.trace_tf >= mbar * (1.0 - kFeasibilityMargin)) return out;
  RankOneMatrix b = sys.tf();
  b.left /= mbar;
  out.p = rank_one_resolvent_apply(b, sys.nu) / mbar;
  out.status = SolveStatus::Feasible;
  return out;
}

inline PowerSolution min_power_sc(const SingleCellInstance& inst, double mbar) {
  return min_power_sc(build_sc_system(inst), mbar);
}

namespace detail {

// Smallest integer strictly above x; values within 1e-9 of an integer n give n + 1.
inline int strict_ceil(double x) {
  const double n = std::round(x);
  if (std::abs(x - n) <= 1e-9) return static_cast<int>(n) + 1;
  return static_cast<int>(std::ceil(x));
}

// Smallest integer at or above x; values within 1e-9 of an integer n give n.
inline int snapped_ceil(double x) {
  const double n = std::round(x);
  if (std::abs(x - n) <= 1e-9) return static_cast<int>(n);
  return static_cast<int>(std::ceil(x));
}

}  // namespace detail

/// Smallest effective antenna count meeting the SINR targets.
inline int m_min_sinr(const SCSystem& sys) { return std::max(1, detail::strict_ceil(sys.trace_tf)); }
inline int m_min_sinr(const SingleCellInstance& inst) { return m_min_sinr(build_sc_system(inst)); }

/// Continuous lower bound on Mbar from SINR and the power budget: tau/rho_d + tr(TF).
inline double m_min_joint_continuous(const SCSystem& sys, double rho_dl) {
  return sys.tau / rho_dl + sys.trace_tf;
}

/// Smallest effective antenna count meeting both SINR and power constraints.
inline int m_min_joint(const SCSystem& sys, double rho_dl) {
  if (!(rho_dl > 0.0)) throw DomainError("m_min_joint: rho_dl must be positive");
  return std::max(m_min_sinr(sys), detail::snapped_ceil(m_min_joint_continuous(sys, rho_dl)));
}
inline int m_min_joint(const SingleCellInstance& inst) {
  return m_min_joint(build_sc_system(inst), inst.rho_dl);
}

/// Unconstrained stationary point tr(TF) + sqrt(tau / c) of the reduced cost; +inf for c = 0.
inline double m_dagger(const SCSystem& sys, double c) {
  if (c == 0.0) return std::numeric_limits<double>::infinity();
  return sys.trace_tf + std::sqrt(sys.tau / c);
}
inline double m_dagger(const SingleCellInstance& inst) { return m_dagger(build_sc_system(inst), inst.c); }

/// Continuous optimum clamped to [m_min_joint, Mbar_max]; Mbar_max when c = 0.
inline double m_opt_continuous(const SingleCellInstance& inst) {
  const SCSystem sys = build_sc_system(inst);
  if (inst.c == 0.0) return sys.mbar_max;
  const double lo = m_min_joint(sys, inst.rho_dl);
  return std::min<double>(sys.mbar_max, std::max(m_dagger(sys, inst.c), lo));
}

/// c * Mbar + sum(p).
inline double cost_u(double c, double mbar, const Vector& p) {
  if ((p.array() < 0.0).any()) throw DomainError("cost_u: negative power");
  return c * mbar + p.sum();
}
inline double cost_u(const SingleCellInstance& inst, double mbar, const Vector& p) {
  return cost_u(inst.c, mbar, p);
}

/// Cost after optimizing powers at fixed Mbar: c Mbar + tau / (Mbar - tr TF).
inline double reduced_cost(const SCSystem& sys, double c, double mbar) {
  if (!(mbar > sys.trace_tf)) return std::numeric_limits<double>::infinity();
  return c * mbar + sys.tau / (mbar - sys.trace_tf);
}

struct SCSolution {
  SolveStatus status = SolveStatus::InfeasibleSINR;
  int mbar_star = 0;
  int m_star = 0;  // physical antennas
  Vector p_star;
  double cost = std::numeric_limits<double>::quiet_NaN();           // c Mbar + sum p
  double cost_antennas = std::numeric_limits<double>::quiet_NaN();  // c M + sum p
  double m_continuous = std::numeric_limits<double>::quiet_NaN();   // clamped relaxed Mbar
};

/// Joint optimum over integer Mbar. Ties between floor and ceil go to fewer antennas.
inline SCSolution solve_p2(const SingleCellInstance& inst) {
  const SCSystem sys = build_sc_system(inst);
  SCSolution sol;
  if (!min_power_sc(sys, sys.mbar_max).feasible()) {
    sol.status = SolveStatus::InfeasibleSINR;
    return sol;
  }
  const int lo = m_min_joint(sys, inst.rho_dl);
  if (lo > sys.mbar_max) {
    sol.status = SolveStatus::InfeasiblePower;
    return sol;
  }

  int best = sys.mbar_max;
  if (inst.c == 0.0) {
    sol.m_continuous = sys.mbar_max;
  } else {
    sol.m_continuous = std::min<double>(sys.mbar_max, std::max<double>(m_dagger(sys, inst.c), lo));
    const int down = std::clamp(static_cast<int>(std::floor(sol.m_continuous)), lo, sys.mbar_max);
    const int up = std::clamp(static_cast<int>(std::ceil(sol.m_continuous)), lo, sys.mbar_max);
    best = reduced_cost(sys, inst.c, up) < reduced_cost(sys, inst.c, down) ? up : down;
  }

  const PowerSolution power = min_power_sc(sys, best);
  sol.status = SolveStatus::Feasible;
  sol.mbar_star = best;
  sol.m_star = static_cast<int>(antennas_from_effective(inst.precoder, best, inst.K()));
  sol.p_star = power.p;
  sol.cost = cost_u(inst.c, best, power.p);
  sol.cost_antennas = cost_u(inst.c, sol.m_star, power.p);
  return sol;
}

/// Difference of the relaxed optimal antenna counts, MRT minus ZF, in physical
/// antennas: sum(alpha) - K.
inline double mrt_zf_gap(const SingleCellInstance& inst) {
  return inst.alpha.sum() - static_cast<double>(inst.K());
}

}  // namespace mimopc
