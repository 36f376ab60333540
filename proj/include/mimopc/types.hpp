#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mimopc {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical kernel cannot deliver its accuracy contract.
/// Carries the best value reached so callers can still report it.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double best_estimate = 0.0)
      : std::runtime_error(what), best_estimate_(best_estimate) {}
  double best_estimate() const noexcept { return best_estimate_; }

 private:
  double best_estimate_;
};

enum class Precoder { MRT, ZF };

inline std::string_view to_string(Precoder p) { return p == Precoder::MRT ? "mrt" : "zf"; }

inline Precoder parse_precoder(std::string_view s) {
  if (s == "mrt" || s == "MRT") return Precoder::MRT;
  if (s == "zf" || s == "ZF") return Precoder::ZF;
  throw ConfigError("unknown precoder '" + std::string(s) + "' (expected mrt or zf)");
}

enum class SolveStatus { Feasible, InfeasibleSINR, InfeasiblePower, InfeasibleCoherent };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::InfeasibleSINR: return "infeasible_sinr";
    case SolveStatus::InfeasiblePower: return "infeasible_power";
    case SolveStatus::InfeasibleCoherent: return "infeasible_coherent";
  }
  return "unknown";
}

/// Spectral radii within this distance of the feasibility boundary count as infeasible.
inline constexpr double kFeasibilityMargin = 1e-9;

// Effective antenna count: M for MRT, M - K for ZF.
inline double effective_antennas(Precoder p, double m, int users) {
  return p == Precoder::MRT ? m : m - users;
}
inline double antennas_from_effective(Precoder p, double mbar, int users) {
  return p == Precoder::MRT ? mbar : mbar + users;
}

// Flattened user index (cell l, user k) -> l*K + k. All multi-cell code goes through these.
inline int flat_index(int cell, int user, int users_per_cell) { return cell * users_per_cell + user; }
inline int cell_of(int flat, int users_per_cell) { return flat / users_per_cell; }
inline int user_of(int flat, int users_per_cell) { return flat % users_per_cell; }

}  // namespace mimopc
