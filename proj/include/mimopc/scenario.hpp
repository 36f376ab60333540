#pragma once

// Network geometry, large-scale fading, pilot groups and channel-estimate
// quality. Every power and gain leaving this header is noise-normalized.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mimopc/types.hpp"

namespace mimopc {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct GridConfig {
  int grid_side = 4;          // cells per axis
  double cell_edge_m = 250.0;
  double d_min_m = 15.0;
  int users_per_cell = 8;
  std::uint64_t seed = 1;
  int pilot_reuse = 1;

  int cells() const { return grid_side * grid_side; }

  void validate() const {
    if (grid_side < 1) throw ConfigError("grid_side must be >= 1");
    if (!(cell_edge_m > 0.0)) throw ConfigError("cell_edge_m must be positive");
    if (!(d_min_m >= 0.0) || !(d_min_m < cell_edge_m / 2.0))
      throw ConfigError("d_min_m must lie in [0, cell_edge_m/2)");
    if (users_per_cell < 1) throw ConfigError("users_per_cell must be >= 1");
    if (pilot_reuse < 1) throw ConfigError("pilot_reuse must be >= 1");
  }
};

/// Radio parameters in physical units. Defaults follow the usual 20 MHz desk setup.
struct RadioParams {
  double bandwidth_hz = 20e6;
  double noise_w = 2e-13;  // B_w * sigma^2
  double rho_dl_w = 1.0;
  double rho_ul_w = 0.1;
  double np_over_k = 1.0;
  int m_max = 100;
  double c = 0.0;  // per-antenna cost, already in noise-normalized power units
  Precoder precoder = Precoder::MRT;

  double rho_dl_normalized() const { return rho_dl_w / noise_w; }
  double rho_ul_normalized() const { return rho_ul_w / noise_w; }

  void validate() const {
    if (!(bandwidth_hz > 0.0)) throw ConfigError("bandwidth_hz must be positive");
    if (!(noise_w > 0.0)) throw ConfigError("noise_w must be positive");
    if (!(rho_dl_w > 0.0)) throw ConfigError("rho_dl_w must be positive");
    if (!(rho_ul_w > 0.0)) throw ConfigError("rho_ul_w must be positive");
    if (!(np_over_k >= 1.0)) throw ConfigError("np_over_k must be >= 1");
    if (m_max < 1) throw ConfigError("m_max must be >= 1");
    if (!(c >= 0.0)) throw ConfigError("c must be nonnegative");
  }
};

class CellLayout {
 public:
  int grid_side = 0;
  double cell_edge_m = 0.0;
  std::vector<Point> bs_positions;                // one per cell, cell l = row * grid_side + col
  std::vector<std::vector<Point>> user_positions;  // [cell][user]

  int cells() const { return static_cast<int>(bs_positions.size()); }
  int users_per_cell() const {
    return user_positions.empty() ? 0 : static_cast<int>(user_positions.front().size());
  }

  /// Euclidean distance on the wrap-around torus spanned by the grid.
  double wrap_distance(Point a, Point b) const {
    const double span = grid_side * cell_edge_m;
    auto wrap = [span](double d) {
      d = std::fmod(std::abs(d), span);
      return std::min(d, span - d);
    };
    return std::hypot(wrap(a.x - b.x), wrap(a.y - b.y));
  }
};

/// Uniform user drop in each square cell, rejection-sampled to keep d_min from
/// the serving BS. Users are drawn cell by cell from one stream; with a single
/// cell, the K-user drop is a prefix of any larger drop from the same seed.
inline CellLayout generate_layout(const GridConfig& cfg) {
  cfg.validate();
  CellLayout layout;
  layout.grid_side = cfg.grid_side;
  layout.cell_edge_m = cfg.cell_edge_m;
  const int L = cfg.cells();
  layout.bs_positions.resize(L);
  layout.user_positions.assign(L, std::vector<Point>(cfg.users_per_cell));

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int l = 0; l < L; ++l) {
    const int row = l / cfg.grid_side;
    const int col = l % cfg.grid_side;
    const Point corner{col * cfg.cell_edge_m, row * cfg.cell_edge_m};
    const Point bs{corner.x + cfg.cell_edge_m / 2.0, corner.y + cfg.cell_edge_m / 2.0};
    layout.bs_positions[l] = bs;
    for (int k = 0; k < cfg.users_per_cell; ++k) {
      Point u;
      do {
        u = {corner.x + unit(rng) * cfg.cell_edge_m, corner.y + unit(rng) * cfg.cell_edge_m};
      } while (std::hypot(u.x - bs.x, u.y - bs.y) < cfg.d_min_m);
      layout.user_positions[l][k] = u;
    }
  }
  return layout;
}

/// Linear gain for path plus penetration loss 130 + 37.6 log10(d) dB, d in km.
inline double pathloss(double d_km) {
  if (!(d_km > 0.0)) throw DomainError("pathloss: distance must be positive");
  return std::pow(10.0, -(130.0 + 37.6 * std::log10(d_km)) / 10.0);
}

/// Pilot group id per cell. reuse 1: one shared group; reuse L: all orthogonal;
/// reuse 2: checkerboard; reuse 4: 2x2 tiling. 2 and 4 need an even grid side
/// to stay a proper coloring on the torus.
inline std::vector<int> assign_pilots(const CellLayout& layout, int reuse) {
  const int L = layout.cells();
  const int side = layout.grid_side;
  std::vector<int> group(L, 0);
  if (reuse == 1) return group;
  if (reuse == L) {
    for (int l = 0; l < L; ++l) group[l] = l;
    return group;
  }
  if ((reuse == 2 || reuse == 4) && side % 2 == 0) {
    for (int l = 0; l < L; ++l) {
      const int row = l / side;
      const int col = l % side;
      group[l] = reuse == 2 ? (row + col) % 2 : (row % 2) * 2 + col % 2;
    }
    return group;
  }
  throw ConfigError("pilot_reuse " + std::to_string(reuse) + " is not a valid coloring of a " +
                    std::to_string(side) + "x" + std::to_string(side) + " torus");
}

struct MultiCellInstance {
  int L = 0;
  int K = 0;
  std::vector<double> beta;      // beta(l,k,j): user k of cell l to BS j
  std::vector<int> pilot_group;  // per cell
  std::vector<double> alpha;     // alpha(l,k)
  double np = 1.0;
  double rho_ul = 1.0;
  std::vector<double> rho_dl;    // per-cell downlink budget
  int m_max = 1;
  double c = 0.0;
  Precoder precoder = Precoder::MRT;

  MultiCellInstance() = default;
  MultiCellInstance(int cells, int users)
      : L(cells), K(users),
        beta(static_cast<std::size_t>(cells) * users * cells, 0.0),
        pilot_group(cells, 0),
        alpha(static_cast<std::size_t>(cells) * users, 1.0),
        rho_dl(cells, 1.0) {}

  double& beta_at(int l, int k, int j) { return beta[(static_cast<std::size_t>(l) * K + k) * L + j]; }
  double beta_at(int l, int k, int j) const {
    return beta[(static_cast<std::size_t>(l) * K + k) * L + j];
  }
  double& alpha_at(int l, int k) { return alpha[static_cast<std::size_t>(l) * K + k]; }
  double alpha_at(int l, int k) const { return alpha[static_cast<std::size_t>(l) * K + k]; }
  bool shares_pilot(int l, int j) const { return pilot_group[l] == pilot_group[j]; }

  /// Lowest antenna count the precoder can run with.
  int m_floor() const { return precoder == Precoder::MRT ? 1 : K + 1; }

  void validate() const {
    if (L < 1 || K < 1) throw ConfigError("instance needs L >= 1 and K >= 1");
    const auto lk = static_cast<std::size_t>(L) * K;
    if (beta.size() != lk * L || alpha.size() != lk || pilot_group.size() != std::size_t(L) ||
        rho_dl.size() != std::size_t(L))
      throw ConfigError("instance arrays do not match L and K");
    for (double b : beta)
      if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("all beta must be positive and finite");
    for (double a : alpha)
      if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("all alpha must be positive and finite");
    if (np < K) throw ConfigError("pilot length np must be >= K");
    if (!(rho_ul >= 0.0)) throw ConfigError("rho_ul must be nonnegative");
    for (double r : rho_dl)
      if (!(r >= 0.0)) throw ConfigError("rho_dl must be nonnegative");
    if (!(c >= 0.0)) throw ConfigError("c must be nonnegative");
    if (m_max < 1) throw ConfigError("m_max must be >= 1");
    if (precoder == Precoder::ZF && m_max <= K) throw ConfigError("ZF needs m_max > K");
  }
};

/// gamma(l,k,j): mean-square estimate coefficient of user (l,k) at BS j; zero
/// unless j shares the pilot group of l.
struct GammaTable {
  int L = 0;
  int K = 0;
  std::vector<double> gamma;

  GammaTable() = default;
  GammaTable(int cells, int users)
      : L(cells), K(users), gamma(static_cast<std::size_t>(cells) * users * cells, 0.0) {}

  double& at(int l, int k, int j) { return gamma[(static_cast<std::size_t>(l) * K + k) * L + j]; }
  double at(int l, int k, int j) const {
    return gamma[(static_cast<std::size_t>(l) * K + k) * L + j];
  }
};

inline double compute_gamma_sc(double beta, double np, double rho_ul) {
  if (!(beta > 0.0) || !(rho_ul > 0.0) || !(np >= 1.0))
    throw DomainError("compute_gamma_sc: need beta > 0, rho_ul > 0, np >= 1");
  const double snr = np * rho_ul * beta;
  return snr * beta / (1.0 + snr);
}

inline GammaTable compute_gammas_mc(const MultiCellInstance& inst) {
  inst.validate();
  GammaTable g(inst.L, inst.K);
  const double scale = inst.np * inst.rho_ul;
  for (int j = 0; j < inst.L; ++j) {
    for (int k = 0; k < inst.K; ++k) {
      // Pilot k observed at BS j carries every cell in j's group.
      double received = 0.0;
      for (int l = 0; l < inst.L; ++l)
        if (inst.shares_pilot(l, j)) received += inst.beta_at(l, k, j);
      const double denom = 1.0 + scale * received;
      for (int l = 0; l < inst.L; ++l) {
        if (!inst.shares_pilot(l, j)) continue;
        const double b = inst.beta_at(l, k, j);
        g.at(l, k, j) = scale * b * b / denom;
      }
    }
  }
  return g;
}

/// SINR targets, one per (cell, user).
using TargetMatrix = std::vector<std::vector<double>>;

/// Turns a layout into a solver-ready, noise-normalized instance.
inline MultiCellInstance build_instance(const CellLayout& layout, const GridConfig& cfg,
                                        const TargetMatrix& targets, const RadioParams& radio) {
  cfg.validate();
  radio.validate();
  const int L = layout.cells();
  const int K = layout.users_per_cell();
  if (static_cast<int>(targets.size()) != L)
    throw ConfigError("targets: expected one row per cell");
  MultiCellInstance inst(L, K);
  for (int l = 0; l < L; ++l) {
    if (static_cast<int>(targets[l].size()) != K)
      throw ConfigError("targets: expected one value per user");
    for (int k = 0; k < K; ++k) {
      inst.alpha_at(l, k) = targets[l][k];
      for (int j = 0; j < L; ++j) {
        const double d_km =
            layout.wrap_distance(layout.user_positions[l][k], layout.bs_positions[j]) / 1000.0;
        inst.beta_at(l, k, j) = pathloss(d_km) / radio.noise_w;
      }
    }
  }
  inst.pilot_group = assign_pilots(layout, cfg.pilot_reuse);
  inst.np = std::round(radio.np_over_k * K);
  inst.rho_ul = radio.rho_ul_normalized();
  inst.rho_dl.assign(L, radio.rho_dl_normalized());
  inst.m_max = radio.m_max;
  inst.c = radio.c;
  inst.precoder = radio.precoder;
  inst.validate();
  return inst;
}

inline MultiCellInstance build_instance(const CellLayout& layout, const GridConfig& cfg,
                                        double uniform_target, const RadioParams& radio) {
  return build_instance(
      layout, cfg,
      TargetMatrix(layout.cells(), std::vector<double>(layout.users_per_cell(), uniform_target)),
      radio);
}

/// First `cells` cells of an instance, dropping every other cell entirely.
/// Used when an exhaustive search needs fewer cells than any square grid has.
inline MultiCellInstance restrict_cells(const MultiCellInstance& inst, int cells) {
  if (cells < 1 || cells > inst.L) throw ConfigError("restrict_cells: cell count out of range");
  MultiCellInstance out(cells, inst.K);
  for (int l = 0; l < cells; ++l) {
    out.pilot_group[l] = inst.pilot_group[l];
    out.rho_dl[l] = inst.rho_dl[l];
    for (int k = 0; k < inst.K; ++k) {
      out.alpha_at(l, k) = inst.alpha_at(l, k);
      for (int j = 0; j < cells; ++j) out.beta_at(l, k, j) = inst.beta_at(l, k, j);
    }
  }
  out.np = inst.np;
  out.rho_ul = inst.rho_ul;
  out.m_max = inst.m_max;
  out.c = inst.c;
  out.precoder = inst.precoder;
  return out;
}

}  // namespace mimopc
