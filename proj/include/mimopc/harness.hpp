#pragma once

// Seeded Monte Carlo experiments over random drops. Each trial draws its own
// layout from splitmix64(master_seed + trial) and evaluates every (K, sweep
// value) pair; trials run on a small thread pool and are aggregated in trial
// order, so output is independent of the thread count.
//
// Output directory:
//   summary.csv   per-(k, sweep value) aggregates, header fixed per mode
//   trials.csv    one row per trial/variant evaluation
//   manifest.txt  config echo, seed, versions
//   cdf.csv       maxmin_cdf and p4_m_cdf only
//   curve.csv     p2_cost_curve only: mean cost at each effective antenna count

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "mimopc/config.hpp"
#include "mimopc/multicell.hpp"
#include "mimopc/scenario.hpp"
#include "mimopc/singlecell.hpp"
#include "mimopc/types.hpp"

namespace mimopc {

inline constexpr std::string_view kVersion = "0.1.0";

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return splitmix64(master + static_cast<std::uint64_t>(trial));
}

struct CdfPoint {
  double value = 0.0;
  double fraction = 0.0;
};

/// Empirical CDF: values ascending, k-th (1-based) paired with k/n.
inline std::vector<CdfPoint> emit_cdf(std::vector<double> values) {
  if (values.empty()) throw ConfigError("emit_cdf: no values");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::vector<CdfPoint> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = {values[i], static_cast<double>(i + 1) / n};
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

/// Shortest round-trip text; NaN becomes an empty field.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt(long long x) { return std::to_string(x); }
inline std::string fmt(int x) { return std::to_string(x); }
inline std::string fmt(std::uint64_t x) { return std::to_string(x); }

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string variant;  // which solver produced the row, e.g. "mrt", "p4", "exhaustive"
  int k = 0;
  double sweep_value = 0.0;
  std::string status;
  double total_power = std::numeric_limits<double>::quiet_NaN();
  double cost = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> m;
  double metric = std::numeric_limits<double>::quiet_NaN();  // mode specific, see README
  double wall_ms = 0.0;
  std::vector<double> series;  // aggregated but not written to trials.csv

  bool feasible() const { return status == "feasible"; }
};

inline const std::vector<std::string>& trials_header() {
  static const std::vector<std::string> h{"trial", "seed",   "variant", "k",      "sweep_value", "status",
                                          "total_power", "cost", "m", "metric", "wall_ms"};
  return h;
}

struct ExperimentResult {
  std::vector<TrialRecord> records;  // ordered by trial, then k, sweep value, variant
  CsvTable summary;
  std::map<std::string, CsvTable> extra;  // file stem -> table
  std::string manifest;
};

namespace detail {

inline MultiCellInstance trial_instance(const ExperimentConfig& cfg, std::uint64_t seed, int K) {
  GridConfig g = cfg.scenario.grid;
  g.seed = seed;
  g.users_per_cell = K;
  return build_instance(generate_layout(g), g, cfg.scenario.alpha, cfg.scenario.radio);
}

inline std::vector<int> k_list(const ExperimentConfig& cfg) {
  return cfg.k_values.empty() ? std::vector<int>{cfg.scenario.grid.users_per_cell} : cfg.k_values;
}

inline bool within_budget(const MultiCellInstance& inst, const Vector& p) {
  for (int l = 0; l < inst.L; ++l) {
    double s = 0.0;
    for (int k = 0; k < inst.K; ++k) s += p[flat_index(l, k, inst.K)];
    if (s > inst.rho_dl[l] * (1.0 + 1e-9)) return false;
  }
  return true;
}

// Runs fn into rec, turning solver exceptions into a status string.
template <typename Fn>
void guarded(TrialRecord& rec, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fn(rec);
  } catch (const NumericalError&) {
    rec.status = "numerical_error";
  } catch (const std::exception&) {
    rec.status = "error";
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!rec.feasible()) {
    rec.total_power = std::numeric_limits<double>::quiet_NaN();
    rec.cost = std::numeric_limits<double>::quiet_NaN();
  }
}

inline void fill_mc(TrialRecord& rec, const MCSolution& s) {
  rec.status = std::string(to_string(s.status));
  if (!s.feasible()) return;
  rec.total_power = s.total_power;
  rec.cost = s.cost;
  rec.m = s.m.m;
}

using TrialFn = std::function<std::vector<TrialRecord>(int trial, std::uint64_t seed)>;

inline std::vector<TrialRecord> run_trials(const ExperimentConfig& cfg, const TrialFn& fn) {
  const int n = cfg.trials;
  std::vector<std::vector<TrialRecord>> per_trial(n);
  int workers = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, n);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int t = next++; t < n; t = next++) per_trial[t] = fn(t, trial_seed(cfg.scenario.grid.seed, t));
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  std::vector<TrialRecord> out;
  for (auto& v : per_trial)
    for (auto& r : v) out.push_back(std::move(r));
  return out;
}

struct Stat {
  long count = 0;
  double sum = 0.0;
  void add(double x) {
    if (std::isnan(x)) return;
    ++count;
    sum += x;
  }
  double mean() const { return count ? sum / count : std::numeric_limits<double>::quiet_NaN(); }
};

// Records of one variant grouped by (k, sweep value), each group ordered by trial.
using Key = std::pair<int, double>;
inline std::map<Key, std::vector<const TrialRecord*>> group(const std::vector<TrialRecord>& recs,
                                                            const std::string& variant) {
  std::map<Key, std::vector<const TrialRecord*>> g;
  for (const auto& r : recs)
    if (r.variant == variant) g[{r.k, r.sweep_value}].push_back(&r);
  return g;
}

inline std::vector<std::string> head(int k, double v, long trials, long feasible) {
  return {fmt(k), fmt(v), fmt(static_cast<long long>(trials)), fmt(static_cast<long long>(feasible)),
          fmt(trials ? static_cast<double>(feasible) / trials : 0.0)};
}

inline double mean_of(const std::vector<int>& m) {
  if (m.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
}

// Power sweeps: per (k, v) mean over feasible trials plus mean over trials
// feasible at every sweep value of that k, which is the monotone-comparable series.
inline CsvTable power_sweep_summary(const std::vector<TrialRecord>& recs, const std::string& variant,
                                    const std::string& sweep_name, int trials) {
  CsvTable t;
  t.header = {"k", sweep_name, "trials", "feasible", "feasibility_rate", "mean_power", "mean_power_common"};
  const auto g = group(recs, variant);
  std::map<int, std::vector<bool>> always;
  for (const auto& [key, rs] : g) {
    auto& a = always.try_emplace(key.first, trials, true).first->second;
    std::vector<bool> seen(trials, false);
    for (const auto* r : rs) {
      seen[r->trial] = true;
      if (!r->feasible()) a[r->trial] = false;
    }
    for (int i = 0; i < trials; ++i)
      if (!seen[i]) a[i] = false;
  }
  for (const auto& [key, rs] : g) {
    Stat all;
    Stat common;
    long feasible = 0;
    for (const auto* r : rs) {
      if (!r->feasible()) continue;
      ++feasible;
      all.add(r->total_power);
      if (always[key.first][r->trial]) common.add(r->total_power);
    }
    auto row = head(key.first, key.second, static_cast<long>(rs.size()), feasible);
    row.push_back(fmt(all.mean()));
    row.push_back(fmt(common.mean()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Modes

inline ExperimentResult run_p1(const ExperimentConfig& cfg) {
  const auto ks = k_list(cfg);
  ExperimentResult res;
  res.records = run_trials(cfg, [&](int trial, std::uint64_t seed) {
    std::vector<TrialRecord> out;
    for (int K : ks) {
      const MultiCellInstance inst = trial_instance(cfg, seed, K);
      const GammaTable g = compute_gammas_mc(inst);
      const MCSystem sys = build_mc_system(inst, g);
      for (double v : cfg.sweep_values) {
        TrialRecord rec{trial, seed, "p1", K, v};
        rec.m.assign(inst.L, static_cast<int>(v));
        guarded(rec, [&](TrialRecord& r) {
          const PowerSolution ps = min_power_mc(sys, AntennaVector::uniform(inst.L, static_cast<int>(v)));
          r.status = std::string(to_string(ps.status));
          if (!ps.feasible()) return;
          if (cfg.honor_power_budget && !within_budget(inst, ps.p)) {
            r.status = std::string(to_string(SolveStatus::InfeasiblePower));
            return;
          }
          r.total_power = ps.p.sum();
          r.cost = r.total_power + inst.c * v * inst.L;
        });
        out.push_back(std::move(rec));
      }
    }
    return out;
  });
  res.summary = power_sweep_summary(res.records, "p1", "m", cfg.trials);
  return res;
}

inline SingleCellInstance single_cell_trial(const ExperimentConfig& cfg, std::uint64_t seed, int K) {
  const MultiCellInstance inst = trial_instance(cfg, seed, K);
  return single_cell_view(inst, compute_gammas_mc(inst));
}

inline ExperimentResult run_p2(const ExperimentConfig& cfg) {
  const auto ks = k_list(cfg);
  ExperimentResult res;
  res.records = run_trials(cfg, [&](int trial, std::uint64_t seed) {
    std::vector<TrialRecord> out;
    for (int K : ks) {
      SingleCellInstance sc = single_cell_trial(cfg, seed, K);
      for (double c : cfg.sweep_values) {
        sc.c = c;
        TrialRecord rec{trial, seed, "p2", K, c};
        guarded(rec, [&](TrialRecord& r) {
          const SCSolution s = solve_p2(sc);
          const SCSystem sys = build_sc_system(sc);
          // Reduced cost on the whole effective-antenna grid; NaN where infeasible.
          const int lo = std::min(m_min_joint(sys, sc.rho_dl), sys.mbar_max + 1);
          r.series.assign(sys.mbar_max, std::numeric_limits<double>::quiet_NaN());
          int argmin = 0;
          for (int mb = 1; mb <= sys.mbar_max; ++mb) {
            const double u = reduced_cost(sys, c, mb);
            if (!std::isfinite(u)) continue;
            if (cfg.honor_power_budget && mb < lo) continue;
            r.series[mb - 1] = u;
            if (mb >= lo && (argmin == 0 || u < r.series[argmin - 1])) argmin = mb;
          }
          r.status = std::string(to_string(s.status));
          if (s.status != SolveStatus::Feasible) return;
          r.m = {s.m_star};
          r.total_power = s.p_star.sum();
          r.cost = s.cost;
          r.metric = s.m_continuous;
          // 1 when the enumerated minimizer is the floor or ceiling of the relaxed optimum
          r.series.push_back(argmin == static_cast<int>(std::floor(s.m_continuous)) ||
                                     argmin == static_cast<int>(std::ceil(s.m_continuous))
                                 ? 1.0
                                 : 0.0);
        });
        out.push_back(std::move(rec));
      }
    }
    return out;
  });

  CsvTable& t = res.summary;
  t.header = {"k",         "c",    "trials", "feasible", "feasibility_rate", "mean_mbar_star", "mean_m_continuous",
              "mean_cost", "mean_power", "minimizer_match_rate"};
  CsvTable curve;
  curve.header = {"k", "c", "mbar", "trials", "feasible", "mean_cost"};
  for (const auto& [key, rs] : group(res.records, "p2")) {
    Stat mstar, mcont, cost, power, match;
    long feasible = 0;
    std::size_t grid = 0;
    for (const auto* r : rs) grid = std::max(grid, r->series.size() - (r->feasible() ? 1 : 0));
    std::vector<Stat> curve_stats(grid);
    for (const auto* r : rs) {
      const std::size_t n = r->series.size() - (r->feasible() ? 1 : 0);
      for (std::size_t i = 0; i < n; ++i) curve_stats[i].add(r->series[i]);
      if (!r->feasible()) continue;
      ++feasible;
      mstar.add(effective_antennas(cfg.scenario.radio.precoder, r->m[0], key.first));
      mcont.add(r->metric);
      cost.add(r->cost);
      power.add(r->total_power);
      match.add(r->series.back());
    }
    auto row = head(key.first, key.second, static_cast<long>(rs.size()), feasible);
    for (double x : {mstar.mean(), mcont.mean(), cost.mean(), power.mean(), match.mean()}) row.push_back(fmt(x));
    t.rows.push_back(std::move(row));
    for (std::size_t i = 0; i < grid; ++i)
      curve.rows.push_back({fmt(key.first), fmt(key.second), fmt(static_cast<int>(i + 1)),
                            fmt(static_cast<long long>(rs.size())), fmt(static_cast<long long>(curve_stats[i].count)),
                            fmt(curve_stats[i].mean())});
  }
  res.extra["curve"] = std::move(curve);
  return res;
}

inline ExperimentResult run_mrt_zf(const ExperimentConfig& cfg) {
  const auto ks = k_list(cfg);
  ExperimentResult res;
  res.records = run_trials(cfg, [&](int trial, std::uint64_t seed) {
    std::vector<TrialRecord> out;
    for (int K : ks) {
      SingleCellInstance sc = single_cell_trial(cfg, seed, K);
      for (double a : cfg.sweep_values) {
        sc.alpha.setConstant(a);
        for (Precoder pc : {Precoder::MRT, Precoder::ZF}) {
          sc.precoder = pc;
          TrialRecord rec{trial, seed, std::string(to_string(pc)), K, a};
          guarded(rec, [&](TrialRecord& r) {
            const SCSolution s = solve_p2(sc);
            r.status = std::string(to_string(s.status));
            r.series = {antennas_from_effective(pc, m_dagger(sc), K)};
            if (s.status != SolveStatus::Feasible) return;
            r.m = {s.m_star};
            r.total_power = s.p_star.sum();
            r.cost = s.cost_antennas;
            r.metric = antennas_from_effective(pc, s.m_continuous, K);
          });
          out.push_back(std::move(rec));
        }
      }
    }
    return out;
  });

  CsvTable& t = res.summary;
  t.header = {"k",
              "alpha",
              "trials",
              "feasible",
              "feasibility_rate",
              "mean_m_mrt",
              "mean_m_zf",
              "mean_m_continuous_mrt",
              "mean_m_continuous_zf",
              "mean_dagger_gap",
              "predicted_gap"};
  const auto mrt = group(res.records, "mrt");
  const auto zf = group(res.records, "zf");
  for (const auto& [key, rs] : mrt) {
    const auto& zs = zf.at(key);
    Stat m_mrt, m_zf, c_mrt, c_zf, gap;
    long feasible = 0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (!rs[i]->series.empty() && !zs[i]->series.empty())
        gap.add(std::isfinite(rs[i]->series[0]) ? rs[i]->series[0] - zs[i]->series[0]
                                                : std::numeric_limits<double>::quiet_NaN());
      if (!rs[i]->feasible() || !zs[i]->feasible()) continue;
      ++feasible;
      m_mrt.add(rs[i]->m[0]);
      m_zf.add(zs[i]->m[0]);
      c_mrt.add(rs[i]->metric);
      c_zf.add(zs[i]->metric);
    }
    auto row = head(key.first, key.second, static_cast<long>(rs.size()), feasible);
    for (double x : {m_mrt.mean(), m_zf.mean(), c_mrt.mean(), c_zf.mean(), gap.mean(),
                     key.first * key.second - key.first})
      row.push_back(fmt(x));
    t.rows.push_back(std::move(row));
  }
  return res;
}

inline ExperimentResult run_p3(const ExperimentConfig& cfg) {
  const auto ks = k_list(cfg);
  ExperimentResult res;
  res.records = run_trials(cfg, [&](int trial, std::uint64_t seed) {
    std::vector<TrialRecord> out;
    for (int K : ks) {
      MultiCellInstance inst = trial_instance(cfg, seed, K);
      const GammaTable g = compute_gammas_mc(inst);
      for (double v : cfg.sweep_values) {
        TrialRecord rec{trial, seed, "p3", K, v};
        guarded(rec, [&](TrialRecord& r) {
          inst.m_max = static_cast<int>(v);
          fill_mc(r, solve_p3(inst, g));
        });
        out.push_back(std::move(rec));
      }
    }
    return out;
  });
  res.summary = power_sweep_summary(res.records, "p3", "m_max", cfg.trials);
  return res;
}

inline ExperimentResult run_maxmin(const ExperimentConfig& cfg) {
  const auto ks = k_list(cfg);
  ExperimentResult res;
  res.records = run_trials(cfg, [&](int trial, std::uint64_t seed) {
    std::vector<TrialRecord> out;
    for (int K : ks) {
      const MultiCellInstance inst = trial_instance(cfg, seed, K);
      const GammaTable g = compute_gammas_mc(inst);
      for (double v : cfg.sweep_values) {
        TrialRecord rec{trial, seed, "maxmin", K, v};
        rec.m.assign(inst.L, static_cast<int>(v));
        guarded(rec, [&](TrialRecord& r) {
          r.metric = maxmin_sinr(inst, g, AntennaVector::uniform(inst.L, static_cast<int>(v)), cfg.honor_power_budget);
          r.series = {asymptotic_maxmin(build_mc_system(inst, g))};
          // "feasible" here means the configured common target alpha is reachable
          r.status = r.metric >= cfg.scenario.alpha ? "feasible" : std::string(to_string(SolveStatus::InfeasibleSINR));
        });
        out.push_back(std::move(rec));
      }
    }
    return out;
  });

  CsvTable& t = res.summary;
  t.header = {"k", "m", "trials", "feasible", "feasibility_rate", "mean_sinr", "median_sinr", "mean_asymptotic"};
  CsvTable cdf;
  cdf.header = {"k", "m", "sinr", "fraction"};
  for (const auto& [key, rs] : group(res.records, "maxmin")) {
    std::vector<double> vals;
    Stat mean, asym;
    long feasible = 0;
    for (const auto* r : rs) {
      if (r->feasible()) ++feasible;
      if (std::isnan(r->metric)) continue;
      vals.push_back(r->metric);
      mean.add(r->metric);
      if (!r->series.empty() && std::isfinite(r->series[0])) asym.add(r->series[0]);
    }
    double median = std::numeric_limits<double>::quiet_NaN();
    if (!vals.empty()) {
      const auto points = emit_cdf(vals);
      median = points[(points.size() - 1) / 2].value;
      for (const auto& p : points) cdf.rows.push_back({fmt(key.first), fmt(key.second), fmt(p.value), fmt(p.fraction)});
    }
    auto row = head(key.first, key.second, static_cast<long>(rs.size()), feasible);
    for (double x : {mean.mean(), median, asym.mean()}) row.push_back(fmt(x));
    t.rows.push_back(std::move(row));
  }
  res.extra["cdf"] = std::move(cdf);
  return res;
}

inline P4Options p4_options(const ExperimentConfig& cfg) {
  P4Options o;
  o.refine = cfg.refine;
  return o;
}

inline ExperimentResult run_p4_m_cdf(const ExperimentConfig& cfg) {
  const auto ks = k_list(cfg);
  ExperimentResult res;
  res.records = run_trials(cfg, [&](int trial, std::uint64_t seed) {
    std::vector<TrialRecord> out;
    for (int K : ks) {
      MultiCellInstance inst = trial_instance(cfg, seed, K);
      const GammaTable g = compute_gammas_mc(inst);
      for (double c : cfg.sweep_values) {
        TrialRecord rec{trial, seed, "p4", K, c};
        guarded(rec, [&](TrialRecord& r) {
          inst.c = c;
          const MCSolution s = solve_p4(inst, g, p4_options(cfg));
          fill_mc(r, s);
          r.metric = s.gp_lower_bound;
        });
        out.push_back(std::move(rec));
      }
    }
    return out;
  });

  CsvTable& t = res.summary;
  t.header = {"k",         "c",          "trials", "feasible", "feasibility_rate", "mean_power",
              "mean_cost", "mean_m",     "mean_gp_lower_bound"};
  CsvTable cdf;
  cdf.header = {"k", "c", "m", "fraction"};
  for (const auto& [key, rs] : group(res.records, "p4")) {
    Stat power, cost, m, bound;
    std::vector<double> ms;
    long feasible = 0;
    for (const auto* r : rs) {
      if (!r->feasible()) continue;
      ++feasible;
      power.add(r->total_power);
      cost.add(r->cost);
      m.add(mean_of(r->m));
      bound.add(r->metric);
      for (int x : r->m) ms.push_back(x);
    }
    auto row = head(key.first, key.second, static_cast<long>(rs.size()), feasible);
    for (double x : {power.mean(), cost.mean(), m.mean(), bound.mean()}) row.push_back(fmt(x));
    t.rows.push_back(std::move(row));
    if (!ms.empty())
      for (const auto& p : emit_cdf(ms)) cdf.rows.push_back({fmt(key.first), fmt(key.second), fmt(p.value), fmt(p.fraction)});
  }
  res.extra["cdf"] = std::move(cdf);
  return res;
}

inline ExperimentResult run_p4_vs_max(const ExperimentConfig& cfg) {
  const auto ks = k_list(cfg);
  ExperimentResult res;
  res.records = run_trials(cfg, [&](int trial, std::uint64_t seed) {
    std::vector<TrialRecord> out;
    for (int K : ks) {
      MultiCellInstance inst = trial_instance(cfg, seed, K);
      const GammaTable g = compute_gammas_mc(inst);
      for (double c : cfg.sweep_values) {
        inst.c = c;
        TrialRecord p4{trial, seed, "p4", K, c};
        guarded(p4, [&](TrialRecord& r) {
          const MCSolution s = solve_p4(inst, g, p4_options(cfg));
          fill_mc(r, s);
          r.metric = s.gp_lower_bound;
        });
        TrialRecord mx{trial, seed, "max", K, c};
        guarded(mx, [&](TrialRecord& r) { fill_mc(r, solve_p3(inst, g)); });
        out.push_back(std::move(p4));
        out.push_back(std::move(mx));
      }
    }
    return out;
  });

  CsvTable& t = res.summary;
  t.header = {"k",          "c",           "trials", "feasible", "feasibility_rate", "mean_cost_p4", "mean_cost_max",
              "mean_power_p4", "mean_power_max", "mean_m_p4", "mean_gp_lower_bound"};
  const auto p4 = group(res.records, "p4");
  const auto mx = group(res.records, "max");
  for (const auto& [key, rs] : p4) {
    const auto& ms = mx.at(key);
    Stat c4, cm, p4s, pm, m4, bound;
    long feasible = 0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (!rs[i]->feasible() || !ms[i]->feasible()) continue;
      ++feasible;
      c4.add(rs[i]->cost);
      cm.add(ms[i]->cost);
      p4s.add(rs[i]->total_power);
      pm.add(ms[i]->total_power);
      m4.add(mean_of(rs[i]->m));
      bound.add(rs[i]->metric);
    }
    auto row = head(key.first, key.second, static_cast<long>(rs.size()), feasible);
    for (double x : {c4.mean(), cm.mean(), p4s.mean(), pm.mean(), m4.mean(), bound.mean()}) row.push_back(fmt(x));
    t.rows.push_back(std::move(row));
  }
  return res;
}

inline ExperimentResult run_rounding_gap(const ExperimentConfig& cfg) {
  const auto ks = k_list(cfg);
  ExperimentResult res;
  res.records = run_trials(cfg, [&](int trial, std::uint64_t seed) {
    std::vector<TrialRecord> out;
    for (int K : ks) {
      MultiCellInstance inst = restrict_cells(trial_instance(cfg, seed, K), cfg.oracle_cells);
      const GammaTable g = compute_gammas_mc(inst);
      for (double c : cfg.sweep_values) {
        inst.c = c;
        TrialRecord rounded{trial, seed, "rounded", K, c};
        TrialRecord ceil{trial, seed, "ceil", K, c};
        guarded(rounded, [&](TrialRecord& r) {
          const MCSolution s = solve_p4(inst, g, p4_options(cfg));
          fill_mc(r, s);
          r.metric = s.gp_lower_bound;
          if (s.feasible()) {
            ceil.status = "feasible";
            ceil.m = s.ceil_m.m;
            ceil.cost = s.ceil_cost;
            ceil.metric = s.gp_lower_bound;
          } else {
            ceil.status = r.status;
          }
        });
        if (!rounded.feasible()) ceil.status = rounded.status;
        TrialRecord ex{trial, seed, "exhaustive", K, c};
        guarded(ex, [&](TrialRecord& r) { fill_mc(r, exhaustive_p4(inst, g)); });
        out.push_back(std::move(rounded));
        out.push_back(std::move(ceil));
        out.push_back(std::move(ex));
      }
    }
    return out;
  });

  CsvTable& t = res.summary;
  t.header = {"k",           "c",         "trials",       "feasible",         "feasibility_rate",
              "mean_gp_lower_bound", "mean_exhaustive", "mean_ceil", "mean_rounded", "mean_rel_gap",
              "max_rel_gap", "within_2pct_rate"};
  const auto rd = group(res.records, "rounded");
  const auto ce = group(res.records, "ceil");
  const auto ex = group(res.records, "exhaustive");
  for (const auto& [key, rs] : rd) {
    const auto& cs = ce.at(key);
    const auto& es = ex.at(key);
    Stat bound, exh, ceil, rounded, gap, within;
    double max_gap = std::numeric_limits<double>::quiet_NaN();
    long feasible = 0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (!rs[i]->feasible() || !es[i]->feasible()) continue;
      ++feasible;
      bound.add(rs[i]->metric);
      exh.add(es[i]->cost);
      ceil.add(cs[i]->cost);
      rounded.add(rs[i]->cost);
      const double g = (rs[i]->cost - es[i]->cost) / es[i]->cost;
      gap.add(g);
      within.add(g <= 0.02 ? 1.0 : 0.0);
      max_gap = std::isnan(max_gap) ? g : std::max(max_gap, g);
    }
    auto row = head(key.first, key.second, static_cast<long>(rs.size()), feasible);
    for (double x : {bound.mean(), exh.mean(), ceil.mean(), rounded.mean(), gap.mean(), max_gap, within.mean()})
      row.push_back(fmt(x));
    t.rows.push_back(std::move(row));
  }
  return res;
}

inline std::string join_m(const std::vector<int>& m) {
  std::string s;
  for (std::size_t i = 0; i < m.size(); ++i) s += (i ? ";" : "") + std::to_string(m[i]);
  return s;
}

}  // namespace detail

inline std::string manifest_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "# experiment manifest\n";
  os << "library = mimopc " << kVersion << "\n";
  os << "eigen = " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n";
  os << "master_seed = " << cfg.scenario.grid.seed << "\n";
  os << "trial_seed = splitmix64(master_seed + trial)\n";
  os << "output = " << cfg.output << "\n";
  os << describe(cfg);
  return os.str();
}

/// Runs every trial of cfg in memory. Per-trial solver failures become status
/// strings; only an invalid config throws.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const bool single_cell = cfg.mode == "p2_cost_curve" || cfg.mode == "mrt_zf_compare";
  if (single_cell && cfg.scenario.grid.grid_side != 1)
    throw ConfigError(cfg.mode + " is a single-cell mode and needs L_grid = 1");
  const auto ks = detail::k_list(cfg);
  const int k_max = *std::max_element(ks.begin(), ks.end());
  if ((cfg.scenario.radio.precoder == Precoder::ZF || cfg.mode == "mrt_zf_compare") &&
      cfg.scenario.radio.m_max <= k_max)
    throw ConfigError("ZF needs m_max > K for every K in the run");
  if (cfg.mode == "p3_sweep" && cfg.scenario.radio.precoder == Precoder::ZF)
    for (double v : cfg.sweep_values)
      if (v <= k_max) throw ConfigError("ZF needs every swept m_max above K");
  if (cfg.mode == "rounding_gap") {
    MultiCellInstance probe(cfg.oracle_cells, k_max);
    probe.m_max = cfg.scenario.radio.m_max;
    if (exhaustive_combinations(probe) >= kExhaustiveGuard) throw ConfigError("rounding_gap: search space too large");
  }

  ExperimentResult res;
  if (cfg.mode == "p1_sweep") res = detail::run_p1(cfg);
  else if (cfg.mode == "p2_cost_curve") res = detail::run_p2(cfg);
  else if (cfg.mode == "mrt_zf_compare") res = detail::run_mrt_zf(cfg);
  else if (cfg.mode == "p3_sweep") res = detail::run_p3(cfg);
  else if (cfg.mode == "maxmin_cdf") res = detail::run_maxmin(cfg);
  else if (cfg.mode == "p4_m_cdf") res = detail::run_p4_m_cdf(cfg);
  else if (cfg.mode == "p4_vs_max") res = detail::run_p4_vs_max(cfg);
  else res = detail::run_rounding_gap(cfg);
  res.manifest = manifest_text(cfg);
  return res;
}

inline CsvTable trials_table(const std::vector<TrialRecord>& recs, bool with_timing = true) {
  CsvTable t;
  t.header = trials_header();
  if (!with_timing) t.header.pop_back();
  for (const auto& r : recs) {
    std::vector<std::string> row{fmt(r.trial), fmt(r.seed),       r.variant,     fmt(r.k),
                                 fmt(r.sweep_value), r.status,   fmt(r.total_power), fmt(r.cost),
                                 detail::join_m(r.m), fmt(r.metric)};
    if (with_timing) row.push_back(fmt(r.wall_ms));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Writes summary.csv, trials.csv, manifest.txt and any extra tables into dir.
inline void write_experiment(const ExperimentResult& res, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  auto put = [&dir](const std::string& name, const std::string& text) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + (fs::path(dir) / name).string() + "'");
    out << text;
  };
  put("summary.csv", res.summary.to_csv());
  put("trials.csv", trials_table(res.records).to_csv());
  put("manifest.txt", res.manifest);
  for (const auto& [stem, table] : res.extra) put(stem + ".csv", table.to_csv());
}

}  // namespace mimopc
