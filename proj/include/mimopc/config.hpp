#pragma once

// Line-oriented "key = value" configuration. '#' starts a comment, lists are
// comma separated. Unknown keys are an error so typos do not pass silently.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mimopc/scenario.hpp"
#include "mimopc/types.hpp"

namespace mimopc {

/// Geometry, radio parameters and a uniform SINR target.
struct ScenarioConfig {
  GridConfig grid;
  RadioParams radio;
  double alpha = 1.0;
};

inline constexpr std::string_view kModes[] = {"p1_sweep",  "p2_cost_curve", "mrt_zf_compare", "p3_sweep",
                                              "maxmin_cdf", "p4_m_cdf",     "p4_vs_max",      "rounding_gap"};

/// Name of the parameter each experiment mode sweeps.
inline std::string_view sweep_parameter(std::string_view mode) {
  if (mode == "p1_sweep" || mode == "maxmin_cdf") return "m";
  if (mode == "p3_sweep") return "m_max";
  if (mode == "mrt_zf_compare") return "alpha";
  return "c";
}

struct ExperimentConfig {
  ScenarioConfig scenario;
  std::string mode;
  int trials = 200;
  std::vector<double> sweep_values;
  std::vector<int> k_values;  // empty: users_per_cell only
  std::string output;
  bool honor_power_budget = false;
  int threads = 0;            // 0: hardware concurrency
  bool refine = true;
  int oracle_cells = 2;       // cells kept for the exhaustive-search mode

  void validate() const {
    scenario.grid.validate();
    scenario.radio.validate();
    if (!(scenario.alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (std::find(std::begin(kModes), std::end(kModes), mode) == std::end(kModes))
      throw ConfigError("unknown mode '" + mode + "'");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (output.empty()) throw ConfigError("output path is required");
    if (sweep_values.empty()) throw ConfigError("sweep_values must not be empty");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    const auto param = sweep_parameter(mode);
    for (double v : sweep_values) {
      if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
      if ((param == "m" || param == "m_max") && (v < 1.0 || v != std::floor(v)))
        throw ConfigError("antenna sweep values must be positive integers");
      if (param == "alpha" && !(v > 0.0)) throw ConfigError("alpha sweep values must be positive");
      if (param == "c" && !(v >= 0.0)) throw ConfigError("c sweep values must be nonnegative");
    }
    for (int k : k_values)
      if (k < 1) throw ConfigError("k_values must be >= 1");
    if (mode == "rounding_gap") {
      if (oracle_cells < 1 || oracle_cells > 3 || oracle_cells > scenario.grid.cells())
        throw ConfigError("rounding_gap needs 1 <= oracle_cells <= min(3, grid cells)");
      if (scenario.radio.m_max > 12) throw ConfigError("rounding_gap needs m_max <= 12");
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto* b = s.begin();
  const auto* e = s.end();
  while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  return {b, e};
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  }
}

inline long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
  }
}

inline int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError("key '" + key + "': value out of range");
  return static_cast<int>(x);
}

inline bool to_bool(const std::string& key, std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Applies one key to a scenario. Returns false if the key is not a scenario key.
inline bool apply_scenario_key(ScenarioConfig& s, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "bandwidth_hz") s.radio.bandwidth_hz = to_double(key, value);
  else if (key == "cell_edge_m") s.grid.cell_edge_m = to_double(key, value);
  else if (key == "d_min_m") s.grid.d_min_m = to_double(key, value);
  else if (key == "L_grid") s.grid.grid_side = to_int(key, value);
  else if (key == "noise_w") s.radio.noise_w = to_double(key, value);
  else if (key == "rho_dl_w") s.radio.rho_dl_w = to_double(key, value);
  else if (key == "rho_ul_w") s.radio.rho_ul_w = to_double(key, value);
  else if (key == "np_over_k") s.radio.np_over_k = to_double(key, value);
  else if (key == "m_max") s.radio.m_max = to_int(key, value);
  else if (key == "c") s.radio.c = to_double(key, value);
  else if (key == "precoder") {
    try {
      s.radio.precoder = parse_precoder(value);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "pilot_reuse") s.grid.pilot_reuse = to_int(key, value);
  else if (key == "alpha") s.alpha = to_double(key, value);
  else if (key == "users_per_cell") s.grid.users_per_cell = to_int(key, value);
  else if (key == "seed") {
    const long long x = to_integer(key, value);
    if (x < 0) throw ConfigError("seed must be nonnegative");
    s.grid.seed = static_cast<std::uint64_t>(x);
  } else return false;
  return true;
}

inline bool apply_experiment_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (apply_scenario_key(c.scenario, key, value)) return true;
  if (key == "mode") c.mode = value;
  else if (key == "trials") c.trials = to_int(key, value);
  else if (key == "sweep") {
    // Optional, documents the swept parameter; must agree with the mode.
    if (!c.mode.empty() && value != sweep_parameter(c.mode))
      throw ConfigError("mode " + c.mode + " sweeps '" + std::string(sweep_parameter(c.mode)) + "', not '" +
                        value + "'");
  } else if (key == "sweep_values") {
    c.sweep_values.clear();
    for (const auto& item : split_list(value)) c.sweep_values.push_back(to_double(key, item));
  } else if (key == "k_values") {
    c.k_values.clear();
    for (const auto& item : split_list(value)) c.k_values.push_back(to_int(key, item));
  } else if (key == "output") c.output = value;
  else if (key == "honor_power_budget") c.honor_power_budget = to_bool(key, value);
  else if (key == "threads") c.threads = to_int(key, value);
  else if (key == "refine") c.refine = to_bool(key, value);
  else if (key == "oracle_cells") c.oracle_cells = to_int(key, value);
  else return false;
  return true;
}

/// Splits "key = value" (or "key=value"). Throws on a missing '='.
inline std::pair<std::string, std::string> split_assignment(std::string_view line) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key = value, got '" + std::string(line) + "'");
  auto key = detail::trim(line.substr(0, eq));
  auto value = detail::trim(line.substr(eq + 1));
  if (key.empty()) throw ConfigError("empty key in '" + std::string(line) + "'");
  return {std::move(key), std::move(value)};
}

/// Ordered (key, value) pairs of a config text.
inline std::vector<std::pair<std::string, std::string>> parse_assignments(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(split_assignment(line));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScenarioConfig parse_scenario_config(std::string_view text, ScenarioConfig base = {}) {
  for (const auto& [k, v] : parse_assignments(text))
    if (!apply_scenario_key(base, k, v)) throw ConfigError("unknown key '" + k + "'");
  return base;
}

/// Parses an experiment config without validating it, so CLI overrides can
/// still fill in missing keys.
inline ExperimentConfig parse_experiment_config(std::string_view text) {
  ExperimentConfig cfg;
  auto pairs = parse_assignments(text);
  // mode first so a "sweep" line can be checked whatever its position
  for (const auto& [k, v] : pairs)
    if (k == "mode") cfg.mode = v;
  for (const auto& [k, v] : pairs)
    if (!apply_experiment_key(cfg, k, v)) throw ConfigError("unknown key '" + k + "'");
  return cfg;
}

/// Echo of every experiment key in canonical form, for the run manifest.
inline std::string describe(const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const auto& g = c.scenario.grid;
  const auto& r = c.scenario.radio;
  auto list = [&os](const auto& xs) {
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
    os << "\n";
  };
  os << "mode = " << c.mode << "\n";
  os << "trials = " << c.trials << "\n";
  os << "sweep = " << sweep_parameter(c.mode) << "\n";
  os << "sweep_values = ";
  list(c.sweep_values);
  os << "k_values = ";
  list(c.k_values);
  os << "honor_power_budget = " << (c.honor_power_budget ? "true" : "false") << "\n";
  os << "refine = " << (c.refine ? "true" : "false") << "\n";
  os << "oracle_cells = " << c.oracle_cells << "\n";
  os << "L_grid = " << g.grid_side << "\n";
  os << "cell_edge_m = " << g.cell_edge_m << "\n";
  os << "d_min_m = " << g.d_min_m << "\n";
  os << "users_per_cell = " << g.users_per_cell << "\n";
  os << "pilot_reuse = " << g.pilot_reuse << "\n";
  os << "seed = " << g.seed << "\n";
  os << "bandwidth_hz = " << r.bandwidth_hz << "\n";
  os << "noise_w = " << r.noise_w << "\n";
  os << "rho_dl_w = " << r.rho_dl_w << "\n";
  os << "rho_ul_w = " << r.rho_ul_w << "\n";
  os << "np_over_k = " << r.np_over_k << "\n";
  os << "m_max = " << r.m_max << "\n";
  os << "c = " << r.c << "\n";
  os << "precoder = " << to_string(r.precoder) << "\n";
  os << "alpha = " << c.scenario.alpha << "\n";
  return os.str();
}

}  // namespace mimopc
