#pragma once

// JSON encoding of instances and solutions.
//
// Instance layout (nested arrays are [cell][user][bs]):
//   {"L": 2, "K": 1, "beta": [[[1.0, 0.25]], [[0.25, 1.0]]],
//    "pilot_group": [0, 0], "alpha": [[2.0], [2.0]], "np": 1, "rho_ul": 4,
//    "rho_dl": 10 or [10, 10], "m_max": 100, "c": 0.01, "precoder": "mrt",
//    "gamma": optional, same shape as beta, overrides the MMSE computation}

#include <cmath>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mimopc/multicell.hpp"
#include "mimopc/scenario.hpp"
#include "mimopc/singlecell.hpp"
#include "mimopc/types.hpp"

namespace mimopc {

using Json = nlohmann::json;

struct LoadedInstance {
  MultiCellInstance inst;
  std::optional<GammaTable> gamma_override;

  GammaTable gammas() const { return gamma_override ? *gamma_override : compute_gammas_mc(inst); }
};

namespace detail {

template <typename T>
T json_get(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("instance: missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("instance: bad value for '") + key + "': " + e.what());
  }
}

inline std::vector<double> read_cube(const Json& j, const char* key, int L, int K) {
  const auto cube = json_get<std::vector<std::vector<std::vector<double>>>>(j, key);
  if (static_cast<int>(cube.size()) != L) throw ConfigError(std::string("instance: ") + key + " needs L rows");
  std::vector<double> flat(static_cast<std::size_t>(L) * K * L);
  for (int l = 0; l < L; ++l) {
    if (static_cast<int>(cube[l].size()) != K) throw ConfigError(std::string("instance: ") + key + " needs K users");
    for (int k = 0; k < K; ++k) {
      if (static_cast<int>(cube[l][k].size()) != L)
        throw ConfigError(std::string("instance: ") + key + " needs L entries per user");
      for (int jj = 0; jj < L; ++jj) flat[(static_cast<std::size_t>(l) * K + k) * L + jj] = cube[l][k][jj];
    }
  }
  return flat;
}

inline Json cube_json(const std::vector<double>& flat, int L, int K) {
  Json out = Json::array();
  for (int l = 0; l < L; ++l) {
    Json cell = Json::array();
    for (int k = 0; k < K; ++k) {
      Json row = Json::array();
      for (int j = 0; j < L; ++j) row.push_back(flat[(static_cast<std::size_t>(l) * K + k) * L + j]);
      cell.push_back(row);
    }
    out.push_back(cell);
  }
  return out;
}

// JSON has no infinity; such values become null.
inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace detail

inline LoadedInstance instance_from_json(const Json& j) {
  using detail::json_get;
  LoadedInstance out;
  const int L = json_get<int>(j, "L");
  const int K = json_get<int>(j, "K");
  if (L < 1 || K < 1) throw ConfigError("instance: L and K must be >= 1");
  MultiCellInstance inst(L, K);
  inst.beta = detail::read_cube(j, "beta", L, K);
  if (j.contains("pilot_group")) {
    inst.pilot_group = json_get<std::vector<int>>(j, "pilot_group");
  } else {
    for (int l = 0; l < L; ++l) inst.pilot_group[l] = l;
  }
  const Json& a = j.contains("alpha") ? j.at("alpha") : Json(1.0);
  if (a.is_number()) {
    inst.alpha.assign(static_cast<std::size_t>(L) * K, a.get<double>());
  } else {
    const auto rows = json_get<std::vector<std::vector<double>>>(j, "alpha");
    if (static_cast<int>(rows.size()) != L) throw ConfigError("instance: alpha needs L rows");
    for (int l = 0; l < L; ++l) {
      if (static_cast<int>(rows[l].size()) != K) throw ConfigError("instance: alpha needs K entries per row");
      for (int k = 0; k < K; ++k) inst.alpha_at(l, k) = rows[l][k];
    }
  }
  inst.np = j.contains("np") ? json_get<double>(j, "np") : static_cast<double>(K);
  inst.rho_ul = j.contains("rho_ul") ? json_get<double>(j, "rho_ul") : 0.0;
  const Json& rd = j.contains("rho_dl") ? j.at("rho_dl") : Json(nullptr);
  if (rd.is_number()) inst.rho_dl.assign(L, rd.get<double>());
  else inst.rho_dl = json_get<std::vector<double>>(j, "rho_dl");
  inst.m_max = json_get<int>(j, "m_max");
  inst.c = j.contains("c") ? json_get<double>(j, "c") : 0.0;
  try {
    inst.precoder = parse_precoder(j.contains("precoder") ? json_get<std::string>(j, "precoder") : "mrt");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  inst.validate();
  if (j.contains("gamma")) {
    GammaTable g(L, K);
    g.gamma = detail::read_cube(j, "gamma", L, K);
    out.gamma_override = std::move(g);
  } else if (!(inst.rho_ul > 0.0)) {
    throw ConfigError("instance: rho_ul must be positive unless gamma is given");
  }
  out.inst = std::move(inst);
  return out;
}

inline LoadedInstance instance_from_json_text(const std::string& text) {
  try {
    return instance_from_json(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("instance: ") + e.what());
  }
}

inline Json to_json(const MultiCellInstance& inst, const GammaTable* gamma = nullptr) {
  Json j;
  j["L"] = inst.L;
  j["K"] = inst.K;
  j["beta"] = detail::cube_json(inst.beta, inst.L, inst.K);
  j["pilot_group"] = inst.pilot_group;
  Json alpha = Json::array();
  for (int l = 0; l < inst.L; ++l) {
    Json row = Json::array();
    for (int k = 0; k < inst.K; ++k) row.push_back(inst.alpha_at(l, k));
    alpha.push_back(row);
  }
  j["alpha"] = alpha;
  j["np"] = inst.np;
  j["rho_ul"] = inst.rho_ul;
  j["rho_dl"] = inst.rho_dl;
  j["m_max"] = inst.m_max;
  j["c"] = inst.c;
  j["precoder"] = std::string(to_string(inst.precoder));
  if (gamma != nullptr) j["gamma"] = detail::cube_json(gamma->gamma, gamma->L, gamma->K);
  return j;
}

inline Json to_json(const SCSolution& s) {
  Json j;
  j["status"] = std::string(to_string(s.status));
  if (s.status != SolveStatus::Feasible) return j;
  j["mbar_star"] = s.mbar_star;
  j["m_star"] = s.m_star;
  j["p"] = std::vector<double>(s.p_star.data(), s.p_star.data() + s.p_star.size());
  j["total_power"] = s.p_star.sum();
  j["cost"] = s.cost;
  j["cost_antennas"] = s.cost_antennas;
  j["m_continuous"] = detail::number(s.m_continuous);
  return j;
}

inline Json to_json(const MCSolution& s, int K) {
  Json j;
  j["status"] = std::string(to_string(s.status));
  if (!s.gp_continuous_m.empty()) {
    j["gp_continuous_m"] = s.gp_continuous_m;
    j["gp_lower_bound"] = detail::number(s.gp_lower_bound);
    j["ceil_m"] = s.ceil_m.m;
    j["ceil_cost"] = detail::number(s.ceil_cost);
  }
  if (s.status != SolveStatus::Feasible) return j;
  j["m"] = s.m.m;
  Json p = Json::array();
  for (int l = 0; l < s.m.cells(); ++l) {
    Json row = Json::array();
    for (int k = 0; k < K; ++k) row.push_back(s.p[flat_index(l, k, K)]);
    p.push_back(row);
  }
  j["p"] = p;
  j["total_power"] = s.total_power;
  j["cost"] = s.cost;
  return j;
}

}  // namespace mimopc
