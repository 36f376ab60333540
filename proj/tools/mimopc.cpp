// mimopc command line: solve single instances, run experiments, check GP dumps.
//
// Exit codes: 0 success, 1 infeasible, 2 usage or config error, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mimopc/config.hpp"
#include "mimopc/gp.hpp"
#include "mimopc/harness.hpp"
#include "mimopc/io.hpp"
#include "mimopc/multicell.hpp"
#include "mimopc/scenario.hpp"
#include "mimopc/singlecell.hpp"

namespace {

using namespace mimopc;

constexpr int kOk = 0;
constexpr int kInfeasible = 1;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;

struct InstanceSource {
  std::string instance_path;
  std::string config_path;
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--instance", instance_path, "JSON instance file");
    cmd->add_option("--config", config_path, "scenario or experiment config file (key = value)");
    cmd->add_option("--set", sets, "override a config key, key=value")->take_all();
  }

  bool given() const { return !instance_path.empty() || !config_path.empty() || !sets.empty(); }

  LoadedInstance load() const {
    if (!instance_path.empty()) {
      if (!config_path.empty() || !sets.empty()) throw ConfigError("--instance cannot be combined with --config/--set");
      return instance_from_json_text(read_text_file(instance_path));
    }
    // experiment configs are accepted too; only their scenario keys matter here
    ScenarioConfig sc =
        config_path.empty() ? ScenarioConfig{} : parse_experiment_config(read_text_file(config_path)).scenario;
    for (const auto& s : sets) {
      const auto [k, v] = split_assignment(s);
      if (!apply_scenario_key(sc, k, v)) throw ConfigError("unknown key '" + k + "'");
    }
    const CellLayout layout = generate_layout(sc.grid);
    LoadedInstance out;
    out.inst = build_instance(layout, sc.grid, sc.alpha, sc.radio);
    return out;
  }
};

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

int status_code(SolveStatus s) { return s == SolveStatus::Feasible ? kOk : kInfeasible; }

std::vector<double> parse_list(const std::string& name, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : detail::split_list(text)) out.push_back(detail::to_double(name, item));
  if (out.empty()) throw ConfigError(name + " needs at least one value");
  return out;
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

// ---------------------------------------------------------------------------

struct SolveScArgs {
  InstanceSource src;
  std::string beta, gamma, alpha;
  double np = 1.0;
  double rho_ul = 0.0;
  double rho_dl = 0.0;
  int m_max = 0;
  double c = 0.0;
  std::string precoder = "mrt";
};

int run_solve_sc(const SolveScArgs& a) {
  SingleCellInstance sc;
  if (a.src.given()) {
    const LoadedInstance li = a.src.load();
    sc = single_cell_view(li.inst, li.gammas());
  } else {
    if (a.beta.empty() || a.alpha.empty() || a.rho_dl <= 0.0 || a.m_max < 1)
      throw ConfigError("solve-sc needs --beta, --alpha, --rho-dl and --m-max (or --instance/--config)");
    sc.beta = to_vector(parse_list("--beta", a.beta));
    std::vector<double> alpha = parse_list("--alpha", a.alpha);
    if (alpha.size() == 1) alpha.assign(static_cast<std::size_t>(sc.beta.size()), alpha[0]);
    sc.alpha = to_vector(alpha);
    if (!a.gamma.empty()) {
      sc.gamma = to_vector(parse_list("--gamma", a.gamma));
    } else {
      if (!(a.rho_ul > 0.0)) throw ConfigError("solve-sc needs --gamma or --rho-ul");
      sc.gamma.resize(sc.beta.size());
      for (Eigen::Index k = 0; k < sc.beta.size(); ++k) sc.gamma[k] = compute_gamma_sc(sc.beta[k], a.np, a.rho_ul);
    }
    sc.rho_dl = a.rho_dl;
    sc.m_max = a.m_max;
    sc.c = a.c;
    sc.precoder = parse_precoder(a.precoder);
  }
  const SCSolution s = solve_p2(sc);
  Json j = to_json(s);
  j["precoder"] = std::string(to_string(sc.precoder));
  print(j);
  return status_code(s.status);
}

struct SolveMcArgs {
  InstanceSource src;
  bool no_refine = false;
  std::string dump_gp;
  double gp_tol = 1e-8;
};

int run_solve_mc(const SolveMcArgs& a) {
  const LoadedInstance li = a.src.load();
  const GammaTable g = li.gammas();
  if (!a.dump_gp.empty()) {
    std::ofstream out(a.dump_gp);
    if (!out) throw ConfigError("cannot write '" + a.dump_gp + "'");
    out << gp::dump(build_p4_gp(li.inst, g).gp);
  }
  P4Options opt;
  opt.refine = !a.no_refine;
  opt.gp_tol = a.gp_tol;
  const MCSolution s = solve_p4(li.inst, g, opt);
  print(to_json(s, li.inst.K));
  return status_code(s.status);
}

int run_solve_p3(const InstanceSource& src) {
  const LoadedInstance li = src.load();
  const MCSolution s = solve_p3(li.inst, li.gammas());
  print(to_json(s, li.inst.K));
  return status_code(s.status);
}

struct MaxminArgs {
  InstanceSource src;
  std::vector<int> m;
  bool honor_budget = false;
};

int run_maxmin(const MaxminArgs& a) {
  const LoadedInstance li = a.src.load();
  const GammaTable g = li.gammas();
  AntennaVector m;
  if (a.m.empty()) m = AntennaVector::uniform(li.inst.L, li.inst.m_max);
  else if (a.m.size() == 1) m = AntennaVector::uniform(li.inst.L, a.m[0]);
  else m.m = a.m;
  const double v = maxmin_sinr(li.inst, g, m, a.honor_budget);
  Json j;
  j["m"] = m.m;
  j["honor_power_budget"] = a.honor_budget;
  j["maxmin_sinr"] = detail::number(v);
  j["asymptotic_maxmin"] = detail::number(asymptotic_maxmin(build_mc_system(li.inst, g)));
  print(j);
  return kOk;
}

int run_oracle(const InstanceSource& src) {
  const LoadedInstance li = src.load();
  const MCSolution s = exhaustive_p4(li.inst, li.gammas());
  print(to_json(s, li.inst.K));
  return status_code(s.status);
}

struct ExperimentArgs {
  std::string config_path;
  std::string output;
  std::vector<std::string> sets;
  int threads = -1;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  ExperimentConfig cfg = parse_experiment_config(read_text_file(a.config_path));
  for (const auto& s : a.sets) {
    const auto [k, v] = split_assignment(s);
    if (!apply_experiment_key(cfg, k, v)) throw ConfigError("unknown key '" + k + "'");
  }
  if (!a.output.empty()) cfg.output = a.output;
  if (a.threads >= 0) cfg.threads = a.threads;
  const ExperimentResult res = run_experiment(cfg);
  write_experiment(res, cfg.output);
  long feasible = 0;
  for (const auto& r : res.records) feasible += r.feasible() ? 1 : 0;
  Json j;
  j["output"] = cfg.output;
  j["mode"] = cfg.mode;
  j["trials"] = cfg.trials;
  j["records"] = res.records.size();
  j["feasible_records"] = feasible;
  print(j);
  return kOk;
}

int run_gp_check(const std::string& path, double tol) {
  const gp::StandardForm f = gp::parse(read_text_file(path));
  const gp::Result r = gp::solve(f, tol);
  Json j;
  j["status"] = std::string(gp::to_string(r.status));
  j["newton_steps"] = r.newton_steps;
  if (r.status != gp::Status::Infeasible) {
    Json x = Json::object();
    for (int i = 0; i < f.size(); ++i) x[f.variables[i].name] = r.x[i];
    j["x"] = x;
    j["cost"] = r.cost;
    j["gap"] = r.gap;
    j["max_violation"] = gp::max_violation(f, std::vector<double>(r.x.data(), r.x.data() + r.x.size()));
  }
  print(j);
  if (r.status == gp::Status::Infeasible) return kInfeasible;
  return r.status == gp::Status::Optimal ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint antenna count and transmit power optimization for massive MIMO downlinks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mimopc::kVersion));

  SolveScArgs sc;
  auto* cmd_sc = app.add_subcommand("solve-sc", "single-cell joint antenna/power optimum");
  sc.src.add_to(cmd_sc);
  cmd_sc->add_option("--beta", sc.beta, "large-scale gains, comma separated (noise normalized)");
  cmd_sc->add_option("--gamma", sc.gamma, "estimate quality per user; computed from --np/--rho-ul if absent");
  cmd_sc->add_option("--alpha", sc.alpha, "SINR targets, one value or one per user");
  cmd_sc->add_option("--np", sc.np, "pilot length");
  cmd_sc->add_option("--rho-ul", sc.rho_ul, "normalized uplink pilot SNR");
  cmd_sc->add_option("--rho-dl", sc.rho_dl, "normalized downlink power budget");
  cmd_sc->add_option("--m-max", sc.m_max, "maximum number of antennas");
  cmd_sc->add_option("--c", sc.c, "cost per antenna in normalized power units");
  cmd_sc->add_option("--precoder", sc.precoder, "mrt or zf")->check(CLI::IsMember({"mrt", "zf"}));

  SolveMcArgs mc;
  auto* cmd_mc = app.add_subcommand("solve-mc", "multi-cell joint optimum via GP relaxation and rounding");
  mc.src.add_to(cmd_mc);
  cmd_mc->add_flag("--no-refine", mc.no_refine, "keep the ceiling-rounded antenna vector");
  cmd_mc->add_option("--dump-gp", mc.dump_gp, "write the relaxed GP to this file");
  cmd_mc->add_option("--gp-tol", mc.gp_tol, "duality-gap tolerance of the GP solver");

  InstanceSource p3;
  auto* cmd_p3 = app.add_subcommand("solve-p3", "minimum transmit power with every cell at m_max");
  p3.add_to(cmd_p3);

  MaxminArgs mm;
  auto* cmd_mm = app.add_subcommand("maxmin", "largest common SINR target at fixed antennas");
  mm.src.add_to(cmd_mm);
  cmd_mm->add_option("--m", mm.m, "antennas, one value for all cells or one per cell (default m_max)")
      ->delimiter(',');
  cmd_mm->add_flag("--honor-budget", mm.honor_budget, "respect the per-cell downlink power budget");

  InstanceSource oracle;
  auto* cmd_or = app.add_subcommand("oracle", "exhaustive search over all antenna vectors");
  oracle.add_to(cmd_or);

  ExperimentArgs ex;
  auto* cmd_ex = app.add_subcommand("experiment", "run a Monte Carlo experiment config");
  cmd_ex->add_option("--config", ex.config_path, "experiment config file")->required();
  cmd_ex->add_option("--output", ex.output, "output directory (overrides the config)");
  cmd_ex->add_option("--set", ex.sets, "override a config key, key=value")->take_all();
  cmd_ex->add_option("--threads", ex.threads, "worker threads, 0 for all cores");

  std::string gp_file;
  double gp_tol = 1e-8;
  auto* cmd_gp = app.add_subcommand("gp-check", "solve a dumped geometric program");
  cmd_gp->add_option("file", gp_file, "GP dump file")->required();
  cmd_gp->add_option("--tol", gp_tol, "duality-gap tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*cmd_sc) return run_solve_sc(sc);
    if (*cmd_mc) return run_solve_mc(mc);
    if (*cmd_p3) return run_solve_p3(p3);
    if (*cmd_mm) return run_maxmin(mm);
    if (*cmd_or) return run_oracle(oracle);
    if (*cmd_ex) return run_experiment_cmd(ex);
    if (*cmd_gp) return run_gp_check(gp_file, gp_tol);
  } catch (const mimopc::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    // ConfigError, GpTypeError and bad precoder names
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
