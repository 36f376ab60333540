#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mimopc/harness.hpp"
#include "mimopc/io.hpp"

using namespace mimopc;

namespace {

ExperimentConfig small_config(const std::string& mode, const std::string& extra) {
  auto cfg = parse_experiment_config("mode = " + mode + "\noutput = /tmp/unused\nthreads = 1\n" + extra);
  return cfg;
}

double cell(const CsvTable& t, std::size_t row, const std::string& col) {
  const auto it = std::find(t.header.begin(), t.header.end(), col);
  EXPECT_NE(it, t.header.end()) << col;
  const std::string& s = t.rows.at(row).at(static_cast<std::size_t>(it - t.header.begin()));
  return s.empty() ? std::nan("") : std::stod(s);
}

}  // namespace

TEST(Cdf, Examples) {
  const auto one = emit_cdf({3.0});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].value, 3.0);
  EXPECT_EQ(one[0].fraction, 1.0);
  const auto two = emit_cdf({2.0, 1.0});
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].value, 1.0);
  EXPECT_EQ(two[0].fraction, 0.5);
  EXPECT_EQ(two[1].fraction, 1.0);
  EXPECT_THROW(emit_cdf({}), ConfigError);
}

TEST(CdfProperty, MonotoneAndEndsAtOne) {
  fixtures::Rng rng(60);
  std::vector<double> xs(5000);
  for (auto& x : xs) x = fixtures::log_uniform(rng, 1e-3, 1e3);
  const auto pts = emit_cdf(xs);
  ASSERT_EQ(pts.size(), xs.size());
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_LE(pts[i - 1].value, pts[i].value);
    EXPECT_LT(pts[i - 1].fraction, pts[i].fraction);
  }
  EXPECT_EQ(pts.back().fraction, 1.0);
}

TEST(Seeds, TrialSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (int t = 0; t < 1000; ++t) seen.insert(trial_seed(7, t));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(trial_seed(7, 3), trial_seed(7, 3));
}

TEST(Config, ParsesAndEchoes) {
  const auto cfg = parse_experiment_config(
      "# comment\nmode = p1_sweep\nL_grid = 2\nprecoder = zf\nm_max = 64\n"
      "sweep_values = 10, 20, 40\nk_values = 2,4\noutput = out\n");
  EXPECT_EQ(cfg.scenario.grid.grid_side, 2);
  EXPECT_EQ(cfg.scenario.radio.precoder, Precoder::ZF);
  EXPECT_EQ(cfg.sweep_values, std::vector<double>({10, 20, 40}));
  EXPECT_EQ(cfg.k_values, std::vector<int>({2, 4}));
  EXPECT_NO_THROW(cfg.validate());
  const auto again = parse_experiment_config(describe(cfg));
  EXPECT_EQ(describe(again), describe(cfg));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_experiment_config("mode = p1_sweep\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("mode = p1_sweep\nm_max = ten\n"), ConfigError);
  EXPECT_THROW(parse_experiment_config("mode p1_sweep\n"), ConfigError);
  auto cfg = parse_experiment_config("mode = p1_sweep\nsweep_values = 10\n");
  EXPECT_THROW(cfg.validate(), ConfigError);  // no output
  cfg.output = "x";
  EXPECT_NO_THROW(cfg.validate());
  cfg.sweep_values = {10.5};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.mode = "nope";
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, RoundingGapGuards) {
  auto cfg = small_config("rounding_gap", "m_max = 40\nsweep_values = 1e-3\n");
  EXPECT_THROW(run_experiment(cfg), ConfigError);
  cfg.scenario.radio.m_max = 12;
  cfg.oracle_cells = 4;
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST(Experiment, DeterministicAcrossRunsAndThreads) {
  auto cfg = small_config("p3_sweep", "L_grid = 2\nusers_per_cell = 2\nsweep_values = 20, 60\ntrials = 6\nseed = 5\n");
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  cfg.threads = 3;
  const auto c = run_experiment(cfg);
  EXPECT_EQ(a.summary.to_csv(), b.summary.to_csv());
  EXPECT_EQ(a.summary.to_csv(), c.summary.to_csv());
  EXPECT_EQ(trials_table(a.records, false).to_csv(), trials_table(c.records, false).to_csv());
  EXPECT_EQ(a.manifest, b.manifest);
  cfg.scenario.grid.seed = 6;
  EXPECT_NE(trials_table(run_experiment(cfg).records, false).to_csv(), trials_table(a.records, false).to_csv());
}

TEST(Experiment, PowerFallsWithAntennas) {
  const auto cfg = small_config(
      "p1_sweep", "L_grid = 1\nusers_per_cell = 4\nprecoder = zf\nm_max = 200\nsweep_values = 20, 50, 100, 200\ntrials = 20\n");
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.summary.rows.size(), 4u);
  double prev = 1e300;
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(cell(res.summary, r, "feasibility_rate"), 1.0);
    const double p = cell(res.summary, r, "mean_power");
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Experiment, CostCurveMinimizerMatchesRelaxation) {
  const auto cfg = small_config("p2_cost_curve",
                                "L_grid = 1\nusers_per_cell = 4\nm_max = 400\nsweep_values = 1e-6, 1e-4\ntrials = 10\n");
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.summary.rows.size(), 2u);
  for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(cell(res.summary, r, "minimizer_match_rate"), 1.0);
  ASSERT_TRUE(res.extra.count("curve"));
}

TEST(Experiment, MaxminFeasibilityGrowsWithAntennas) {
  const auto cfg = small_config("maxmin_cdf",
                                "L_grid = 2\nusers_per_cell = 2\nalpha = 1\nsweep_values = 4, 16, 64, 256\ntrials = 20\n");
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.summary.rows.size(), 4u);
  double prev = -1.0;
  for (std::size_t r = 0; r < 4; ++r) {
    const double rate = cell(res.summary, r, "feasibility_rate");
    EXPECT_GE(rate, prev);
    prev = rate;
  }
  ASSERT_TRUE(res.extra.count("cdf"));
}

TEST(Experiment, WritesFiles) {
  auto cfg = small_config("p3_sweep", "L_grid = 1\nusers_per_cell = 2\nsweep_values = 20\ntrials = 2\n");
  const auto dir = std::filesystem::temp_directory_path() / "mimopc_harness_test";
  std::filesystem::remove_all(dir);
  cfg.output = dir.string();
  write_experiment(run_experiment(cfg), cfg.output);
  for (const char* f : {"summary.csv", "trials.csv", "manifest.txt"}) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::filesystem::remove_all(dir);
}

TEST(Io, InstanceRoundTrip) {
  fixtures::Rng rng(61);
  const auto inst = fixtures::random_mc(rng, 3, 2, Precoder::ZF, 30, true);
  const auto g = compute_gammas_mc(inst);
  const auto loaded = instance_from_json_text(to_json(inst, &g).dump());
  EXPECT_EQ(loaded.inst.L, 3);
  EXPECT_EQ(loaded.inst.K, 2);
  EXPECT_EQ(loaded.inst.beta, inst.beta);
  EXPECT_EQ(loaded.inst.alpha, inst.alpha);
  EXPECT_EQ(loaded.inst.precoder, Precoder::ZF);
  ASSERT_TRUE(loaded.gamma_override.has_value());
  EXPECT_EQ(loaded.gamma_override->gamma, g.gamma);
}

TEST(Io, RejectsMalformedJson) {
  EXPECT_THROW(instance_from_json_text("{"), ConfigError);
  EXPECT_THROW(instance_from_json_text(R"({"beta": [[[1.0]]], "precoder": "qr"})"), std::exception);
}
