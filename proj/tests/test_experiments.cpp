#include "ipm/svg.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ipm;

namespace {

ExperimentConfig small_cfg() {
  ExperimentConfig c = ExperimentConfig::desk();
  c.trials = 3;
  c.train.steps = 300;
  c.train.snapshot_every = 300;
  c.kernels = {KernelSpec::rff(0.5, 200, 0), KernelSpec::rff(2.0, 200, 0)};
  return c;
}

std::filesystem::path tmpdir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ipm_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    rows.push_back(f);
  }
  return rows;
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Scenario, Geometry) {
  const auto c = scenario_build("circle4_d2", 7);
  ASSERT_EQ(c.pr.size(), 4);
  ASSERT_EQ(c.pg.size(), 4);
  std::vector<double> dists;
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(c.pr.point(i).norm(), 1.0, 1e-15);
    EXPECT_NEAR(c.pr.mass(i), 0.25, 1e-15);
    for (int j = i + 1; j < 4; ++j) dists.push_back((c.pr.point(i) - c.pr.point(j)).norm());
  }
  std::sort(dists.begin(), dists.end());
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(dists[k], std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(dists[4], 2.0, 1e-15);
  EXPECT_NEAR(dists[5], 2.0, 1e-15);

  const auto s = scenario_build("sphere10_d10", 7);
  ASSERT_EQ(s.pr.dim(), 10);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(s.pr.point(i).norm(), 1.0, 1e-12);

  const auto d = scenario_build("dirac_pair", 7);
  EXPECT_NEAR((d.pr.point(0) - d.pg.point(0)).norm(), 10.0, 0.0);

  EXPECT_THROW(scenario_build("nope", 1), InputError);
}

TEST(Scenario, GeneratedSecondMoment) {
  for (const std::string name : {"circle4_d2", "sphere10_d10"}) {
    double sum = 0.0;
    long n = 0;
    for (std::uint64_t seed = 0; n < 100000; ++seed) {
      const auto sc = scenario_build(name, seed);
      for (int j = 0; j < sc.pg.size(); ++j, ++n) sum += sc.pg.point(j).squaredNorm();
    }
    EXPECT_GE(sum / n, 0.99) << name;
    EXPECT_LE(sum / n, 1.01) << name;
  }
}

TEST(Scenario, SeedStreamsIndependent) {
  // true points for sphere10 depend on the seed, generated points too, and differ across seeds
  const auto a = scenario_build("sphere10_d10", 1), b = scenario_build("sphere10_d10", 2);
  EXPECT_GT((a.pr.points() - b.pr.points()).norm(), 0.1);
  EXPECT_GT((a.pg.points() - b.pg.points()).norm(), 0.1);
  EXPECT_EQ(scenario_build("sphere10_d10", 1).pg.points(), a.pg.points());
}

TEST(Aggregates, MedianAndMean) {
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({1, NAN, 5}), 3);
  EXPECT_TRUE(std::isnan(median({})));
  EXPECT_EQ(median({1, INFINITY, INFINITY}), INFINITY);
  EXPECT_EQ(mean({1, 2, NAN, 6}), 3);
}

TEST(Sweep, ZeroStepsGiveUnitBeta) {
  auto c = small_cfg();
  c.trials = 1;
  c.train.steps = 0;
  c.train.snapshot_every = 1;
  c.kernels.push_back(KernelSpec::exact_rbf(1.0));
  const auto r = run_sweep(c);
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.error.empty()) << row.error;
    EXPECT_DOUBLE_EQ(row.beta, 1.0);
  }
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
  auto c = small_cfg();
  c.threads = 1;
  const auto a = run_sweep(c);
  c.threads = 5;
  const auto b = run_sweep(c);
  EXPECT_EQ(sweep_csv(a, false), sweep_csv(b, false));
  EXPECT_EQ(sweep_summary_json(a, c).dump(), sweep_summary_json(b, c).dump());
}

TEST(Sweep, SeedIsolation) {
  auto c = small_cfg();
  const auto full = run_sweep(c);
  c.trials = 1;
  const auto one = run_sweep(c);
  for (std::size_t k = 0; k < c.kernels.size(); ++k) {
    const auto& a = full.rows[k * 3];
    const auto& b = one.rows[k];
    ASSERT_EQ(a.trial, 0);
    ASSERT_EQ(b.trial, 0);
    EXPECT_EQ(a.beta, b.beta);
    EXPECT_EQ(a.divergence_fraction, b.divergence_fraction);
  }
  // widths in a trial share frequency draws but not with other trials
  EXPECT_EQ(trial_kernel(c, 0, 4).seed, trial_kernel(c, 1, 4).seed);
  EXPECT_NE(trial_kernel(c, 0, 4).seed, trial_kernel(c, 0, 5).seed);
}

TEST(Sweep, TrialFailuresAreRecorded) {
  auto c = small_cfg();
  c.scenario = "custom";
  Matrix t(2, 1), g(3, 1);
  t << 0, 0;
  g << 1, 0, 0;  // dimension mismatch inside the trial
  c.custom = Scenario{"custom", DiscreteDistribution::uniform(t), DiscreteDistribution::uniform(g)};
  const auto r = run_sweep(c);
  for (const auto& row : r.rows) EXPECT_FALSE(row.error.empty());
  EXPECT_EQ(r.summary[0].failed, 3);
  EXPECT_NE(sweep_csv(r, false).find("error"), std::string::npos);
}

TEST(Sweep, RejectsBadConfig) {
  auto c = small_cfg();
  c.trials = 0;
  EXPECT_THROW(run_sweep(c), InputError);
  c = small_cfg();
  c.kernels.clear();
  EXPECT_THROW(run_sweep(c), InputError);
}

TEST(Outputs, CsvSummaryAndFigures) {
  auto c = small_cfg();
  c.trajectories = true;
  c.train.snapshot_every = 50;
  const auto r = run_sweep(c);
  const auto dir = tmpdir("outputs");
  emit_outputs(r, c, dir, true);

  const auto rows = parse_csv(slurp(dir / "sweep.csv"));
  ASSERT_EQ(rows.size(), 1 + c.kernels.size() * static_cast<std::size_t>(c.trials));
  EXPECT_EQ(rows[0], (std::vector<std::string>{"kernel_id", "sigma_or_widths", "trial", "beta",
                                                "divergence_fraction", "diverged", "seconds"}));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i].back(), "");  // no timing

  // aggregates recomputed from the CSV match summary.json exactly
  const auto summary = read_json_file((dir / "summary.json").string());
  for (std::size_t k = 0; k < c.kernels.size(); ++k) {
    std::vector<double> betas, fracs;
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i][0] == kernel_id(k)) {
        betas.push_back(std::stod(rows[i][3]));
        fracs.push_back(std::stod(rows[i][4]));
      }
    const auto& ks = summary["kernels"][k];
    EXPECT_EQ(median(betas), as_number(ks["median_beta"]));
    EXPECT_EQ(mean(fracs), as_number(ks["mean_divergence_fraction"]));
  }

  // one path per generated point
  const auto svgp = dir / "trajectory_k0_t0.svg";
  ASSERT_TRUE(std::filesystem::exists(svgp));
  const auto text = slurp(svgp);
  EXPECT_EQ(count(text, "<path"), 4u);
  EXPECT_EQ(count(text, "<rect x="), 100u * 100u);
  EXPECT_TRUE(std::filesystem::exists(dir / "beta_vs_sigma.svg"));
  EXPECT_TRUE(std::filesystem::exists(dir / "divergence_vs_sigma.svg"));
  const auto traj = parse_csv(slurp(dir / "trajectory_k0_t0.csv"));
  EXPECT_EQ(traj[0], (std::vector<std::string>{"step", "point_index", "coord_0", "coord_1"}));
  EXPECT_EQ(traj.size(), 1u + 4u * 7u);  // steps 0, 50, ..., 300

  // rerun is byte-identical
  const auto dir2 = tmpdir("outputs2");
  emit_outputs(run_sweep(c), c, dir2, true);
  EXPECT_EQ(slurp(dir / "sweep.csv"), slurp(dir2 / "sweep.csv"));
  EXPECT_EQ(slurp(dir / "summary.json"), slurp(dir2 / "summary.json"));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST(Outputs, TimingColumnAndUnwritableDir) {
  auto c = small_cfg();
  c.trials = 1;
  c.timing = true;
  const auto r = run_sweep(c);
  const auto rows = parse_csv(sweep_csv(r, true));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(std::stod(rows[i].back()), 0.0);
  EXPECT_THROW(emit_outputs(r, c, "/proc/ipm_not_writable"), InputError);
}

TEST(Config, JsonRoundTrip) {
  const auto c = ExperimentConfig::desk();
  Json j{{"scenario", "sphere10_d10"},
         {"kernels", Json::array({to_json(c.kernels[0]), to_json(KernelSpec::multiscale({0.1, 1.0}))})},
         {"trials", 4},
         {"train", to_json(c.train)},
         {"seed", 9}};
  const auto back = experiment_from_json(j, ExperimentConfig::desk());
  EXPECT_EQ(back.scenario, "sphere10_d10");
  EXPECT_EQ(back.trials, 4);
  EXPECT_EQ(back.master_seed, 9u);
  ASSERT_EQ(back.kernels.size(), 2u);
  EXPECT_EQ(back.kernels[1].sigmas, (std::vector<double>{0.1, 1.0}));
  EXPECT_EQ(back.train.steps, c.train.steps);
  EXPECT_THROW(experiment_from_json({{"bogus", 1}}, ExperimentConfig::desk()), InputError);
  EXPECT_THROW(experiment_from_json({{"trials", 0}}, ExperimentConfig::desk()), InputError);
  EXPECT_THROW(train_config_from_json({{"order", "sideways"}}), InputError);
  EXPECT_THROW(kernel_from_json({{"variant", "multiscale"}}), InputError);

  const auto d = distribution_from_json({{"points", {{0, 1}, {2, 3}}}, {"masses", {0.25, 0.75}}});
  EXPECT_EQ(d.size(), 2);
  EXPECT_DOUBLE_EQ(d.mass(1), 0.75);
  EXPECT_THROW(distribution_from_json({{"points", {{0, 1}, {2}}}}), InputError);
}

TEST(Concat, CurvesStartAtTen) {
  ConcatConfig c;
  c.train.steps = 200;
  c.train.snapshot_every = 50;
  const auto curves = run_concat_experiment(c);
  ASSERT_EQ(curves.size(), 4u);
  for (const auto& cv : curves) {
    EXPECT_TRUE(cv.error.empty()) << cv.error;
    ASSERT_EQ(cv.steps.size(), 5u);
    EXPECT_EQ(cv.steps[0], 0);
    EXPECT_DOUBLE_EQ(cv.distance[0], 10.0);
  }
  const auto dir = tmpdir("concat");
  emit_concat(curves, dir);
  EXPECT_EQ(count(slurp(dir / "concat.svg"), "<polyline"), 4u);
  std::filesystem::remove_all(dir);
}
