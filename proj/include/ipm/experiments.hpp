#pragma once

#include "ipm/core.hpp"
#include "ipm/distribution.hpp"
#include "ipm/dynamics.hpp"
#include "ipm/kernels.hpp"
#include "ipm/metrics.hpp"
#include "ipm/random.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

namespace ipm {

struct Scenario {
  std::string name;
  DiscreteDistribution pr;
  DiscreteDistribution pg;
};

namespace detail {

inline Matrix gaussian_points(std::uint64_t seed, int d, int n, double sd) {
  RandomStream rs(seed);
  Matrix x(d, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < d; ++k) x(k, j) = sd * rs.normal();
  return x;
}

}  // namespace detail

// Built-in scenarios. True and generated draws use separate child streams so
// either can change without disturbing the other.
inline Scenario scenario_build(const std::string& name, std::uint64_t seed) {
  const std::uint64_t true_seed = derive_seed(seed, 0), gen_seed = derive_seed(seed, 1);
  if (name == "circle4_d2") {
    Matrix x(2, 4);
    x << 1, 0, -1, 0,
         0, 1, 0, -1;
    return {name, DiscreteDistribution::uniform(x),
            DiscreteDistribution::uniform(detail::gaussian_points(gen_seed, 2, 4, std::sqrt(0.5)))};
  }
  if (name == "sphere10_d10") {
    Matrix x = detail::gaussian_points(true_seed, 10, 10, 1.0);
    for (int j = 0; j < 10; ++j) {
      const double n = x.col(j).norm();
      if (!(n > 0.0)) throw NumericError("degenerate sphere sample");
      x.col(j) /= n;
    }
    return {name, DiscreteDistribution::uniform(x),
            DiscreteDistribution::uniform(detail::gaussian_points(gen_seed, 10, 10, std::sqrt(0.1)))};
  }
  if (name == "dirac_pair") {
    Matrix t = Matrix::Zero(2, 1), g = Matrix::Zero(2, 1);
    g(0, 0) = 10.0;
    return {name, DiscreteDistribution::uniform(t), DiscreteDistribution::uniform(g)};
  }
  throw InputError("unknown scenario '" + name + "' (circle4_d2, sphere10_d10, dirac_pair, or a custom file)");
}

struct ExperimentConfig {
  std::string scenario = "circle4_d2";
  std::optional<Scenario> custom;  // used when scenario == "custom"
  std::vector<KernelSpec> kernels;
  int trials = 20;
  TrainConfig train;
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0: hardware concurrency
  double diverge_threshold = 2.0;
  bool timing = false;
  bool trajectories = false;  // keep snapshots for per-trial trajectory output

  void validate() const {
    require(trials >= 1, "trials must be at least 1");
    require(!kernels.empty(), "kernel sweep must be non-empty");
    require(diverge_threshold > 0.0, "divergence threshold must be positive");
    require(threads >= 0, "threads must be nonnegative");
    train.validate();
    for (const auto& k : kernels) k.validate();
    if (scenario == "custom") require(custom.has_value(), "custom scenario needs point data");
  }

  // Acceptance-scale preset: 3 widths, 20 trials.
  static ExperimentConfig desk() {
    ExperimentConfig c;
    c.train.eta_d = c.train.eta_g = 1e-3;
    c.train.lambda = 0.01;
    c.train.steps = 40000;
    c.train.snapshot_every = 40000;
    c.trials = 20;
    for (double s : {0.05, 0.5, 5.0}) c.kernels.push_back(KernelSpec::rff(s, 1000, 0));
    return c;
  }
  // Paper-scale preset: log width grid, 100 trials.
  static ExperimentConfig paper() {
    ExperimentConfig c = desk();
    c.trials = 100;
    c.kernels.clear();
    for (double s : {0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0}) c.kernels.push_back(KernelSpec::rff(s, 1000, 0));
    return c;
  }
};

struct TrialRecord {
  int kernel_index = 0;
  int trial = 0;
  double beta = std::numeric_limits<double>::quiet_NaN();
  double divergence_fraction = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;  // non-finite coordinates during training
  double seconds = 0.0;
  std::string error;
  std::vector<Snapshot> snapshots;  // only with cfg.trajectories
  std::optional<DiscriminatorState> final_discriminator;
};

struct KernelSummary {
  std::string kernel_id;
  std::string label;
  double median_beta = std::numeric_limits<double>::quiet_NaN();
  double mean_divergence_fraction = std::numeric_limits<double>::quiet_NaN();
  int completed = 0;
  int failed = 0;
};

struct SweepResult {
  std::string scenario;
  std::vector<KernelSpec> kernels;
  std::vector<TrialRecord> rows;  // ordered by (kernel, trial)
  std::vector<KernelSummary> summary;
  std::vector<Scenario> scenarios;  // per trial, for plotting
};

inline double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  int n = 0;
  for (double x : v)
    if (!std::isnan(x)) {
      s += x;
      ++n;
    }
  return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

inline std::string kernel_id(std::size_t index) { return "k" + std::to_string(index); }

inline std::vector<KernelSummary> summarize(const std::vector<KernelSpec>& kernels, const std::vector<TrialRecord>& rows) {
  std::vector<KernelSummary> out(kernels.size());
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    std::vector<double> betas, fracs;
    out[k].kernel_id = kernel_id(k);
    out[k].label = kernels[k].label();
    for (const auto& r : rows)
      if (r.kernel_index == static_cast<int>(k)) {
        if (r.error.empty()) {
          betas.push_back(r.beta);
          fracs.push_back(r.divergence_fraction);
          ++out[k].completed;
        } else {
          ++out[k].failed;
        }
      }
    out[k].median_beta = median(betas);
    out[k].mean_divergence_fraction = mean(fracs);
  }
  return out;
}

inline Scenario trial_scenario(const ExperimentConfig& cfg, int trial) {
  if (cfg.scenario == "custom") return *cfg.custom;
  return scenario_build(cfg.scenario, derive_seed(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(trial)), 0));
}

// Kernel used for a trial: rff frequencies come from the trial's child seed, so
// all widths in a trial share the same standard-normal draws.
inline KernelSpec trial_kernel(const ExperimentConfig& cfg, std::size_t k, int trial) {
  KernelSpec s = cfg.kernels[k];
  if (s.variant == KernelVariant::rff)
    s.seed = derive_seed(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(trial)), 1);
  return s;
}

inline TrialRecord run_trial(const ExperimentConfig& cfg, std::size_t k, int trial) {
  TrialRecord r;
  r.kernel_index = static_cast<int>(k);
  r.trial = trial;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Scenario sc = trial_scenario(cfg, trial);
    TrainConfig tc = cfg.train;
    if (!cfg.trajectories) tc.snapshot_every = std::max<long>(1, tc.steps);
    auto trace = train(sc.pr, sc.pg, trial_kernel(cfg, k, trial), tc);
    r.diverged = trace.diverged;
    if (trace.diverged) {
      r.beta = std::numeric_limits<double>::infinity();
      r.divergence_fraction = 1.0;
    } else {
      r.beta = normalized_wasserstein(sc.pr, sc.pg, trace.final_generated);
      r.divergence_fraction = divergence_fraction(trace.final_generated, cfg.diverge_threshold);
    }
    if (cfg.trajectories) {
      r.snapshots = std::move(trace.snapshots);
      r.final_discriminator = std::move(trace.final_discriminator);
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t nk = cfg.kernels.size();
  const std::size_t units = nk * static_cast<std::size_t>(cfg.trials);
  SweepResult out;
  out.scenario = cfg.scenario;
  out.kernels = cfg.kernels;
  out.rows.resize(units);
  int nthreads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nthreads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(nthreads), units));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u = next++; u < units; u = next++)
      out.rows[u] = run_trial(cfg, u / static_cast<std::size_t>(cfg.trials), static_cast<int>(u % cfg.trials));
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  out.summary = summarize(cfg.kernels, out.rows);
  if (cfg.trajectories)
    for (int t = 0; t < cfg.trials; ++t) out.scenarios.push_back(trial_scenario(cfg, t));
  return out;
}

// ---- multi-scale comparison ---------------------------------------------------------

struct ConcatCurve {
  KernelSpec spec;
  std::vector<long> steps;
  std::vector<double> distance;  // |x_g - x_true| at each recorded step
  bool diverged = false;
  std::string error;
};

struct ConcatConfig {
  std::vector<KernelSpec> kernels = {KernelSpec::exact_rbf(0.1), KernelSpec::exact_rbf(1.0), KernelSpec::exact_rbf(10.0),
                                     KernelSpec::multiscale({0.1, 1.0, 10.0})};
  TrainConfig train = [] {
    TrainConfig t;
    t.eta_d = t.eta_g = 1e-3;
    t.lambda = 0.01;
    t.steps = 20000;
    t.snapshot_every = 100;
    return t;
  }();
  int threads = 0;
};

inline std::vector<ConcatCurve> run_concat_experiment(const ConcatConfig& cfg) {
  require(!cfg.kernels.empty(), "concat experiment needs kernels");
  cfg.train.validate();
  const Scenario sc = scenario_build("dirac_pair", 0);
  std::vector<ConcatCurve> curves(cfg.kernels.size());
  auto run = [&](std::size_t k) {
    ConcatCurve& c = curves[k];
    c.spec = cfg.kernels[k];
    try {
      const auto trace = train(sc.pr, sc.pg, c.spec, cfg.train);
      c.diverged = trace.diverged;
      for (const auto& s : trace.snapshots) {
        c.steps.push_back(s.step);
        c.distance.push_back((s.points.col(0) - sc.pr.point(0)).norm());
      }
    } catch (const std::exception& e) {
      c.error = e.what();
    }
  };
  std::vector<std::thread> pool;
  const bool parallel = cfg.threads != 1;
  for (std::size_t k = 0; k < cfg.kernels.size(); ++k) {
    if (parallel) pool.emplace_back(run, k);
    else run(k);
  }
  for (auto& t : pool) t.join();
  return curves;
}

}  // namespace ipm
