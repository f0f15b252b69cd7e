#pragma once

#include "ipm/core.hpp"
#include "ipm/discriminator.hpp"
#include "ipm/distribution.hpp"
#include "ipm/kernels.hpp"

#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace ipm {

enum class UpdateOrder {
  sequential,    // discriminator first, generator uses the updated discriminator
  simultaneous,  // both use the state at the start of the iteration
};

struct TrainConfig {
  double eta_d = 1e-3;
  double eta_g = 1e-3;
  double lambda = 0.01;
  long steps = 1000;
  long snapshot_every = 1;
  double prune_tol = 1e-12;
  std::uint64_t rng_seed = 0;
  UpdateOrder order = UpdateOrder::sequential;
  // 0 leaves history compression off; see HistoryOptions.
  std::size_t compress_after = 32;

  double mu() const { return eta_g / eta_d; }
  double decay() const { return 1.0 - eta_d * lambda; }

  void validate() const {
    require(eta_d > 0.0 && std::isfinite(eta_d), "eta_d must be positive");
    require(eta_g > 0.0 && std::isfinite(eta_g), "eta_g must be positive");
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be nonnegative");
    require(steps >= 0, "steps must be nonnegative");
    require(snapshot_every >= 1, "snapshot_every must be positive");
    require(prune_tol >= 0.0, "prune_tol must be nonnegative");
    require(decay() > 0.0, "eta_d * lambda must be below 1");
    require(std::isfinite(mu()), "eta_g / eta_d must be finite");
  }
};

// ---- single steps -----------------------------------------------------------

inline void check_shapes(const DiscriminatorState& s, const DiscreteDistribution& pr, const DiscreteDistribution& pg) {
  if (pr.dim() != s.dim() || pg.dim() != s.dim())
    throw InputError("dimension mismatch between distributions and kernel");
}

inline void discriminator_step_inplace(DiscriminatorState& s, const DiscreteDistribution& pr,
                                       const DiscreteDistribution& pg, const TrainConfig& cfg) {
  check_shapes(s, pr, pg);
  if (s.mode() == DiscriminatorMode::parametric) {
    const Vector diff = s.weighted_features(s.trig(pr.points()), pr.masses()) -
                        s.weighted_features(s.trig(pg.points()), pg.masses());
    s.parametric_update(cfg.decay(), cfg.eta_d, diff);
    return;
  }
  s.decay(cfg.decay());
  for (int i = 0; i < pr.size(); ++i) s.add_entry(cfg.eta_d * pr.mass(i), pr.point(i), CenterClass::true_point);
  for (int j = 0; j < pg.size(); ++j) s.add_generated(-cfg.eta_d * pg.mass(j), pg.points().col(j).data(), j);
  s.prune(std::max(s.largest_true_coef(), cfg.eta_d * pg.masses().maxCoeff()));
}

inline DiscriminatorState discriminator_step(DiscriminatorState s, const DiscreteDistribution& pr,
                                             const DiscreteDistribution& pg, const TrainConfig& cfg) {
  discriminator_step_inplace(s, pr, pg, cfg);
  return s;
}

inline double eval_discriminator(const DiscriminatorState& s, const Vector& x) { return s.eval(x); }
inline Vector eval_discriminator_grad(const DiscriminatorState& s, const Vector& x) { return s.grad(x); }

// Gradient of f at every generated point (d x n).
inline Matrix discriminator_grads(const DiscriminatorState& s, const Matrix& points) {
  if (s.mode() == DiscriminatorMode::parametric) return s.parametric_grads(s.trig(points));
  Matrix g(points.rows(), points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) g.col(j) = s.grad(points.col(j));
  return g;
}

inline DiscreteDistribution generator_step(const DiscreteDistribution& pg, const DiscriminatorState& s,
                                           const TrainConfig& cfg) {
  require(pg.dim() == s.dim(), "generator_step: dimension mismatch");
  const Matrix g = discriminator_grads(s, pg.points());
  Matrix x = pg.points();
  for (int j = 0; j < pg.size(); ++j) x.col(j) += cfg.eta_g * pg.mass(j) * g.col(j);
  return pg.with_points(std::move(x));
}

// ---- training loop ------------------------------------------------------------

struct Snapshot {
  long step;
  Matrix points;  // d x N_g
};

struct TrainingTrace {
  std::vector<Snapshot> snapshots;
  std::vector<std::map<std::string, double>> metrics;  // one record per snapshot
  std::optional<DiscriminatorState> final_discriminator;
  DiscreteDistribution final_generated;
  bool diverged = false;
  long diverged_step = -1;
  std::string diagnostic;
  long steps_run = 0;
};

// Called at every snapshot; fills the per-snapshot metric record.
using SnapshotObserver =
    std::function<void(long step, const DiscreteDistribution& pg, const DiscriminatorState& s,
                       std::map<std::string, double>& record)>;

inline TrainingTrace train(const DiscreteDistribution& pr, const DiscreteDistribution& pg_init,
                           DiscriminatorState state, const TrainConfig& cfg,
                           const SnapshotObserver& observer = {}) {
  cfg.validate();
  check_shapes(state, pr, pg_init);
  TrainingTrace trace;
  const int n = pg_init.size();
  Matrix x = pg_init.points();
  const Vector& w = pg_init.masses();

  auto snap = [&](long step) {
    trace.snapshots.push_back({step, x});
    std::map<std::string, double> rec;
    if (observer) observer(step, pg_init.with_points(x), state, rec);
    trace.metrics.push_back(std::move(rec));
  };
  snap(0);

  const bool parametric = state.mode() == DiscriminatorMode::parametric;
  Vector true_features;
  if (parametric) true_features = state.weighted_features(state.trig(pr.points()), pr.masses());

  long k = 0;
  for (; k < cfg.steps; ++k) {
    Matrix g;
    if (parametric) {
      const TrigCache cache = state.trig(x);
      if (cfg.order == UpdateOrder::simultaneous) g = state.parametric_grads(cache);
      state.parametric_update(cfg.decay(), cfg.eta_d, true_features - state.weighted_features(cache, w));
      if (cfg.order == UpdateOrder::sequential) g = state.parametric_grads(cache);
    } else {
      const DiscreteDistribution pg = pg_init.with_points(x);
      if (cfg.order == UpdateOrder::simultaneous) g = discriminator_grads(state, x);
      discriminator_step_inplace(state, pr, pg, cfg);
      if (cfg.order == UpdateOrder::sequential) g = discriminator_grads(state, x);
    }
    for (int j = 0; j < n; ++j) x.col(j) += cfg.eta_g * w(j) * g.col(j);
    if (!x.allFinite()) {
      trace.diverged = true;
      trace.diverged_step = k + 1;
      trace.diagnostic = "non-finite generated coordinate at step " + std::to_string(k + 1);
      ++k;
      break;
    }
    if ((k + 1) % cfg.snapshot_every == 0 || k + 1 == cfg.steps) snap(k + 1);
  }
  trace.steps_run = k;
  trace.final_discriminator = std::move(state);
  if (!trace.diverged) trace.final_generated = pg_init.with_points(x);
  else trace.final_generated = pg_init.with_points(trace.snapshots.back().points);
  return trace;
}

// Default representation: parametric for rff, history otherwise.
inline DiscriminatorState initial_discriminator(const KernelSpec& spec, int dim, const TrainConfig& cfg) {
  auto kernel = std::make_shared<const Kernel>(spec, dim);
  if (spec.variant == KernelVariant::rff) return DiscriminatorState::parametric(kernel);
  HistoryOptions opts;
  opts.prune_tol = cfg.prune_tol;
  opts.compress_after = cfg.compress_after;
  return DiscriminatorState::history(kernel, opts);
}

inline TrainingTrace train(const DiscreteDistribution& pr, const DiscreteDistribution& pg_init, const KernelSpec& spec,
                           const TrainConfig& cfg, const SnapshotObserver& observer = {}) {
  require(pr.dim() == pg_init.dim(), "train: dimension mismatch");
  return train(pr, pg_init, initial_discriminator(spec, pr.dim(), cfg), cfg, observer);
}

// ---- regions --------------------------------------------------------------------

struct RegionAssignment {
  std::vector<std::vector<int>> members;  // per true point
  std::vector<double> delta;              // p_i - sum of member masses
  std::vector<int> unassigned;
};

inline RegionAssignment assign_regions(const DiscreteDistribution& pr, const DiscreteDistribution& pg, double radius) {
  require(pr.dim() == pg.dim(), "assign_regions: dimension mismatch");
  require(radius >= 0.0, "assign_regions: radius must be nonnegative");
  RegionAssignment out;
  out.members.resize(pr.size());
  for (int j = 0; j < pg.size(); ++j) {
    int best = -1;
    double best_d = 0.0;
    for (int i = 0; i < pr.size(); ++i) {
      const double d = (pg.points().col(j) - pr.points().col(i)).norm();
      if (best < 0 || d < best_d) {
        best = i;
        best_d = d;
      }
    }
    if (best_d <= radius) out.members[best].push_back(j);
    else out.unassigned.push_back(j);
  }
  for (int i = 0; i < pr.size(); ++i) {
    double s = 0.0;
    for (int j : out.members[i]) s += pg.mass(j);
    out.delta.push_back(pr.mass(i) - s);
  }
  return out;
}

struct Region {
  Vector center;
  double radius;
};

// Deterministic sample of a ball: the center, then shells at radius fractions
// {1/4, 1/2, 3/4, 1}. In d = 2 each shell has `angles` equally spaced points; in
// other dimensions the shells use the +-axis directions, the directions toward
// every other region's center, and seeded uniform directions.
inline std::vector<Vector> isolation_samples(const std::vector<Region>& regions, std::size_t idx, int angles = 64,
                                             int random_dirs = 32, std::uint64_t seed = 0) {
  const Region& r = regions[idx];
  const int d = static_cast<int>(r.center.size());
  std::vector<Vector> dirs;
  if (d == 2) {
    for (int a = 0; a < angles; ++a) {
      const double t = 2.0 * std::numbers::pi * a / angles;
      Vector u(2);
      u << std::cos(t), std::sin(t);
      dirs.push_back(u);
    }
  } else {
    for (int k = 0; k < d; ++k)
      for (double sgn : {1.0, -1.0}) {
        Vector u = Vector::Zero(d);
        u(k) = sgn;
        dirs.push_back(u);
      }
    const CounterRng rng(derive_seed(seed, idx));
    for (int m = 0; m < random_dirs; ++m) {
      Vector u(d);
      for (int k = 0; k < d; ++k) u(k) = rng.normal(static_cast<std::uint64_t>(m) * d + k);
      if (u.norm() > 0) dirs.push_back(u.normalized());
    }
  }
  for (std::size_t o = 0; o < regions.size(); ++o) {
    if (o == idx) continue;
    const Vector toward = regions[o].center - r.center;
    if (toward.norm() > 0) dirs.push_back(toward.normalized());
  }
  std::vector<Vector> out{r.center};
  for (double f : {0.25, 0.5, 0.75, 1.0})
    for (const auto& u : dirs) out.push_back(r.center + f * r.radius * u);
  return out;
}

// Largest cross-region kernel gradient norm over the deterministic samples.
inline double measure_isolation(const KernelSpec& spec, const DiscreteDistribution& pr, const std::vector<Region>& regions,
                                int angles = 64, int random_dirs = 32, std::uint64_t seed = 0) {
  if (regions.size() < 2) return 0.0;
  const int d = static_cast<int>(regions.front().center.size());
  for (const auto& r : regions) {
    require(r.center.size() == d, "measure_isolation: dimension mismatch");
    require(r.radius >= 0.0, "measure_isolation: radius must be nonnegative");
  }
  require(pr.size() == 0 || pr.dim() == d, "measure_isolation: dimension mismatch");
  const Kernel k(spec, d);
  std::vector<std::vector<Vector>> samples;
  for (std::size_t i = 0; i < regions.size(); ++i) samples.push_back(isolation_samples(regions, i, angles, random_dirs, seed));
  double eps = 0.0;
  for (std::size_t i = 0; i < regions.size(); ++i)
    for (std::size_t j = 0; j < regions.size(); ++j) {
      if (i == j) continue;
      for (const auto& x : samples[i])
        for (const auto& y : samples[j]) eps = std::max(eps, k.grad_x(x, y).norm());
    }
  return eps;
}

// Regions centred on the true points with a common radius.
inline std::vector<Region> regions_around(const DiscreteDistribution& pr, double radius) {
  std::vector<Region> out;
  for (int i = 0; i < pr.size(); ++i) out.push_back({pr.point(i), radius});
  return out;
}

}  // namespace ipm
