#pragma once

#include "ipm/divergence.hpp"
#include "ipm/dynamics.hpp"
#include "ipm/experiments.hpp"
#include "ipm/kernels.hpp"
#include "ipm/stability.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace ipm {

using Json = nlohmann::json;

// Shortest round-trip representation; CSV and JSON numbers go through this.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON has no inf/nan; encode them as strings.
inline Json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

inline double as_number(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw InputError("expected a number, got " + j.dump());
}

// ---- files --------------------------------------------------------------------------

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError("invalid JSON in " + path + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

inline void ensure_writable_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw InputError("output directory not writable: " + dir.string());
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw InputError("output directory not writable: " + dir.string());
  }
  std::filesystem::remove(probe, ec);
}

// ---- value types ---------------------------------------------------------------------

inline Json to_json(const Matrix& points) {
  Json a = Json::array();
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    Json p = Json::array();
    for (Eigen::Index k = 0; k < points.rows(); ++k) p.push_back(num(points(k, j)));
    a.push_back(p);
  }
  return a;
}

inline Matrix points_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw InputError("points must be a non-empty array of coordinate arrays");
  const auto d = j[0].size();
  if (d == 0) throw InputError("points must have at least one coordinate");
  Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    if (!j[c].is_array() || j[c].size() != d) throw InputError("points must all have the same dimension");
    for (std::size_t k = 0; k < d; ++k)
      m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = as_number(j[c][k]);
  }
  return m;
}

inline Json to_json(const DiscreteDistribution& p) {
  Json m = Json::array();
  for (int j = 0; j < p.size(); ++j) m.push_back(num(p.mass(j)));
  return {{"points", to_json(p.points())}, {"masses", m}};
}

// {"points": [[..], ..], "masses": [..]} ; masses optional (uniform)
inline DiscreteDistribution distribution_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("points")) throw InputError("distribution needs a 'points' array");
  const Matrix x = points_from_json(j.at("points"));
  if (!j.contains("masses")) return DiscreteDistribution::uniform(x);
  const auto& m = j.at("masses");
  if (!m.is_array() || m.size() != static_cast<std::size_t>(x.cols()))
    throw InputError("'masses' must have one entry per point");
  Vector w(x.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = as_number(m[static_cast<std::size_t>(i)]);
  return DiscreteDistribution(x, w);
}

inline Json to_json(const KernelSpec& s) {
  Json j{{"variant", to_string(s.variant)}};
  switch (s.variant) {
    case KernelVariant::exact_rbf: j["sigma"] = s.sigma; break;
    case KernelVariant::rff:
      j["sigma"] = s.sigma;
      j["features"] = s.features;
      j["seed"] = s.seed;
      j["paper_scaling"] = s.paper_scaling;
      break;
    case KernelVariant::multiscale: j["sigmas"] = s.sigmas; break;
  }
  return j;
}

inline KernelSpec kernel_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("kernel spec must be an object");
  const auto variant = kernel_variant_from_string(j.value("variant", std::string("exact_rbf")));
  switch (variant) {
    case KernelVariant::exact_rbf: return KernelSpec::exact_rbf(j.value("sigma", 1.0));
    case KernelVariant::rff:
      return KernelSpec::rff(j.value("sigma", 1.0), j.value("features", 1000), j.value("seed", std::uint64_t{0}),
                             j.value("paper_scaling", false));
    case KernelVariant::multiscale:
      if (!j.contains("sigmas")) throw InputError("multiscale kernel needs 'sigmas'");
      return KernelSpec::multiscale(j.at("sigmas").get<std::vector<double>>());
  }
  throw InputError("unreachable kernel variant");
}

inline Json to_json(const TrainConfig& c) {
  return {{"eta_d", c.eta_d},
          {"eta_g", c.eta_g},
          {"lambda", c.lambda},
          {"steps", c.steps},
          {"snapshot_every", c.snapshot_every},
          {"prune_tol", c.prune_tol},
          {"compress_after", c.compress_after},
          {"order", c.order == UpdateOrder::sequential ? "sequential" : "simultaneous"}};
}

// Missing keys keep the defaults of `base`.
inline TrainConfig train_config_from_json(const Json& j, TrainConfig base = {}) {
  if (!j.is_object()) throw InputError("train config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "eta_d") base.eta_d = value.get<double>();
    else if (key == "eta_g") base.eta_g = value.get<double>();
    else if (key == "eta") base.eta_d = base.eta_g = value.get<double>();
    else if (key == "lambda") base.lambda = value.get<double>();
    else if (key == "steps") base.steps = value.get<long>();
    else if (key == "snapshot_every") base.snapshot_every = value.get<long>();
    else if (key == "prune_tol") base.prune_tol = value.get<double>();
    else if (key == "compress_after") base.compress_after = value.get<std::size_t>();
    else if (key == "order") {
      const auto o = value.get<std::string>();
      if (o == "sequential") base.order = UpdateOrder::sequential;
      else if (o == "simultaneous") base.order = UpdateOrder::simultaneous;
      else throw InputError("order must be 'sequential' or 'simultaneous'");
    } else {
      throw InputError("unknown train config key '" + key + "'");
    }
  }
  base.validate();
  return base;
}

inline Json to_json(const StabilityReport& r) {
  Json eig = Json::array();
  for (const auto& s : r.eigenvalues) eig.push_back({num(s.real()), num(s.imag())});
  return {{"verdict", to_string(r.verdict)},
          {"condition", r.condition},
          {"eigenvalues", eig},
          {"max_real_root", num(r.max_real_root)},
          {"max_real_part", num(r.max_real_part)},
          {"tolerance", num(r.tolerance)},
          {"symmetry_modes", r.symmetry_modes},
          {"equilibrium", to_json(r.equilibrium)},
          {"distances_sigma", r.distances},
          {"objective", num(r.objective)},
          {"grad_norm", num(r.grad_norm)},
          {"iterations", r.iterations}};
}

inline Json to_json(const DivergenceWitness& w) {
  Json x0 = Json::array(), u = Json::array();
  for (Eigen::Index i = 0; i < w.x0.size(); ++i) {
    x0.push_back(w.x0(i));
    u.push_back(w.u(i));
  }
  return {{"x0", x0},
          {"direction", u},
          {"velocity", w.v0},
          {"rho", w.rho},
          {"eta_d", w.eta_d},
          {"eta_g", w.eta_g},
          {"residual", w.residual},
          {"j_max", w.j_max},
          {"tail_bound", w.tail_bound},
          {"sign_changes", w.sign_changes},
          {"scan_floor_exponent", w.scan_floor}};
}

// {"true": {...}, "generated": {...}, "kernel": {...}, "lambda": .., "mu": ..}
inline RegionSystem region_from_json(const Json& j) {
  RegionSystem s;
  if (!j.contains("true_point")) throw InputError("region needs 'true_point'");
  const auto tp = j.at("true_point").get<std::vector<double>>();
  s.x_true = Eigen::Map<const Vector>(tp.data(), static_cast<Eigen::Index>(tp.size()));
  s.p_true = j.value("true_mass", 1.0);
  if (!j.contains("generated_masses")) throw InputError("region needs 'generated_masses'");
  const auto q = j.at("generated_masses").get<std::vector<double>>();
  s.p_gen = Eigen::Map<const Vector>(q.data(), static_cast<Eigen::Index>(q.size()));
  if (j.contains("kernel")) s.spec = kernel_from_json(j.at("kernel"));
  s.lambda = j.value("lambda", 0.01);
  s.mu = j.value("mu", 1.0);
  s.validate();
  return s;
}

// ---- trace output ---------------------------------------------------------------------

inline std::string trace_csv(const TrainingTrace& t) {
  std::ostringstream out;
  const auto d = t.snapshots.empty() ? 0 : t.snapshots.front().points.rows();
  out << "step,point_index";
  for (Eigen::Index k = 0; k < d; ++k) out << ",coord_" << k;
  out << "\n";
  for (const auto& s : t.snapshots)
    for (Eigen::Index j = 0; j < s.points.cols(); ++j) {
      out << s.step << "," << j;
      for (Eigen::Index k = 0; k < d; ++k) out << "," << fmt(s.points(k, j));
      out << "\n";
    }
  return out.str();
}

inline Json trace_json(const TrainingTrace& t, const KernelSpec& spec, const TrainConfig& cfg,
                       const std::string& csv_name) {
  Json steps = Json::array();
  for (const auto& s : t.snapshots) steps.push_back(s.step);
  Json metrics = Json::array();
  for (const auto& m : t.metrics) {
    Json rec = Json::object();
    for (const auto& [k, v] : m) rec[k] = num(v);
    metrics.push_back(rec);
  }
  return {{"kernel", to_json(spec)},   {"train", to_json(cfg)},        {"steps_run", t.steps_run},
          {"diverged", t.diverged},    {"diverged_step", t.diverged_step}, {"diagnostic", t.diagnostic},
          {"snapshot_steps", steps},   {"metrics", metrics},           {"snapshots_csv", csv_name},
          {"final_generated", to_json(t.final_generated)}};
}

// ---- sweep output -----------------------------------------------------------------------

inline std::string kernel_width_label(const KernelSpec& s) {
  if (s.variant == KernelVariant::multiscale) {
    std::string out;
    for (std::size_t i = 0; i < s.sigmas.size(); ++i) out += (i ? ";" : "") + fmt(s.sigmas[i]);
    return out;
  }
  return fmt(s.sigma);
}

// Deterministic unless timing is requested: the seconds column is left empty.
inline std::string sweep_csv(const SweepResult& r, bool timing) {
  std::ostringstream out;
  out << "kernel_id,sigma_or_widths,trial,beta,divergence_fraction,diverged,seconds\n";
  for (const auto& row : r.rows) {
    out << kernel_id(static_cast<std::size_t>(row.kernel_index)) << ","
        << kernel_width_label(r.kernels[static_cast<std::size_t>(row.kernel_index)]) << "," << row.trial << ","
        << (row.error.empty() ? fmt(row.beta) : "error") << ","
        << (row.error.empty() ? fmt(row.divergence_fraction) : "error") << "," << (row.diverged ? 1 : 0) << ",";
    if (timing) out << fmt(row.seconds);
    out << "\n";
  }
  return out.str();
}

inline Json sweep_summary_json(const SweepResult& r, const ExperimentConfig& cfg) {
  Json kernels = Json::array();
  for (std::size_t k = 0; k < r.summary.size(); ++k) {
    const auto& s = r.summary[k];
    kernels.push_back({{"kernel_id", s.kernel_id},
                       {"label", s.label},
                       {"kernel", to_json(r.kernels[k])},
                       {"median_beta", num(s.median_beta)},
                       {"mean_divergence_fraction", num(s.mean_divergence_fraction)},
                       {"completed", s.completed},
                       {"failed", s.failed}});
  }
  Json errors = Json::array();
  for (const auto& row : r.rows)
    if (!row.error.empty())
      errors.push_back({{"kernel_id", kernel_id(static_cast<std::size_t>(row.kernel_index))}, {"trial", row.trial},
                        {"error", row.error}});
  return {{"scenario", r.scenario},
          {"trials", cfg.trials},
          {"master_seed", cfg.master_seed},
          {"diverge_threshold", cfg.diverge_threshold},
          {"train", to_json(cfg.train)},
          {"kernels", kernels},
          {"errors", errors}};
}

inline std::string timings_csv(const SweepResult& r) {
  std::ostringstream out;
  out << "kernel_id,trial,seconds\n";
  for (const auto& row : r.rows)
    out << kernel_id(static_cast<std::size_t>(row.kernel_index)) << "," << row.trial << "," << fmt(row.seconds) << "\n";
  return out.str();
}

// Sweep config file:
// {"scenario": "circle4_d2" | "sphere10_d10" | "dirac_pair" | "custom",
//  "custom": {"true": dist, "generated": dist}, "kernels": [spec, ..] | "sigmas": [..],
//  "features": 1000, "trials": 20, "train": {...}, "seed": 1, "threads": 0,
//  "diverge_threshold": 2, "trajectories": false}
inline ExperimentConfig experiment_from_json(const Json& j, ExperimentConfig base) {
  if (!j.is_object()) throw InputError("experiment config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "scenario") base.scenario = value.get<std::string>();
    else if (key == "custom") {
      base.custom = Scenario{"custom", distribution_from_json(value.at("true")),
                             distribution_from_json(value.at("generated"))};
    } else if (key == "kernels") {
      base.kernels.clear();
      for (const auto& k : value) base.kernels.push_back(kernel_from_json(k));
    } else if (key == "sigmas") {
      base.kernels.clear();
      const int features = j.value("features", 1000);
      for (double s : value.get<std::vector<double>>()) base.kernels.push_back(KernelSpec::rff(s, features, 0));
    } else if (key == "features") {
      // consumed with "sigmas"
    } else if (key == "trials") base.trials = value.get<int>();
    else if (key == "train") base.train = train_config_from_json(value, base.train);
    else if (key == "seed") base.master_seed = value.get<std::uint64_t>();
    else if (key == "threads") base.threads = value.get<int>();
    else if (key == "diverge_threshold") base.diverge_threshold = value.get<double>();
    else if (key == "trajectories") base.trajectories = value.get<bool>();
    else throw InputError("unknown experiment config key '" + key + "'");
  }
  base.validate();
  return base;
}

}  // namespace ipm
