// Command-line front end. Every subcommand reads an optional JSON config,
// prints a JSON result on stdout, and writes files under --out when given.
#include "ipm/ipm.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace ipm;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string preset = "desk";
  std::optional<double> diverge_threshold;
  bool timing = false;
  int threads = 0;
  bool heatmap = false;
};

Json load(const Globals& g) { return g.config.empty() ? Json::object() : read_json_file(g.config); }

Vector vector_from(const Json& j, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (v.empty()) throw InputError(std::string(what) + " must be a non-empty array");
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

// ---- simulate ---------------------------------------------------------------------

// {"scenario": "circle4_d2"} or {"true": dist, "generated": dist}; "kernel", "train".
int cmd_simulate(const Globals& g) {
  const Json cfg = load(g);
  const std::uint64_t seed = g.seed.value_or(cfg.value("seed", std::uint64_t{1}));
  Scenario sc;
  if (cfg.contains("true")) {
    sc = {"custom", distribution_from_json(cfg.at("true")), distribution_from_json(cfg.at("generated"))};
  } else {
    sc = scenario_build(cfg.value("scenario", std::string("circle4_d2")), seed);
  }
  KernelSpec spec = cfg.contains("kernel") ? kernel_from_json(cfg.at("kernel")) : KernelSpec::exact_rbf(1.0);
  if (spec.variant == KernelVariant::rff && !(cfg.contains("kernel") && cfg.at("kernel").contains("seed")))
    spec.seed = derive_seed(seed, 1);
  TrainConfig defaults;
  defaults.snapshot_every = 100;
  const TrainConfig tc = cfg.contains("train") ? train_config_from_json(cfg.at("train"), defaults) : defaults;
  const auto trace = train(sc.pr, sc.pg, spec, tc);
  const double threshold = g.diverge_threshold.value_or(cfg.value("diverge_threshold", 2.0));

  Json res{{"scenario", sc.name},
           {"steps_run", trace.steps_run},
           {"diverged", trace.diverged},
           {"diagnostic", trace.diagnostic},
           {"divergence_fraction", divergence_fraction(trace.final_generated, threshold)}};
  if (!trace.diverged) res["beta"] = num(normalized_wasserstein(sc.pr, sc.pg, trace.final_generated));
  if (!g.out.empty()) {
    const std::filesystem::path dir = g.out;
    ensure_writable_dir(dir);
    write_text(dir / "trace.csv", trace_csv(trace));
    write_text(dir / "trace.json", trace_json(trace, spec, tc, "trace.csv").dump(2) + "\n");
    if (sc.pr.dim() == 2 && !trace.snapshots.empty())
      write_text(dir / "trajectory.svg",
                 svg::trajectory_plot(sc, trace.snapshots, g.heatmap ? &*trace.final_discriminator : nullptr));
  }
  print(res);
  return 0;
}

// ---- stability ----------------------------------------------------------------------

// Either a region {"true_point", "generated_masses", "kernel", "lambda", "mu",
// "equilibrium"?: points, "method"?: "analytic"|"numeric"|"both", "reduce_symmetry"?}
// or a support check {"true": dist, "generated": dist, "kernel", "lambda", "mu"}.
int cmd_stability(const Globals& g) {
  const Json cfg = load(g);
  if (cfg.empty()) throw InputError("stability needs --config");
  Json res;
  if (cfg.contains("true")) {
    const auto pr = distribution_from_json(cfg.at("true")), pg = distribution_from_json(cfg.at("generated"));
    const auto spec = cfg.contains("kernel") ? kernel_from_json(cfg.at("kernel")) : KernelSpec::exact_rbf(1.0);
    const auto v = check_corollary_support(pr, pg, spec, cfg.value("lambda", 0.01), cfg.value("mu", 1.0));
    res = {{"verdict", to_string(v.verdict)},
           {"region_sizes", v.region_sizes},
           {"delta", v.delta},
           {"conditions", v.conditions}};
  } else {
    const RegionSystem sys = region_from_json(cfg);
    const Matrix x = cfg.contains("equilibrium") ? points_from_json(cfg.at("equilibrium")) : at_true_point(sys);
    const auto method = cfg.value("method", std::string("both"));
    if (method != "analytic" && method != "numeric" && method != "both")
      throw InputError("method must be 'analytic', 'numeric' or 'both'");
    NumericOptions opt;
    opt.reduce_symmetry = cfg.value("reduce_symmetry", false);
    if (method != "numeric") {
      if (cfg.contains("equilibrium") && (x.colwise() - sys.x_true).norm() > 0.0)
        throw InputError("analytic classification applies to generated points at the true point");
      res["analytic"] = to_json(classify_analytic(sys));
    }
    if (method != "analytic") {
      if (!equilibrium_function_vanishes(sys, x, 1e-8) && sys.lambda > 0.0)
        res["warning"] = "configuration is not a critical point of the restricted objective";
      res["numeric"] = to_json(classify_numeric(sys, x, opt));
    }
  }
  if (!g.out.empty()) write_text(std::filesystem::path(g.out) / "stability.json", res.dump(2) + "\n");
  print(res);
  return 0;
}

// ---- bad-min --------------------------------------------------------------------------

// Region config as for stability (defaults: d=2, p=1, two masses 0.625, sigma=1,
// lambda=1, mu=1) plus "delta".
int cmd_bad_min(const Globals& g) {
  Json cfg = load(g);
  if (!cfg.contains("true_point")) cfg["true_point"] = {0.0, 0.0};
  if (!cfg.contains("generated_masses")) cfg["generated_masses"] = {0.625, 0.625};
  if (!cfg.contains("lambda")) cfg["lambda"] = 1.0;
  Json region = cfg;
  region.erase("delta");
  region.erase("seed");
  const RegionSystem sys = region_from_json(region);
  BadMinimumOptions opt;
  opt.delta = cfg.value("delta", 0.0);
  const auto rep = find_bad_minimum(sys, opt);
  Json res = to_json(rep);
  res["delta_excess"] = sys.delta();
  if (!g.out.empty()) write_text(std::filesystem::path(g.out) / "bad_min.json", res.dump(2) + "\n");
  print(res);
  return 0;
}

// ---- diverge ---------------------------------------------------------------------------

// {"x0", "direction", "kernel", "eta_d", "eta_g", "lambda", "steps"}
int cmd_diverge(const Globals& g) {
  const Json cfg = load(g);
  const Vector x0 = cfg.contains("x0") ? vector_from(cfg.at("x0"), "x0") : Vector::Zero(2);
  Vector u = Vector::Zero(x0.size());
  u(0) = 1.0;
  if (cfg.contains("direction")) u = vector_from(cfg.at("direction"), "direction");
  const auto spec = cfg.contains("kernel") ? kernel_from_json(cfg.at("kernel")) : KernelSpec::exact_rbf(1.0);
  TrainConfig tc;
  tc.eta_d = cfg.value("eta_d", 1e-3);
  tc.eta_g = cfg.value("eta_g", 1e-3);
  tc.lambda = cfg.value("lambda", 1e-3);
  tc.validate();
  const long steps = cfg.value("steps", 1000L);
  require(steps >= 0, "steps must be nonnegative");
  const auto w = make_witness(x0, u, spec, tc.eta_d, tc.eta_g, tc.lambda);
  const auto esc = verify_linear_escape(w, spec, tc, steps);
  Json res{{"witness", to_json(w)},
           {"escape",
            {{"steps", steps},
             {"max_deviation", esc.max_deviation},
             {"relative_deviation", steps > 0 ? esc.max_deviation / (static_cast<double>(steps) * w.v0) : 0.0},
             {"max_angle", esc.max_angle},
             {"monotone", esc.monotone}}}};
  if (!g.out.empty()) {
    const std::filesystem::path dir = g.out;
    ensure_writable_dir(dir);
    write_text(dir / "witness.json", res.dump(2) + "\n");
    std::ostringstream csv;
    csv << "step";
    for (Eigen::Index k = 0; k < x0.size(); ++k) csv << ",coord_" << k;
    csv << "\n";
    for (std::size_t k = 0; k < esc.trajectory.size(); ++k) {
      csv << k;
      for (Eigen::Index i = 0; i < x0.size(); ++i) csv << "," << fmt(esc.trajectory[k](i));
      csv << "\n";
    }
    write_text(dir / "escape_trajectory.csv", csv.str());
  }
  print(res);
  return 0;
}

// ---- sweep / concat ----------------------------------------------------------------------

int cmd_sweep(const Globals& g) {
  ExperimentConfig base;
  if (g.preset == "desk") base = ExperimentConfig::desk();
  else if (g.preset == "paper") base = ExperimentConfig::paper();
  else throw InputError("preset must be 'desk' or 'paper'");
  ExperimentConfig cfg = g.config.empty() ? base : experiment_from_json(load(g), base);
  if (g.seed) cfg.master_seed = *g.seed;
  if (g.diverge_threshold) cfg.diverge_threshold = *g.diverge_threshold;
  if (g.threads > 0) cfg.threads = g.threads;
  cfg.timing = cfg.timing || g.timing;
  cfg.validate();
  const std::filesystem::path dir = g.out.empty() ? "out/sweep" : g.out;
  ensure_writable_dir(dir);
  const auto r = run_sweep(cfg);
  emit_outputs(r, cfg, dir, g.heatmap);
  Json res = sweep_summary_json(r, cfg);
  res["output"] = dir.string();
  print(res);
  return 0;
}

// {"kernels": [...], "train": {...}}
int cmd_concat(const Globals& g) {
  const Json cfg = load(g);
  ConcatConfig cc;
  if (cfg.contains("kernels")) {
    cc.kernels.clear();
    for (const auto& k : cfg.at("kernels")) cc.kernels.push_back(kernel_from_json(k));
  }
  if (cfg.contains("train")) cc.train = train_config_from_json(cfg.at("train"), cc.train);
  cc.threads = g.threads;
  const std::filesystem::path dir = g.out.empty() ? "out/concat" : g.out;
  ensure_writable_dir(dir);
  const auto curves = run_concat_experiment(cc);
  emit_concat(curves, dir);
  Json res = Json::array();
  for (std::size_t k = 0; k < curves.size(); ++k)
    res.push_back({{"kernel_id", kernel_id(k)},
                   {"kernel", curves[k].spec.label()},
                   {"final_distance", curves[k].distance.empty() ? Json(nullptr) : num(curves[k].distance.back())},
                   {"error", curves[k].error}});
  print(res);
  return 0;
}

// ---- metrics -------------------------------------------------------------------------------

// {"true": dist, "generated": dist, "initial"?: dist, "kernel"?: spec}
int cmd_metrics(const Globals& g) {
  const Json cfg = load(g);
  if (!cfg.contains("true") || !cfg.contains("generated")) throw InputError("metrics needs 'true' and 'generated'");
  const auto pr = distribution_from_json(cfg.at("true")), pg = distribution_from_json(cfg.at("generated"));
  const double threshold = g.diverge_threshold.value_or(cfg.value("diverge_threshold", 2.0));
  Json res{{"wasserstein2", wasserstein2(pg, pr)}, {"divergence_fraction", divergence_fraction(pg, threshold)}};
  if (cfg.contains("kernel")) res["mmd_squared"] = mmd_squared(pr, pg, kernel_from_json(cfg.at("kernel")));
  if (cfg.contains("initial"))
    res["beta"] = normalized_wasserstein(pr, distribution_from_json(cfg.at("initial")), pg);
  if (!g.out.empty()) write_text(std::filesystem::path(g.out) / "metrics.json", res.dump(2) + "\n");
  print(res);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Isolated-points model of MMD GAN training dynamics"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  double threshold = 2.0;
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "master seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--preset", g.preset, "sweep preset")->check(CLI::IsMember({"desk", "paper"}));
  auto* thr_opt = app.add_option("--diverge-threshold", threshold, "norm beyond which a point counts as diverged")
                      ->check(CLI::PositiveNumber);
  app.add_flag("--timing", g.timing, "record wall time per trial (makes sweep.csv nondeterministic)");
  app.add_option("--threads", g.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("--heatmap", g.heatmap, "draw the final discriminator under trajectory plots");

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const Globals&);
  };
  const Sub subs[] = {{"simulate", "train one configuration and write its trace", cmd_simulate},
                      {"stability", "classify a region equilibrium or a support configuration", cmd_stability},
                      {"bad-min", "search for a stable equilibrium away from the true point", cmd_bad_min},
                      {"diverge", "construct a divergence witness and verify the linear escape", cmd_diverge},
                      {"sweep", "kernel-width sweep over random trials", cmd_sweep},
                      {"concat", "fixed widths against a multi-scale kernel on a point pair", cmd_concat},
                      {"metrics", "distances between two point sets", cmd_metrics}};
  for (const auto& s : subs) app.add_subcommand(s.name, s.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (*seed_opt) g.seed = seed;
  if (*thr_opt) g.diverge_threshold = threshold;
  try {
    for (const auto& s : subs)
      if (app.got_subcommand(s.name)) return s.run(g);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
