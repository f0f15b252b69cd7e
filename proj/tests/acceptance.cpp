// Acceptance run: one PASS/FAIL line per criterion, followed by indented notes.
// Exit status is the number of failed criteria.
#include "ipm/ipm.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace ipm;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    notes.push_back(std::string(ok ? "ok   " : "MISS ") + what);
    pass = pass && ok;
  }
  void note(const std::string& what) { notes.push_back("     " + what); }
};

std::string f(const char* fmt, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c);
  return buf;
}

RegionSystem region(int d, double p, std::vector<double> q, double sigma, double lambda, double mu = 1.0) {
  RegionSystem s;
  s.x_true = Vector::Zero(d);
  s.p_true = p;
  s.p_gen = Eigen::Map<const Vector>(q.data(), static_cast<Eigen::Index>(q.size()));
  s.spec = KernelSpec::exact_rbf(sigma);
  s.lambda = lambda;
  s.mu = mu;
  return s;
}

// distinct directions for each generated point
Matrix spread_perturbation(int d, int n, double size) {
  Matrix p = Matrix::Zero(d, n);
  for (int j = 0; j < n; ++j) {
    p(0, j) = size * std::cos(1.0 + 2.1 * j);
    if (d > 1) p(1, j) = size * std::sin(1.0 + 2.1 * j);
  }
  return p;
}

// largest real part among roots with |imag| <= tol, zero roots included
double literal_max_real_root(const StabilityReport& r) {
  double m = -INFINITY;
  for (const auto& s : r.eigenvalues)
    if (std::abs(s.imag()) <= r.tolerance) m = std::max(m, s.real());
  return m;
}

// ---- 1 ----------------------------------------------------------------------------------
Outcome c1() {
  Outcome o;
  const auto s = region(2, 0.5, {0.2, 0.2}, 1.0, 0.01);
  const auto a = classify_analytic(s);
  o.check(a.verdict == Verdict::stable, "classify_analytic = " + to_string(a.verdict) + " (" + a.condition + ")");
  const auto n = classify_numeric(s, at_true_point(s));
  o.check(n.max_real_root < 0.0, f("psi max real root %.6g < 0", n.max_real_root));
  const Matrix pert = spread_perturbation(2, 2, 0.1);
  const auto sim = simulate_region(s, at_true_point(s), pert, 1e-3, 200000, 1000);
  const double start = pert.colwise().norm().maxCoeff();
  long hit = -1;
  for (std::size_t i = 0; i < sim.deviation.size(); ++i)
    if (sim.deviation[i] <= start / 10) {
      hit = sim.trace.snapshots[i].step;
      break;
    }
  o.check(hit >= 0, hit >= 0 ? f("distance 0.1 -> <= 0.01 by step %.0f", static_cast<double>(hit))
                             : f("final distance %.4g (start %.4g)", sim.deviation.back(), start));
  return o;
}

// ---- 2 ----------------------------------------------------------------------------------
Outcome c2() {
  Outcome o;
  const auto s = region(2, 0.25, {0.125, 0.125, 0.125, 0.125}, 1.0, 0.01);
  const auto n = classify_numeric(s, at_true_point(s));
  o.check(n.max_real_root > n.tolerance, f("largest real psi root %.6g > 0", n.max_real_root));
  // growing budgets up to 2e5 steps; stop at the first that leaves the ball
  long exit_step = -1;
  for (long budget : {2000L, 10000L, 50000L, 200000L}) {
    if (exit_step >= 0) break;
    const auto sim = simulate_region(s, at_true_point(s), spread_perturbation(2, 4, 1e-3), 1e-3, budget, 100);
    for (std::size_t i = 0; i < sim.deviation.size(); ++i)
      if (sim.deviation[i] > 0.05) {
        exit_step = sim.trace.snapshots[i].step;
        break;
      }
  }
  o.check(exit_step >= 0, exit_step >= 0 ? f("left the 0.05 sigma ball at step %.0f", static_cast<double>(exit_step))
                                         : "never left the 0.05 sigma ball in 2e5 steps");
  return o;
}

// ---- 3 ----------------------------------------------------------------------------------
Outcome c3() {
  Outcome o;
  const auto reg = region(2, 1.0, {1.0}, 1.0, 0.01);
  const auto a = classify_analytic(reg);
  o.check(a.verdict == Verdict::stable, "lambda=0.01: " + to_string(a.verdict) + " (" + a.condition + ")");
  const auto dirac = region(2, 1.0, {1.0}, 1.0, 0.0);
  const auto b = classify_analytic(dirac);
  o.check(b.condition == "boundary", "lambda=0: analytic condition " + b.condition);
  const auto n = classify_numeric(dirac, at_true_point(dirac));
  double worst = 0.0;
  for (const auto& s : n.eigenvalues) worst = std::max(worst, std::abs(s.real()));
  o.check(worst < 1e-9, f("max |Re s| = %.3g over %.0f roots", worst, static_cast<double>(n.eigenvalues.size())));
  // |x - x*| alone swings to zero twice per cycle as the energy moves into the
  // discriminator, so amplitude = max over one full period at each end.
  double omega = 0.0;
  for (const auto& s : n.eigenvalues) omega = std::max(omega, std::abs(s.imag()));
  const double eta = 1e-3;
  const long steps = 10000, period = static_cast<long>(std::ceil(2 * std::numbers::pi / (omega * eta)));
  auto amplitude_change = [&](double size, double& first, double& last) {
    const auto sim = simulate_region(dirac, at_true_point(dirac), spread_perturbation(2, 1, size), eta, steps, 1);
    const auto w = std::min<std::size_t>(static_cast<std::size_t>(period) + 1, sim.deviation.size());
    first = *std::max_element(sim.deviation.begin(), sim.deviation.begin() + static_cast<long>(w));
    last = *std::max_element(sim.deviation.end() - static_cast<long>(w), sim.deviation.end());
    return std::abs(last - first) / first;
  };
  o.note(f("period %.0f steps, %.2f periods simulated", static_cast<double>(period), static_cast<double>(steps) / period));
  double first = 0, last = 0;
  // linear regime, same perturbation size as the instability probe
  const double change = amplitude_change(1e-3, first, last);
  o.check(change < 0.05, f("1e-3 sigma perturbation: amplitude %.6g -> %.6g (change %.3g%%)", first, last, 100 * change));
  // larger kicks decay through a nonlinear term (change ~ amplitude^2)
  for (double size : {0.03, 0.1}) {
    const double c = amplitude_change(size, first, last);
    o.note(f("%.2g sigma perturbation: amplitude change %.3g%%", size, 100 * c));
  }
  return o;
}

// ---- 4 ----------------------------------------------------------------------------------
Outcome c4() {
  Outcome o;
  Matrix x(2, 4);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  const auto pr = DiscreteDistribution::uniform(x);
  const auto spec = KernelSpec::exact_rbf(0.1);
  int perfect = 0, perfect_ok = 0, collapse = 0, collapse_ok = 0;
  std::vector<int> a(4);
  for (int code = 0; code < 256; ++code) {
    for (int j = 0; j < 4; ++j) a[j] = (code >> (2 * j)) & 3;
    std::vector<int> counts(4, 0);
    for (int v : a) ++counts[v];
    std::sort(counts.begin(), counts.end());
    Matrix y(2, 4);
    for (int j = 0; j < 4; ++j) y.col(j) = x.col(a[j]);
    const auto v = check_corollary_support(pr, DiscreteDistribution::uniform(y), spec);
    if (counts == std::vector<int>{1, 1, 1, 1}) {
      ++perfect;
      perfect_ok += v.verdict == Verdict::stable;
    } else if (counts == std::vector<int>{0, 1, 1, 2}) {
      ++collapse;
      collapse_ok += v.verdict == Verdict::unstable;
    }
  }
  o.check(perfect_ok == perfect, f("perfect matchings stable: %.0f/%.0f", perfect_ok, perfect));
  o.check(collapse_ok == collapse, f("2-on-1 assignments unstable: %.0f/%.0f", collapse_ok, collapse));
  return o;
}

// ---- 5 ----------------------------------------------------------------------------------
Outcome c5() {
  Outcome o;
  // Regularization 1: at lambda = 0.01 the ring minimum is a saddle of the joint dynamics.
  auto s = region(2, 0.25, {0.25, 0.25}, 1.0, 1.0);
  const auto r1 = find_bad_minimum(s);
  bool finite = true;
  for (double d : r1.distances) finite = finite && std::isfinite(d) && d > 0.0;
  o.check(finite, f("distances %.9g, %.9g sigma", r1.distances[0], r1.distances[1]));
  const double literal = literal_max_real_root(r1);
  o.check(literal < -r1.tolerance,
          f("all real psi-roots < -tol (largest real root %.3g, tol %.3g)", literal, r1.tolerance));
  o.note(f("rotation-reduced spectrum: %.0f symmetry zero root(s) removed, abscissa %.6g -> ",
           r1.symmetry_modes, r1.max_real_part) +
         to_string(r1.verdict));
  auto half = s;
  half.spec = KernelSpec::exact_rbf(0.5);
  const auto r2 = find_bad_minimum(half);
  double worst = 0.0;
  for (int j = 0; j < s.count(); ++j) {
    const double d1 = r1.equilibrium.col(j).norm(), d2 = r2.equilibrium.col(j).norm();
    worst = std::max(worst, std::abs(d2 - 0.5 * d1) / (0.5 * d1));
  }
  o.check(worst < 1e-6, f("sigma=0.5 distances are half, worst relative error %.3g", worst));
  return o;
}

// ---- 6 ----------------------------------------------------------------------------------
Outcome c6() {
  Outcome o;
  Vector x0(2), u(2);
  x0 << 0.5, 0.5;
  u << 1, 1;
  const double eta = 1e-3, lambda = 1e-3;
  const auto spec = KernelSpec::exact_rbf(1.0);
  const auto w = make_witness(x0, u, spec, eta, eta, lambda);
  o.check(std::abs(w.residual) < 1e-12, f("|F(v0)| = %.3g (v0 = %.12g)", std::abs(w.residual), w.v0));
  TrainConfig cfg;
  cfg.eta_d = cfg.eta_g = eta;
  cfg.lambda = lambda;
  const auto esc = verify_linear_escape(w, spec, cfg, 1000);
  o.check(esc.max_deviation < 1e-8 * 1000 * w.v0,
          f("escape deviation %.3g < %.3g", esc.max_deviation, 1e-8 * 1000 * w.v0));
  const auto f0 = build_divergent_discriminator(w, spec, eta);
  const Vector g = f0.grad(w.x0);
  const Vector stated = (w.eta_d / w.eta_g) * w.v0 * w.u;
  const double err = (g - stated).norm();
  o.check(err < 1e-10, f("grad f0(x0) = (eta_d/eta_g) v0 u: |diff| = %.6g (|grad| = %.6g)", err, g.norm()));
  const Vector corrected = w.v0 / (w.rho * w.eta_g) * w.u;
  o.note(f("grad f0(x0) = v0 u / (rho eta_g): relative diff %.3g", (g - corrected).norm() / corrected.norm()));
  auto f1 = f0;
  f1.decay(w.rho);
  f1.add_generated(-eta, w.x0.data(), -1);
  const Vector c1v = w.v0 / w.eta_g * w.u;
  o.note(f("grad f1(x0) = v0 u / eta_g (the gradient the generator step uses): relative diff %.3g",
           (f1.grad(w.x0) - c1v).norm() / c1v.norm()));
  return o;
}

// ---- 7 ----------------------------------------------------------------------------------
Outcome c7() {
  Outcome o;
  RandomStream rs(2718);
  int compared = 0, agree = 0;
  while (compared < 50) {
    const int n = 1 + static_cast<int>(rs.uniform() * 3);
    std::vector<double> q(n);
    for (auto& v : q) v = 0.05 + 0.3 * rs.uniform();
    const double p = 0.05 + 0.8 * rs.uniform();
    const double sigma = 0.3 + 2 * rs.uniform();
    auto s = region(1 + static_cast<int>(rs.uniform() * 3), p, q, sigma, 0.005 + 0.3 * rs.uniform(),
                    0.2 + 2 * rs.uniform());
    if (rs.uniform() < 0.3) s.spec = KernelSpec::multiscale({sigma, 2 * sigma});
    const auto a = classify_analytic(s);
    if (a.verdict == Verdict::indeterminate) continue;
    ++compared;
    agree += classify_numeric(s, at_true_point(s)).verdict == a.verdict;
  }
  o.check(agree == 50, f("agreement %.0f/%.0f", agree, compared));
  return o;
}

// ---- 8 ----------------------------------------------------------------------------------
Outcome c8() {
  Outcome o;
  RandomStream rs(11);
  const std::vector<KernelSpec> specs = {KernelSpec::exact_rbf(1.0), KernelSpec::multiscale({0.5, 2.0}),
                                         KernelSpec::rff(1.0, 256, 3)};
  for (const auto& spec : specs) {
    const Kernel k(spec, 3);
    double g_rel = 0.0, h_abs = 0.0;
    for (int t = 0; t < 50; ++t) {
      Vector x(3), y(3);
      for (int i = 0; i < 3; ++i) {
        x(i) = rs.normal();
        y(i) = x(i) + 0.8 * rs.normal();
      }
      const double h1 = 1e-5, h2 = 1e-4;
      Vector fd(3);
      Matrix hxx(3, 3), hxy(3, 3);
      for (int i = 0; i < 3; ++i) {
        Vector xp = x, xm = x;
        xp(i) += h1;
        xm(i) -= h1;
        fd(i) = (k.eval(xp, y) - k.eval(xm, y)) / (2 * h1);
        for (int j = 0; j < 3; ++j) {
          auto kx = [&](double a, double b) {
            Vector z = x;
            z(i) += a;
            z(j) += b;
            return k.eval(z, y);
          };
          auto kxy = [&](double a, double b) {
            Vector z = x, v = y;
            z(i) += a;
            v(j) += b;
            return k.eval(z, v);
          };
          hxx(i, j) = (kx(h2, h2) - kx(h2, -h2) - kx(-h2, h2) + kx(-h2, -h2)) / (4 * h2 * h2);
          hxy(i, j) = (kxy(h2, h2) - kxy(h2, -h2) - kxy(-h2, h2) + kxy(-h2, -h2)) / (4 * h2 * h2);
        }
      }
      const Vector g = k.grad_x(x, y);
      g_rel = std::max(g_rel, (g - fd).norm() / std::max(g.norm(), 1e-300));
      h_abs = std::max(h_abs, (k.hess_xx(x, y) - hxx).cwiseAbs().maxCoeff());
      h_abs = std::max(h_abs, (k.cross_hess(x, y) - hxy).cwiseAbs().maxCoeff());
    }
    o.check(g_rel < 1e-6 && h_abs < 1e-4,
            spec.label() + f(": gradient rel err %.3g, second-derivative abs err %.3g", g_rel, h_abs));
  }
  return o;
}

// ---- 9 ----------------------------------------------------------------------------------
Outcome c9() {
  Outcome o;
  const Kernel k(KernelSpec::rff(1.0, 1000, 42), 2);
  const Kernel exact(KernelSpec::exact_rbf(1.0), 2);
  RandomStream rs(77);
  double worst = 0.0;
  int done = 0;
  while (done < 100) {
    Vector x(2), y(2);
    x << 2 * rs.normal(), 2 * rs.normal();
    y << 2 * rs.normal(), 2 * rs.normal();
    if ((x - y).norm() > 3) continue;
    worst = std::max(worst, std::abs(k.eval(x, y) - exact.eval(x, y)));
    ++done;
  }
  o.check(worst < 0.1, f("max |K_rff - K| = %.4g over 100 pairs", worst));
  return o;
}

// ---- 10 ---------------------------------------------------------------------------------
DiscreteDistribution random_dist(RandomStream& rs, int n, bool uniform) {
  Matrix x(2, n);
  Vector w(n);
  for (int j = 0; j < n; ++j) {
    x(0, j) = rs.normal();
    x(1, j) = rs.normal();
    w(j) = uniform ? 1.0 : 0.2 + rs.uniform();
  }
  return DiscreteDistribution(x, w);
}

Outcome c10() {
  Outcome o;
  RandomStream rs(2024);
  double worst = 0.0;
  for (int n = 1; n <= 5; ++n)
    for (int draw = 0; draw < 20; ++draw) {
      const auto p = random_dist(rs, n, true), q = random_dist(rs, n, true);
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      double best = INFINITY;
      do {
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += (p.point(i) - q.point(perm[i])).squaredNorm() / n;
        best = std::min(best, c);
      } while (std::next_permutation(perm.begin(), perm.end()));
      worst = std::max(worst, std::abs(wasserstein2(p, q) - std::sqrt(best)));
    }
  o.check(worst < 1e-9, f("brute force, n <= 5 x 20 draws: max diff %.3g", worst));
  int ok = 0;
  for (int t = 0; t < 50; ++t) {
    const auto a = random_dist(rs, 3 + t % 3, false), b = random_dist(rs, 4, false), c = random_dist(rs, 2 + t % 4, true);
    const double ab = wasserstein2(a, b), ba = wasserstein2(b, a), bc = wasserstein2(b, c), ac = wasserstein2(a, c);
    ok += std::abs(ab - ba) < 1e-10 && ac <= ab + bc + 1e-10 && wasserstein2(a, a) < 1e-7 && ab > 0;
  }
  o.check(ok == 50, f("metric axioms on %.0f/50 random triples", ok));
  return o;
}

// ---- 11 ---------------------------------------------------------------------------------
Outcome c11() {
  Outcome o;
  const auto spec = KernelSpec::exact_rbf(1.0);
  const double lambda = 0.1;
  for (double r : {0.5, 1.0, 2.0}) {
    Vector x0 = Vector::Zero(2), xg = Vector::Zero(2);
    xg(0) = r;
    const auto pr = DiscreteDistribution::uniform(x0), pg = DiscreteDistribution::uniform(xg);
    TrainConfig c;
    c.eta_d = 1.0;
    c.lambda = lambda;
    auto s = initial_discriminator(spec, 2, c);
    for (int k = 0; k < 400; ++k) discriminator_step_inplace(s, pr, pg, c);
    const double loss = generator_loss(s, pg), ref = (1 / lambda) * (1 - std::exp(-r * r / 2));
    o.check(std::abs(loss - ref) < 1e-4, f("r=%.1f: loss %.10g vs %.10g", r, loss, ref));
  }
  return o;
}

// ---- 12 / 14 ----------------------------------------------------------------------------
SweepResult desk_sweep(int threads) {
  auto cfg = ExperimentConfig::desk();
  cfg.threads = threads;
  return run_sweep(cfg);
}

std::string g_desk_csv;

Outcome c12() {
  Outcome o;
  const auto r = desk_sweep(0);
  g_desk_csv = sweep_csv(r, false);
  for (const auto& s : r.summary)
    o.note(s.label + f(": median beta %.4g, mean divergence fraction %.4g, failed trials %.0f", s.median_beta,
                       s.mean_divergence_fraction, s.failed));
  const auto& a = r.summary[0];
  const auto& b = r.summary[1];
  const auto& c = r.summary[2];
  o.check(a.mean_divergence_fraction > b.mean_divergence_fraction,
          f("divergence fraction sigma=0.05 (%.4g) > sigma=0.5 (%.4g)", a.mean_divergence_fraction,
            b.mean_divergence_fraction));
  o.check(b.median_beta < std::min(a.median_beta, c.median_beta),
          f("median beta sigma=0.5 (%.4g) < min(sigma=0.05, sigma=5) (%.4g)", b.median_beta,
            std::min(a.median_beta, c.median_beta)));
  o.note(f("master seed %.0f; at 20 trials the outcome depends on the seed (README lists other seeds)",
           static_cast<double>(ExperimentConfig::desk().master_seed)));
  return o;
}

Outcome c14() {
  Outcome o;
  if (g_desk_csv.empty()) g_desk_csv = sweep_csv(desk_sweep(0), false);
  const auto one = sweep_csv(desk_sweep(1), false);
  o.check(one == g_desk_csv, f("sweep.csv identical with 1 thread vs all cores (%.0f bytes)",
                               static_cast<double>(one.size())));
  return o;
}

// ---- 13 ---------------------------------------------------------------------------------
Outcome c13() {
  Outcome o;
  const auto curves = run_concat_experiment(ConcatConfig{});
  for (const auto& c : curves) {
    o.note(c.spec.label() + f(": distance %.4g -> %.4g", c.distance.front(), c.distance.back()) +
           (c.error.empty() ? "" : " error: " + c.error));
    if (!c.error.empty()) o.pass = false;
  }
  const double s01 = curves[0].distance.back(), s10 = curves[2].distance.back(), multi = curves[3].distance.back();
  o.check(multi < s10, f("multiscale final %.4g < sigma=10 final %.4g", multi, s10));
  o.check(s01 > 1.0, f("sigma=0.1 does not converge (final %.4g > 1)", s01));
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double budget_s;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "positive excess mass is stable", 10, c1},
      {2, "negative excess mass with several points is unstable", 10, c2},
      {3, "single point: regularized stable, unregularized boundary", 0, c3},
      {4, "support matching vs collapse onto one true point", 0, c4},
      {5, "stable equilibrium away from the true point", 5, c5},
      {6, "divergence witness", 5, c6},
      {7, "analytic and numeric classifiers agree", 0, c7},
      {8, "kernel derivatives vs finite differences", 0, c8},
      {9, "random-feature kernel fidelity", 0, c9},
      {10, "exact optimal transport", 0, c10},
      {11, "converged discriminator loss identity", 0, c11},
      {12, "kernel-width sweep trends (desk scale)", 900, c12},
      {13, "multi-scale kernel vs fixed widths", 0, c13},
      {14, "sweep determinism across thread counts", 0, c14},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("EXCEPTION ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.notes.push_back(f("MISS runtime %.1f s over budget %.0f s", secs, c.budget_s));
    }
    std::printf("[%s] criterion %2d: %s (%.2f s%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, secs,
                c.budget_s > 0 ? f(", budget %.0f s", c.budget_s).c_str() : "");
    for (const auto& n : o.notes) std::printf("        %s\n", n.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
