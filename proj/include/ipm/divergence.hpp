#pragma once

#include "ipm/core.hpp"
#include "ipm/discriminator.hpp"
#include "ipm/dynamics.hpp"
#include "ipm/kernels.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace ipm {

// phi(r) = sum_s exp(-r^2 / 2 sigma_s^2) for a translation-invariant Gaussian kernel.
class RadialProfile {
 public:
  explicit RadialProfile(const KernelSpec& spec) {
    spec.validate();
    if (!spec.is_exact()) throw InputError("divergence construction needs a translation-invariant exact kernel");
    widths_ = spec.exact_widths();
  }

  double phi(double r) const {
    double s = 0.0;
    for (double w : widths_) s += std::exp(-r * r / (2 * w * w));
    return s;
  }
  double dphi(double r) const {
    double s = 0.0;
    for (double w : widths_) s -= r / (w * w) * std::exp(-r * r / (2 * w * w));
    return s;
  }
  // sup_r |phi'(r)| <= sum_s e^{-1/2} / sigma_s
  double dphi_bound() const {
    double s = 0.0;
    for (double w : widths_) s += std::exp(-0.5) / w;
    return s;
  }
  double max_width() const { return widths_.back(); }

  // Bound on sum_{j >= J} rho^j (phi(jv) + |phi'(jv)|), valid for J v >= max width
  // (terms decreasing there, so the sum is below first term + integral).
  double tail_bound(long J, double v, double rho) const {
    const double r = static_cast<double>(J) * v;
    double gauss = std::numeric_limits<double>::infinity();
    if (r >= max_width()) {
      gauss = 0.0;
      for (double w : widths_) {
        const double e = std::exp(-r * r / (2 * w * w));
        // integral of e^{-t^2/2w^2} from r is <= (w^2/r) e; of (t/w^2)e^{..} is e
        gauss += e * (1.0 + r / (w * w)) + (e * w * w / r + e) / v;
      }
    }
    double geo = std::numeric_limits<double>::infinity();
    if (rho < 1.0)
      geo = std::pow(rho, static_cast<double>(J)) / (1.0 - rho) * (static_cast<double>(widths_.size()) + dphi_bound());
    return std::min(gauss, geo);
  }

  // Smallest J with tail_bound(J) < tol, or -1 when more than max_terms are needed.
  long truncation(double v, double rho, double tol, long max_terms) const {
    long lo = 1, hi = 1;
    while (!(tail_bound(hi, v, rho) < tol)) {
      if (hi > max_terms) return -1;
      lo = hi;
      hi *= 2;
    }
    while (lo < hi) {  // tail_bound is nonincreasing once J v >= max width
      const long mid = lo + (hi - lo) / 2;
      if (tail_bound(mid, v, rho) < tol) hi = mid;
      else lo = mid + 1;
    }
    return hi;
  }

 private:
  std::vector<double> widths_;
};

struct DivergenceOptions {
  double tail_tol = 1e-15;
  long max_terms = 4'000'000;  // per series evaluation; bounds the low end of the scan
  int scan_min = -30, scan_max = 10;  // v = sigma * 2^m
  double residual_tol = 1e-12;
};

struct DivergenceWitness {
  Vector x0;
  Vector u;
  double v0 = 0.0;
  double rho = 1.0;
  double eta_d = 0.0, eta_g = 0.0;
  long j_max = 0;
  double tail_bound = 0.0;
  double residual = 0.0;
  int sign_changes = 0;   // in the scanned range
  int scan_floor = 0;     // lowest m actually evaluated
};

// F(v, rho) = v + eta_g eta_d sum_{j=0}^{J-1} rho^j phi'(j v)   (j = 0 term vanishes)
inline double velocity_series(const RadialProfile& prof, double v, double rho, long J) {
  double s = 0.0, rj = 1.0;
  for (long j = 1; j < J; ++j) {
    if ((j & 1023) == 0) rj = std::pow(rho, static_cast<double>(j));
    else rj *= rho;
    s += rj * prof.dphi(static_cast<double>(j) * v);
  }
  return s;
}

inline double velocity_residual(double v, double rho, const KernelSpec& spec, double eta_g, double eta_d,
                                const DivergenceOptions& opt = {}) {
  require(v > 0.0 && std::isfinite(v), "velocity must be positive");
  require(rho > 0.0 && rho <= 1.0, "rho must lie in (0, 1]");
  const RadialProfile prof(spec);
  const long J = prof.truncation(v, rho, opt.tail_tol, opt.max_terms);
  if (J < 0) throw NumericError("velocity series needs more than max_terms terms at this velocity");
  return v + eta_g * eta_d * velocity_series(prof, v, rho, J);
}

inline double solve_velocity(double rho, const KernelSpec& spec, double eta_g, double eta_d,
                             const DivergenceOptions& opt = {}, DivergenceWitness* diag = nullptr) {
  require(rho > 0.0 && rho <= 1.0, "rho must lie in (0, 1]");
  require(eta_g > 0.0 && eta_d > 0.0, "step sizes must be positive");
  const RadialProfile prof(spec);
  const double sigma = spec.exact_widths().front();
  auto F = [&](double v, long J) { return v + eta_g * eta_d * velocity_series(prof, v, rho, J); };

  // scan downward from the large-v end (F > 0 there); stop where the series gets too long
  struct Sample {
    double v, f;
    long J;
  };
  std::vector<Sample> scan;
  int floor_m = opt.scan_max;
  for (int m = opt.scan_max; m >= opt.scan_min; --m) {
    const double v = sigma * std::ldexp(1.0, m);
    const long J = prof.truncation(v, rho, opt.tail_tol, opt.max_terms);
    if (J < 0) break;
    scan.push_back({v, F(v, J), J});
    floor_m = m;
  }
  int changes = 0;
  std::size_t lowest = scan.size();
  for (std::size_t i = 1; i < scan.size(); ++i)
    if ((scan[i].f < 0.0) != (scan[i - 1].f < 0.0)) {
      ++changes;
      if (scan[i].f < 0.0 && scan[i - 1].f > 0.0) lowest = i;  // keep the smallest-v bracket
    }
  if (lowest == scan.size()) throw InputError("no divergence velocity for these parameters");

  double lo = scan[lowest].v, hi = scan[lowest - 1].v;
  const long J = scan[lowest].J;  // enough terms for every v in the bracket
  double v = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(lo < mid && mid < hi)) break;  // bracket exhausted
    v = mid;
    const double f = F(v, J);
    if (f == 0.0) break;  // run to full precision; the tolerance is checked below
    if (f < 0.0) lo = v;
    else hi = v;
  }
  const double residual = F(v, J);
  if (!(std::abs(residual) < opt.residual_tol * std::max(1.0, v)))
    throw NumericError("velocity bisection stalled with residual " + std::to_string(residual));
  if (diag) {
    diag->v0 = v;
    diag->rho = rho;
    diag->residual = residual;
    diag->sign_changes = changes;
    diag->scan_floor = floor_m;
  }
  return v;
}

inline DivergenceWitness make_witness(const Vector& x0, const Vector& direction, const KernelSpec& spec,
                                      double eta_d, double eta_g, double lambda, const DivergenceOptions& opt = {}) {
  require(x0.size() == direction.size() && x0.size() >= 1, "witness: dimension mismatch");
  require(direction.norm() > 0.0, "witness: direction must be nonzero");
  require(lambda >= 0.0 && eta_d * lambda < 1.0, "witness: need 0 <= eta_d * lambda < 1");
  DivergenceWitness w;
  w.x0 = x0;
  w.u = direction.normalized();
  w.eta_d = eta_d;
  w.eta_g = eta_g;
  solve_velocity(1.0 - eta_d * lambda, spec, eta_g, eta_d, opt, &w);
  const RadialProfile prof(spec);
  w.j_max = prof.truncation(w.v0, w.rho, opt.tail_tol, opt.max_terms);
  w.tail_bound = prof.tail_bound(w.j_max, w.v0, w.rho);
  return w;
}

// f^0(x) = -eta_d sum_{j=0}^{j_max} rho^j phi(|x - x0 + (1 + j) v0 u|). Oldest
// entry first, so the history order matches a simulated trail.
inline DiscriminatorState build_divergent_discriminator(const DivergenceWitness& w, const KernelSpec& spec,
                                                        double eta_d) {
  require(w.j_max >= 1, "witness has no truncation index");
  HistoryOptions opts;
  opts.prune_tol = 0.0;
  opts.compress_after = 0;  // exact trail
  auto s = DiscriminatorState::history(std::make_shared<const Kernel>(spec, static_cast<int>(w.x0.size())), opts);
  for (long j = w.j_max; j >= 0; --j) {
    const Vector c = w.x0 - static_cast<double>(1 + j) * w.v0 * w.u;
    s.add_generated(-eta_d * std::pow(w.rho, static_cast<double>(j)), c.data(), -1);
  }
  return s;
}

// Closed-form f^k at x, truncated at the witness's j_max.
inline double divergent_discriminator_value(const DivergenceWitness& w, const KernelSpec& spec, double eta_d, long k,
                                            const Vector& x) {
  const RadialProfile prof(spec);
  double s = 0.0;
  for (long j = 0; j <= w.j_max; ++j)
    s += std::pow(w.rho, static_cast<double>(j)) *
         prof.phi((x - w.x0 - static_cast<double>(k - 1 - j) * w.v0 * w.u).norm());
  return -eta_d * s;
}

struct EscapeResult {
  double max_deviation = 0.0;  // max_k |x^k - (x0 + k v0 u)|
  double max_angle = 0.0;      // largest angle between a step and u
  bool monotone = true;        // every step a positive multiple of u (within tolerance)
  std::vector<Vector> trajectory;
};

// Runs the isolated single generated point (unit mass, no true point) from the
// witness state and compares with the linear trajectory.
inline EscapeResult verify_linear_escape(const DivergenceWitness& w, const KernelSpec& spec, const TrainConfig& cfg,
                                         long steps, double velocity_override = 0.0) {
  cfg.validate();
  require(std::abs(cfg.decay() - w.rho) <= 1e-15, "verify_linear_escape: config decay differs from the witness");
  const double v_used = velocity_override > 0.0 ? velocity_override : w.v0;
  DivergenceWitness wv = w;
  wv.v0 = v_used;
  DiscriminatorState s = build_divergent_discriminator(wv, spec, cfg.eta_d);
  EscapeResult out;
  Vector x = w.x0;
  out.trajectory.push_back(x);
  for (long k = 0; k < steps; ++k) {
    Vector g;
    if (cfg.order == UpdateOrder::simultaneous) g = s.grad(x);
    s.decay(cfg.decay());
    s.add_generated(-cfg.eta_d, x.data(), -1);
    if (cfg.order == UpdateOrder::sequential) g = s.grad(x);
    const Vector step = cfg.eta_g * g;
    if (!all_finite(step)) throw NumericError("non-finite step in escape verification");
    const double along = step.dot(w.u);
    const double perp = (step - along * w.u).norm();
    const double angle = std::atan2(perp, along);
    out.max_angle = std::max(out.max_angle, std::abs(angle));
    if (!(along > 0.0) || std::abs(angle) > 1e-10) out.monotone = false;
    x += step;
    out.trajectory.push_back(x);
    out.max_deviation = std::max(out.max_deviation, (x - (w.x0 + static_cast<double>(k + 1) * w.v0 * w.u)).norm());
  }
  return out;
}

}  // namespace ipm
