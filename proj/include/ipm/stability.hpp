#pragma once

#include "ipm/core.hpp"
#include "ipm/discriminator.hpp"
#include "ipm/dynamics.hpp"
#include "ipm/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace ipm {

using Complex = std::complex<double>;

// One isolated region: a true point and the generated points assigned to it.
struct RegionSystem {
  Vector x_true;
  double p_true = 1.0;
  Vector p_gen;  // masses of the region's generated points
  KernelSpec spec = KernelSpec::exact_rbf(1.0);
  double lambda = 0.01;
  double mu = 1.0;

  int dim() const { return static_cast<int>(x_true.size()); }
  int count() const { return static_cast<int>(p_gen.size()); }
  double delta() const { return p_true - p_gen.sum(); }

  void validate() const {
    require(x_true.size() >= 1, "region: empty true point");
    require(p_true > 0.0, "region: true mass must be positive");
    require(p_gen.size() >= 1, "region: needs at least one generated point");
    require((p_gen.array() > 0.0).all(), "region: generated masses must be positive");
    require(lambda >= 0.0 && std::isfinite(lambda), "region: lambda must be nonnegative");
    require(mu > 0.0 && std::isfinite(mu), "region: mu must be positive");
    spec.validate();
  }
  void require_exact() const {
    if (!spec.is_exact()) throw InputError("stability analysis needs an exact_rbf or multiscale kernel");
  }
  void check_points(const Matrix& x) const {
    require(x.rows() == dim() && x.cols() == count(), "region: generated point matrix has the wrong shape");
  }
};

// All generated points placed at the true point.
inline Matrix at_true_point(const RegionSystem& sys) {
  return sys.x_true.replicate(1, sys.count());
}

enum class Verdict { stable, unstable, indeterminate };
inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::stable: return "stable";
    case Verdict::unstable: return "unstable";
    case Verdict::indeterminate: return "indeterminate";
  }
  return "?";
}

struct StabilityReport {
  Matrix equilibrium;  // d x N
  std::vector<Complex> eigenvalues;
  Verdict verdict = Verdict::indeterminate;
  std::string condition;  // thm1a..thm1d, boundary, numeric-only
  double max_real_root = -std::numeric_limits<double>::infinity();  // over real roots only
  double max_real_part = -std::numeric_limits<double>::infinity();  // spectral abscissa
  double tolerance = 0.0;
  int symmetry_modes = 0;
  std::vector<double> distances;  // |x_j - x_true| / sigma_ref
  double grad_norm = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

// ---- restricted MMD -----------------------------------------------------------

inline double restricted_mmd(const RegionSystem& sys, const Matrix& x) {
  sys.validate();
  sys.check_points(x);
  const Kernel k(sys.spec, sys.dim());
  double j = 0.5 * sys.p_true * sys.p_true * k.eval(sys.x_true, sys.x_true);
  for (int a = 0; a < sys.count(); ++a) {
    j -= sys.p_true * sys.p_gen(a) * k.eval(sys.x_true, x.col(a));
    for (int b = 0; b < sys.count(); ++b) j += 0.5 * sys.p_gen(a) * sys.p_gen(b) * k.eval(x.col(a), x.col(b));
  }
  return j;
}

inline Matrix restricted_mmd_grad(const RegionSystem& sys, const Matrix& x) {
  sys.validate();
  sys.check_points(x);
  const Kernel k(sys.spec, sys.dim());
  Matrix g(sys.dim(), sys.count());
  for (int a = 0; a < sys.count(); ++a) {
    Vector ga = -sys.p_true * k.grad_x(x.col(a), sys.x_true);
    for (int b = 0; b < sys.count(); ++b) ga += sys.p_gen(b) * k.grad_x(x.col(a), x.col(b));
    g.col(a) = sys.p_gen(a) * ga;
  }
  return g;
}

// ---- equilibrium discriminator ---------------------------------------------------

// f* = (1/lambda) [p K(., x_true) - sum_j q_j K(., x_j)], as a history whose
// generated entries occupy slots 0..N-1 (so a further step merges into them).
inline DiscriminatorState equilibrium_discriminator(const RegionSystem& sys, const Matrix& x) {
  sys.validate();
  sys.check_points(x);
  if (!(sys.lambda > 0.0)) throw InputError("no finite equilibrium discriminator for lambda = 0");
  HistoryOptions opts;
  opts.prune_tol = 0.0;
  auto s = DiscriminatorState::history(std::make_shared<const Kernel>(sys.spec, sys.dim()), opts);
  s.add_entry(sys.p_true / sys.lambda, sys.x_true, CenterClass::true_point);
  for (int j = 0; j < sys.count(); ++j) s.add_generated(-sys.p_gen(j) / sys.lambda, x.col(j).data(), j);
  return s;
}

// Hessian of lambda f* at y (finite as lambda -> 0).
inline Matrix scaled_equilibrium_hessian(const RegionSystem& sys, const Kernel& k, const Matrix& x, const Vector& y) {
  Matrix h = sys.p_true * k.hess_xx(y, sys.x_true);
  for (int j = 0; j < sys.count(); ++j) h -= sys.p_gen(j) * k.hess_xx(y, x.col(j));
  return h;
}

// True when p K(., x_true) - sum_j q_j K(., x_j) vanishes identically, i.e. the
// combined coefficient at every distinct center is zero.
inline bool equilibrium_function_vanishes(const RegionSystem& sys, const Matrix& x, double tol = 1e-12) {
  std::vector<Vector> centers{sys.x_true};
  std::vector<double> coef{sys.p_true};
  for (int j = 0; j < sys.count(); ++j) {
    bool merged = false;
    for (std::size_t c = 0; c < centers.size(); ++c)
      if ((centers[c] - x.col(j)).norm() <= tol) {
        coef[c] -= sys.p_gen(j);
        merged = true;
        break;
      }
    if (!merged) {
      centers.push_back(x.col(j));
      coef.push_back(-sys.p_gen(j));
    }
  }
  for (double c : coef)
    if (std::abs(c) > tol * std::max(1.0, sys.p_true)) return false;
  return true;
}

struct QRMatrices {
  Matrix Q, R;
};

inline QRMatrices assemble_QR(const RegionSystem& sys, const Matrix& x) {
  sys.validate();
  sys.require_exact();
  sys.check_points(x);
  const int d = sys.dim(), n = sys.count();
  const Kernel k(sys.spec, d);
  QRMatrices out{Matrix::Zero(n * d, n * d), Matrix::Zero(n * d, n * d)};
  bool flat = false;
  if (sys.lambda == 0.0) {
    if (!equilibrium_function_vanishes(sys, x))
      throw InputError("lambda = 0 admits an equilibrium only when the generated masses cancel the true mass");
    flat = true;  // theta* = 0, H = 0
  }
  for (int j = 0; j < n; ++j) {
    if (!flat) {
      const Matrix h = scaled_equilibrium_hessian(sys, k, x, x.col(j)) / sys.lambda;
      out.Q.block(j * d, j * d, d, d) = -sys.mu * sys.p_gen(j) * h;
    }
    for (int l = 0; l < n; ++l)
      out.R.block(j * d, l * d, d, d) = sys.mu * sys.p_gen(j) * sys.p_gen(l) * k.cross_hess(x.col(j), x.col(l));
  }
  // exact symmetry (the blocks are symmetric analytically)
  out.Q = 0.5 * (out.Q + out.Q.transpose()).eval();
  out.R = 0.5 * (out.R + out.R.transpose()).eval();
  return out;
}

// D(0) = lambda Q + R, finite at lambda = 0.
inline Matrix psi_constant_term(const QRMatrices& qr, double lambda) { return lambda * qr.Q + qr.R; }

// Roots of det(s^2 I + s (Q + lambda I) + (lambda Q + R)) via the companion
// linearization [[0, I], [-(lambda Q + R), -(Q + lambda I)]].
inline std::vector<Complex> psi_roots(const Matrix& Q, const Matrix& R, double lambda) {
  require(Q.rows() == Q.cols() && R.rows() == R.cols() && Q.rows() == R.rows(), "psi_roots: shape mismatch");
  if (!Q.allFinite() || !R.allFinite() || !std::isfinite(lambda)) throw NumericError("psi_roots: non-finite input");
  const Eigen::Index n = Q.rows();
  Matrix c = Matrix::Zero(2 * n, 2 * n);
  c.topRightCorner(n, n) = Matrix::Identity(n, n);
  c.bottomLeftCorner(n, n) = -(lambda * Q + R);
  c.bottomRightCorner(n, n) = -(Q + lambda * Matrix::Identity(n, n));
  Eigen::EigenSolver<Matrix> es(c, false);
  if (es.info() != Eigen::Success) throw NumericError("psi_roots: eigensolver failed");
  std::vector<Complex> out(es.eigenvalues().data(), es.eigenvalues().data() + 2 * n);
  std::sort(out.begin(), out.end(), [](const Complex& a, const Complex& b) {
    return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
  });
  return out;
}

inline double spectral_scale(const std::vector<Complex>& roots) {
  double s = 0.0;
  for (const auto& r : roots) s = std::max(s, std::abs(r));
  return s;
}

// ---- analytic classifier ---------------------------------------------------------

// Theorem-style classification of the equilibrium with every generated point at
// the true point. Works from Delta, N, the masses and the kernel constants only.
inline StabilityReport classify_analytic(const RegionSystem& sys) {
  sys.validate();
  sys.require_exact();
  StabilityReport rep;
  rep.equilibrium = at_true_point(sys);
  const double delta = sys.delta();
  const int n = sys.count();
  const auto kc = kernel_constants(sys.spec);
  if (delta > 0.0) {
    rep.verdict = Verdict::stable;
    rep.condition = "thm1a";
  } else if (delta < 0.0 && n >= 2) {
    rep.verdict = Verdict::unstable;
    rep.condition = "thm1b";
  } else if (n == 1) {
    const double q1 = sys.p_gen(0);
    const double l2 = sys.lambda * sys.lambda;
    const double eq15 = sys.mu * delta * kc.k1 * q1 + std::min(l2, sys.mu * q1 * q1 * kc.k3);
    const double eq16 = sys.mu * delta * kc.k2 * q1 + std::min(l2, sys.mu * q1 * q1 * kc.k4);
    if (eq15 > 0.0) {
      rep.verdict = Verdict::stable;
      rep.condition = "thm1c";
    } else if (eq16 < 0.0) {
      rep.verdict = Verdict::unstable;
      rep.condition = "thm1d";
    } else {
      rep.verdict = Verdict::indeterminate;
      rep.condition = "boundary";
    }
  } else {
    rep.verdict = Verdict::indeterminate;
    rep.condition = "boundary";
  }
  return rep;
}

// ---- numeric classifier ----------------------------------------------------------

struct NumericOptions {
  double tol_rel = 1e-9;
  // Exclude zero roots that come from the rotation invariance of the region.
  bool reduce_symmetry = false;
  double zero_rel = 1e-6;
};

namespace detail {

// Columns spanning the infinitesimal rotations of the generated points about the
// true point.
inline Matrix rotation_tangents(const RegionSystem& sys, const Matrix& x) {
  const int d = sys.dim(), n = sys.count();
  std::vector<Vector> cols;
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) {
      Vector t(n * d);
      for (int j = 0; j < n; ++j) {
        const Vector r = x.col(j) - sys.x_true;
        Vector v = Vector::Zero(d);
        v(a) = -r(b);
        v(b) = r(a);
        t.segment(j * d, d) = v;
      }
      if (t.norm() > 0) cols.push_back(t);
    }
  Matrix m(n * d, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = cols[c];
  return m;
}

}  // namespace detail

inline StabilityReport classify_numeric(const RegionSystem& sys, const Matrix& x, const NumericOptions& opt = {}) {
  sys.validate();
  sys.require_exact();
  sys.check_points(x);
  const QRMatrices qr = assemble_QR(sys, x);
  StabilityReport rep;
  rep.equilibrium = x;
  rep.condition = "numeric-only";
  rep.eigenvalues = psi_roots(qr.Q, qr.R, sys.lambda);
  const double scale = std::max(spectral_scale(rep.eigenvalues), std::numeric_limits<double>::min());
  rep.tolerance = opt.tol_rel * scale;

  std::vector<char> excluded(rep.eigenvalues.size(), 0);
  if (opt.reduce_symmetry) {
    const double zero_tol = opt.zero_rel * scale;
    std::vector<std::size_t> zeros;
    for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i)
      if (std::abs(rep.eigenvalues[i]) < zero_tol) zeros.push_back(i);
    const Matrix tangents = detail::rotation_tangents(sys, x);
    if (!zeros.empty() && tangents.cols() > 0) {
      const Matrix d0 = psi_constant_term(qr, sys.lambda);
      Eigen::JacobiSVD<Matrix> svd(d0, Eigen::ComputeFullV);
      const Vector sv = svd.singularValues();
      const double cut = 1e-8 * std::max(sv(0), std::numeric_limits<double>::min());
      int null_dim = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) <= cut) ++null_dim;
      bool in_span = null_dim > 0;
      if (in_span) {
        const Matrix nullspace = svd.matrixV().rightCols(null_dim);
        const Eigen::HouseholderQR<Matrix> tq(tangents);
        const Matrix qt = tq.householderQ() * Matrix::Identity(tangents.rows(), tangents.cols());
        const Matrix resid = nullspace - qt * (qt.transpose() * nullspace);
        in_span = resid.norm() < 1e-6;
      }
      // semisimple: as many zero roots as null vectors
      if (in_span && static_cast<int>(zeros.size()) == null_dim) {
        for (std::size_t i : zeros) excluded[i] = 1;
        rep.symmetry_modes = null_dim;
      }
    }
  }

  for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i) {
    if (excluded[i]) continue;
    const Complex& s = rep.eigenvalues[i];
    rep.max_real_part = std::max(rep.max_real_part, s.real());
    if (std::abs(s.imag()) <= rep.tolerance) rep.max_real_root = std::max(rep.max_real_root, s.real());
  }
  if (rep.max_real_part < -rep.tolerance) rep.verdict = Verdict::stable;
  else if (rep.max_real_part > rep.tolerance) rep.verdict = Verdict::unstable;
  else rep.verdict = Verdict::indeterminate;
  const double sref = sys.spec.exact_widths().front();
  for (int j = 0; j < sys.count(); ++j) rep.distances.push_back((x.col(j) - sys.x_true).norm() / sref);
  return rep;
}

// ---- Corollary: generated support inside the true support ------------------------

struct SupportVerdict {
  Verdict verdict = Verdict::indeterminate;
  std::vector<int> region_sizes;
  std::vector<double> delta;
  std::vector<std::string> conditions;
};

inline SupportVerdict check_corollary_support(const DiscreteDistribution& pr, const DiscreteDistribution& pg,
                                              const KernelSpec& spec = KernelSpec::exact_rbf(1.0),
                                              double lambda = 0.01, double mu = 1.0, double tol = 1e-12) {
  require(pr.dim() == pg.dim(), "corollary check: dimension mismatch");
  SupportVerdict out;
  out.region_sizes.assign(pr.size(), 0);
  std::vector<std::vector<int>> members(pr.size());
  for (int j = 0; j < pg.size(); ++j) {
    int hit = -1;
    for (int i = 0; i < pr.size() && hit < 0; ++i)
      if ((pg.point(j) - pr.point(i)).norm() <= tol) hit = i;
    if (hit < 0) throw InputError("generated point " + std::to_string(j) + " is not on the true support");
    members[hit].push_back(j);
  }
  bool all_stable = true, any_unstable = false;
  for (int i = 0; i < pr.size(); ++i) {
    out.region_sizes[i] = static_cast<int>(members[i].size());
    double s = 0.0;
    for (int j : members[i]) s += pg.mass(j);
    out.delta.push_back(pr.mass(i) - s);
    if (members[i].empty()) {
      out.conditions.push_back("empty");
      continue;
    }
    RegionSystem sys;
    sys.x_true = pr.point(i);
    sys.p_true = pr.mass(i);
    sys.p_gen.resize(static_cast<Eigen::Index>(members[i].size()));
    for (std::size_t m = 0; m < members[i].size(); ++m) sys.p_gen(static_cast<Eigen::Index>(m)) = pg.mass(members[i][m]);
    sys.spec = spec;
    sys.lambda = lambda;
    sys.mu = mu;
    // at-true-point masses can differ from Delta = 0 only by rounding
    if (std::abs(sys.delta()) < 1e-12) sys.p_gen *= sys.p_true / sys.p_gen.sum();
    const auto rep = classify_analytic(sys);
    out.conditions.push_back(rep.condition);
    if (rep.verdict != Verdict::stable) all_stable = false;
    if (rep.verdict == Verdict::unstable) any_unstable = true;
  }
  out.verdict = any_unstable ? Verdict::unstable : all_stable ? Verdict::stable : Verdict::indeterminate;
  return out;
}

// ---- bad minimum ---------------------------------------------------------------------

// N unit vectors with pairwise cosine <= delta.
inline Matrix spread_directions(int n, int d, double delta, std::uint64_t seed = 0) {
  require(n >= 1 && d >= 1, "spread_directions: need n >= 1 and d >= 1");
  Matrix u = Matrix::Zero(d, n);
  auto certify = [&](const Matrix& m) {
    for (int a = 0; a < m.cols(); ++a)
      for (int b = a + 1; b < m.cols(); ++b)
        if (m.col(a).dot(m.col(b)) > delta + 1e-12) return false;
    return true;
  };
  if (n == 1) {
    u(0, 0) = 1.0;
    return u;
  }
  if (d == 1) {
    if (n > 2 || delta < -1.0) throw InputError("cannot place these directions on the line");
    u(0, 0) = 1.0;
    u(0, 1) = -1.0;
    return u;
  }
  if (d == 2) {
    for (int j = 0; j < n; ++j) {
      const double t = 2.0 * std::numbers::pi * j / n;
      u(0, j) = std::cos(t);
      u(1, j) = std::sin(t);
    }
    if (!certify(u))
      throw InputError("cannot place " + std::to_string(n) + " unit vectors in the plane with pairwise cosine <= " +
                       std::to_string(delta));
    return u;
  }
  if (n <= d + 1) {
    // regular simplex: centred standard basis of R^n, embedded in R^d
    Matrix e = Matrix::Identity(n, n);
    const Vector c = e.rowwise().mean();
    e.colwise() -= c;
    // orthonormal basis of the (n-1)-dim span
    Eigen::HouseholderQR<Matrix> qr(e);
    const Matrix basis = (qr.householderQ() * Matrix::Identity(n, n)).leftCols(n - 1);
    const Matrix coords = basis.transpose() * e;  // (n-1) x n
    u.topRows(n - 1) = coords;
    for (int j = 0; j < n; ++j) u.col(j).normalize();
    if (certify(u)) return u;
  }
  // greedy over +-axes then seeded sphere samples
  std::vector<Vector> cand;
  for (int k = 0; k < d; ++k)
    for (double s : {1.0, -1.0}) {
      Vector v = Vector::Zero(d);
      v(k) = s;
      cand.push_back(v);
    }
  const CounterRng rng(seed);
  for (int m = 0; m < 20000; ++m) {
    Vector v(d);
    for (int k = 0; k < d; ++k) v(k) = rng.normal(static_cast<std::uint64_t>(m) * d + k);
    if (v.norm() > 0) cand.push_back(v.normalized());
  }
  std::vector<Vector> chosen;
  for (const auto& v : cand) {
    bool ok = true;
    for (const auto& w : chosen)
      if (v.dot(w) > delta) {
        ok = false;
        break;
      }
    if (ok) chosen.push_back(v);
    if (static_cast<int>(chosen.size()) == n) break;
  }
  if (static_cast<int>(chosen.size()) < n)
    throw InputError("greedy packing found only " + std::to_string(chosen.size()) + " directions with cosine <= " +
                     std::to_string(delta));
  for (int j = 0; j < n; ++j) u.col(j) = chosen[j];
  return u;
}

// Ring radius r (in units of sigma) from  1/2 e^{-r^2 (1 - delta)} S <= p e^{-r^2/2}:
// r^2 = ln(S / 2p) / (1/2 - delta) when positive; r = 1 otherwise (any r works).
inline double ring_radius(const RegionSystem& sys, double delta) {
  require(delta < 0.5, "ring configuration needs delta < 1/2");
  const double r2 = std::log(sys.p_gen.sum() / (2.0 * sys.p_true)) / (0.5 - delta);
  return r2 > 0.0 ? std::sqrt(r2) : 1.0;
}

inline Matrix ring_configuration(const RegionSystem& sys, double delta = 0.0, std::uint64_t seed = 0) {
  sys.validate();
  const double sigma = sys.spec.exact_widths().empty() ? sys.spec.sigma : sys.spec.exact_widths().back();
  const Matrix u = spread_directions(sys.count(), sys.dim(), delta, seed);
  const double r = ring_radius(sys, delta);
  Matrix x = (r * sigma) * u;
  x.colwise() += sys.x_true;
  return x;
}

// 1/2 sum_{j != k} q_j q_k K(x_j, x_k) < p sum_j q_j K(x_true, x_j)
inline bool check_ksep(const RegionSystem& sys, const Matrix& x) {
  sys.validate();
  sys.check_points(x);
  const Kernel k(sys.spec, sys.dim());
  double lhs = 0.0, rhs = 0.0;
  for (int a = 0; a < sys.count(); ++a) {
    rhs += sys.p_true * sys.p_gen(a) * k.eval(sys.x_true, x.col(a));
    for (int b = 0; b < sys.count(); ++b)
      if (a != b) lhs += 0.5 * sys.p_gen(a) * sys.p_gen(b) * k.eval(x.col(a), x.col(b));
  }
  return lhs < rhs;
}

struct BadMinimumOptions {
  double delta = 0.0;        // ring pairwise-cosine bound
  double grad_tol = 1e-13;   // on max |dJ/dx| * sigma
  int max_iter = 200000;
  double escape_radius = 100.0;  // in units of sigma
  double margin = 1e-9;      // J < J0 - margin * J0
  NumericOptions numeric{1e-9, true, 1e-6};
};

inline StabilityReport find_bad_minimum(const RegionSystem& sys, const BadMinimumOptions& opt = {}) {
  sys.validate();
  sys.require_exact();
  require(sys.count() >= 2, "bad minimum search needs at least two generated points");
  const double sigma = sys.spec.exact_widths().back();
  Matrix x = ring_configuration(sys, opt.delta);
  double j = restricted_mmd(sys, x);
  Matrix g = restricted_mmd_grad(sys, x);
  int it = 0;
  double t_prev = 0.5 * sigma * sigma;
  for (; it < opt.max_iter; ++it) {
    if (g.cwiseAbs().maxCoeff() * sigma < opt.grad_tol) break;
    // Armijo backtracking from twice the last accepted step, halving. Once the
    // predicted decrease drops below rounding in J, accept steps that shrink the
    // gradient instead.
    const double g2 = g.squaredNorm();
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(j), sys.p_true * sys.p_true);
    double t = 2.0 * t_prev;
    Matrix xn, gn;
    double jn = 0.0;
    bool accepted = false;
    for (int h = 0; h < 80 && !accepted; ++h, t *= 0.5) {
      xn = x - t * g;
      jn = restricted_mmd(sys, xn);
      if (1e-4 * t * g2 > floor) {
        accepted = jn <= j - 1e-4 * t * g2;
        if (accepted) gn = restricted_mmd_grad(sys, xn);
      } else if (jn <= j + floor) {
        gn = restricted_mmd_grad(sys, xn);
        accepted = gn.squaredNorm() < g2;
      }
    }
    if (!accepted)
      throw NumericError("bad minimum: line search stagnated at |grad| = " + std::to_string(g.cwiseAbs().maxCoeff()));
    t *= 2.0;  // undo the loop's final halving
    t_prev = t;
    x = xn;
    j = jn;
    g = gn;
    for (int c = 0; c < x.cols(); ++c)
      if ((x.col(c) - sys.x_true).norm() > opt.escape_radius * sigma)
        throw NumericError("no finite minimum found: points left the search ball");
  }
  if (it == opt.max_iter) throw NumericError("bad minimum: iteration limit reached");
  const double j0 = 0.5 * (sys.p_true * sys.p_true + sys.p_gen.squaredNorm());
  if (!(j < j0 - opt.margin * j0))
    throw NumericError("bad minimum: objective " + std::to_string(j) + " does not improve on J0 = " + std::to_string(j0));
  StabilityReport rep;
  if (sys.lambda > 0.0) rep = classify_numeric(sys, x, opt.numeric);
  else rep.equilibrium = x;
  rep.grad_norm = g.cwiseAbs().maxCoeff();
  rep.objective = j;
  rep.iterations = it;
  rep.distances.clear();
  for (int c = 0; c < sys.count(); ++c) rep.distances.push_back((x.col(c) - sys.x_true).norm() / sigma);
  return rep;
}

// ---- local simulation -------------------------------------------------------------------

struct RegionSimulation {
  TrainingTrace trace;
  std::vector<double> deviation;  // max_j |x_j - x_j*| per snapshot
};

// Runs the region's dynamics from (theta*, x* + perturbation). For lambda = 0 the
// discriminator starts at zero (valid only when the equilibrium function vanishes).
inline RegionSimulation simulate_region(const RegionSystem& sys, const Matrix& x_eq, const Matrix& perturbation,
                                        double eta_d, long steps, long snapshot_every = 1) {
  sys.validate();
  sys.check_points(x_eq);
  sys.check_points(perturbation);
  TrainConfig cfg;
  cfg.eta_d = eta_d;
  cfg.eta_g = sys.mu * eta_d;
  cfg.lambda = sys.lambda;
  cfg.steps = steps;
  cfg.snapshot_every = snapshot_every;
  cfg.prune_tol = 0.0;
  DiscriminatorState s = [&] {
    if (sys.lambda > 0.0) return equilibrium_discriminator(sys, x_eq);
    if (!equilibrium_function_vanishes(sys, x_eq))
      throw InputError("lambda = 0: generated masses must cancel the true mass");
    HistoryOptions o;
    o.prune_tol = 0.0;
    return DiscriminatorState::history(std::make_shared<const Kernel>(sys.spec, sys.dim()), o);
  }();
  const auto pr = DiscreteDistribution::sub_distribution(sys.x_true, Vector::Constant(1, sys.p_true));
  const auto pg = DiscreteDistribution::sub_distribution(x_eq + perturbation, sys.p_gen);
  RegionSimulation out;
  out.trace = train(pr, pg, std::move(s), cfg);
  for (const auto& snap : out.trace.snapshots)
    out.deviation.push_back((snap.points - x_eq).colwise().norm().maxCoeff());
  return out;
}

}  // namespace ipm
