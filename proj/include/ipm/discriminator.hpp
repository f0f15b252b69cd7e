#pragma once

#include "ipm/core.hpp"
#include "ipm/distribution.hpp"
#include "ipm/gauss_expansion.hpp"
#include "ipm/kernels.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <vector>

namespace ipm {

enum class DiscriminatorMode { parametric, history };
enum class CenterClass { true_point, generated };

struct HistoryEntry {
  double coef;
  Vector center;
  CenterClass cls;
};

struct HistoryOptions {
  // Entries with |c| < prune_tol * (largest |c|) are dropped from the old end.
  double prune_tol = 1e-12;
  // Exact-kernel histories in d <= 3 move entries older than this many into
  // moment expansions (certified truncation bound, see gauss_expansion.hpp).
  // 0 disables compression.
  std::size_t compress_after = 32;
  // Relative gradient error accepted from the expansions before NumericError.
  double compress_tol = 1e-8;
};

// Cached trigonometric features at a set of points: t = Omega x.
struct TrigCache {
  Matrix cos_t;  // R x n
  Matrix sin_t;
};

class DiscriminatorState {
 public:
  static DiscriminatorState parametric(std::shared_ptr<const Kernel> kernel) {
    if (kernel->spec().variant != KernelVariant::rff)
      throw InputError("parametric discriminator requires an rff kernel");
    DiscriminatorState s(std::move(kernel), DiscriminatorMode::parametric);
    s.theta_ = Vector::Zero(s.kernel_->feature_dim());
    return s;
  }

  static DiscriminatorState history(std::shared_ptr<const Kernel> kernel, HistoryOptions opts = {}) {
    DiscriminatorState s(std::move(kernel), DiscriminatorMode::history);
    s.opts_ = opts;
    return s;
  }

  DiscriminatorMode mode() const { return mode_; }
  const Kernel& kernel() const { return *kernel_; }
  std::shared_ptr<const Kernel> kernel_ptr() const { return kernel_; }
  int dim() const { return kernel_->dim(); }

  // ---- parametric -----------------------------------------------------------
  const Vector& theta() const {
    require_mode(DiscriminatorMode::parametric);
    return theta_;
  }
  void set_theta(Vector theta) {
    require_mode(DiscriminatorMode::parametric);
    require(theta.size() == theta_.size(), "theta: wrong length");
    theta_ = std::move(theta);
  }

  TrigCache trig(const Matrix& points) const {
    const Matrix t = kernel_->frequencies().omega * points;
    return {t.array().cos().matrix(), t.array().sin().matrix()};
  }

  // sum_j w_j a(x_j) from cached trig values.
  Vector weighted_features(const TrigCache& c, const Vector& w) const {
    const double s = kernel_->feature_scale();
    const Vector cw = c.cos_t * w, sw = c.sin_t * w;
    Vector out(2 * cw.size());
    for (Eigen::Index r = 0; r < cw.size(); ++r) {
      out(2 * r) = s * cw(r);
      out(2 * r + 1) = s * sw(r);
    }
    return out;
  }

  // Gradient of a(x).theta at each cached point (d x n).
  Matrix parametric_grads(const TrigCache& c) const {
    const double s = kernel_->feature_scale();
    const Eigen::Index R = c.cos_t.rows();
    Eigen::Map<const Vector, 0, Eigen::InnerStride<2>> th_c(theta_.data(), R);
    Eigen::Map<const Vector, 0, Eigen::InnerStride<2>> th_s(theta_.data() + 1, R);
    // d/dx [cos t th_c + sin t th_s] = (-sin t th_c + cos t th_s) omega
    const Matrix coeff = (-(c.sin_t.array().colwise() * th_c.array()) + c.cos_t.array().colwise() * th_s.array())
                             .matrix();  // R x n
    return s * kernel_->frequencies().omega.transpose() * coeff;
  }

  void parametric_update(double decay, double eta, const Vector& feature_diff) {
    theta_ = decay * theta_ + eta * feature_diff;
  }

  // ---- history --------------------------------------------------------------
  // Adds c K(., z). True-point entries are consolidated per distinct center.
  void add_entry(double c, const Vector& z, CenterClass cls) {
    require_mode(DiscriminatorMode::history);
    require(z.size() == dim(), "history entry: dimension mismatch");
    if (cls == CenterClass::true_point) {
      for (std::size_t i = 0; i < true_coef_.size(); ++i)
        if (true_centers_.col(static_cast<Eigen::Index>(i)) == z) {
          true_coef_[i] += c / scale_;
          return;
        }
      true_centers_.conservativeResize(dim(), true_centers_.cols() + 1);
      true_centers_.col(true_centers_.cols() - 1) = z;
      true_coef_.push_back(c / scale_);
      return;
    }
    append_generated(c, z.data(), -1);
  }

  // Generated entry for point `slot`; merges into that slot's previous entry when
  // the center is bitwise identical.
  void add_generated(double c, const double* z, int slot) { append_generated(c, z, slot); }

  void decay(double factor) {
    require(factor > 0.0, "decay factor must be positive");
    if (mode_ == DiscriminatorMode::parametric) {
      theta_ *= factor;
      return;
    }
    scale_ *= factor;
    if (scale_ < 1e-150) renormalize();
  }

  // Drops tiny generated entries from the old end; called after each step.
  void prune(double reference) {
    if (opts_.prune_tol <= 0.0) return;
    const double cut = opts_.prune_tol * reference / scale_;
    while (start_ < gen_coef_.size() && std::abs(gen_coef_[start_]) < cut) {
      gen_coef_[start_] = 0.0;
      ++start_;
    }
    if (start_ > 4096 && start_ * 2 > gen_coef_.size()) compact();
  }

  double largest_true_coef() const {
    double m = 0.0;
    for (double c : true_coef_) m = std::max(m, std::abs(c * scale_));
    return m;
  }

  std::vector<HistoryEntry> entries() const {
    require_mode(DiscriminatorMode::history);
    if (grid_) throw InputError("history entries unavailable once compressed");
    std::vector<HistoryEntry> out;
    for (std::size_t i = 0; i < true_coef_.size(); ++i)
      out.push_back({true_coef_[i] * scale_, true_centers_.col(static_cast<Eigen::Index>(i)), CenterClass::true_point});
    const int d = dim();
    for (std::size_t h = start_; h < gen_coef_.size(); ++h)
      out.push_back({gen_coef_[h] * scale_, Eigen::Map<const Vector>(&gen_centers_[h * d], d), CenterClass::generated});
    return out;
  }

  std::size_t history_size() const {
    return true_coef_.size() + (gen_coef_.size() - start_) + (grid_ ? grid_->cell_count() : 0);
  }
  bool compressed() const { return grid_.has_value(); }

  // ---- evaluation -----------------------------------------------------------
  double eval(const Vector& x) const {
    require(x.size() == dim(), "eval: dimension mismatch");
    if (mode_ == DiscriminatorMode::parametric) return kernel_->features(x).dot(theta_);
    double v = 0.0;
    Vector g = Vector::Zero(dim());
    history_eval(x.data(), v, g.data(), false);
    return v;
  }

  Vector grad(const Vector& x) const {
    require(x.size() == dim(), "grad: dimension mismatch");
    if (mode_ == DiscriminatorMode::parametric) return kernel_->feature_jacobian(x).transpose() * theta_;
    double v = 0.0;
    Vector g = Vector::Zero(dim());
    history_eval(x.data(), v, g.data(), true);
    return g;
  }

  Matrix hessian(const Vector& x) const {
    require(x.size() == dim(), "hessian: dimension mismatch");
    if (mode_ == DiscriminatorMode::parametric) {
      const Matrix& w = kernel_->frequencies().omega;
      const double s = kernel_->feature_scale();
      Matrix h = Matrix::Zero(dim(), dim());
      for (int r = 0; r < w.rows(); ++r) {
        const double t = w.row(r).dot(x);
        h.noalias() -= s * (std::cos(t) * theta_(2 * r) + std::sin(t) * theta_(2 * r + 1)) * w.row(r).transpose() * w.row(r);
      }
      return h;
    }
    Matrix h = Matrix::Zero(dim(), dim());
    for (const auto& e : entries()) h += e.coef * kernel_->hess_xx(x, e.center);
    return h;
  }

 private:
  DiscriminatorState(std::shared_ptr<const Kernel> kernel, DiscriminatorMode mode)
      : kernel_(std::move(kernel)), mode_(mode) {
    if (!kernel_) throw InputError("discriminator needs a kernel");
    true_centers_.resize(kernel_->dim(), 0);
    const auto& w = kernel_->widths();
    for (double s : w) inv_s2_.push_back(1.0 / (s * s));
  }

  void require_mode(DiscriminatorMode m) const {
    if (mode_ != m) throw InputError("operation not available in this discriminator mode");
  }

  void append_generated(double c, const double* z, int slot) {
    require_mode(DiscriminatorMode::history);
    const int d = dim();
    if (slot >= 0) {
      if (static_cast<std::size_t>(slot) >= last_slot_entry_.size()) last_slot_entry_.resize(slot + 1, npos);
      const std::size_t last = last_slot_entry_[slot];
      if (last != npos && last >= start_ && std::equal(z, z + d, &gen_centers_[last * d])) {
        gen_coef_[last] += c / scale_;
        return;
      }
      last_slot_entry_[slot] = gen_coef_.size();
    }
    gen_coef_.push_back(c / scale_);
    gen_centers_.insert(gen_centers_.end(), z, z + d);
    maybe_compress();
  }

  void maybe_compress() {
    if (opts_.compress_after == 0 || !kernel_->spec().is_exact() || !GaussCellGrid::supports(dim())) return;
    const std::size_t live = gen_coef_.size() - start_;
    if (live < 2 * opts_.compress_after) return;
    if (!grid_) grid_.emplace(dim(), kernel_->widths());
    const int d = dim();
    const std::size_t stop = gen_coef_.size() - opts_.compress_after;
    for (std::size_t h = start_; h < stop; ++h) {
      if (gen_coef_[h] != 0.0) grid_->add(gen_coef_[h], &gen_centers_[h * d]);
      gen_coef_[h] = 0.0;
    }
    start_ = stop;
    compact();
  }

  void compact() {
    const int d = dim();
    gen_coef_.erase(gen_coef_.begin(), gen_coef_.begin() + static_cast<std::ptrdiff_t>(start_));
    gen_centers_.erase(gen_centers_.begin(), gen_centers_.begin() + static_cast<std::ptrdiff_t>(start_ * d));
    for (auto& e : last_slot_entry_) e = (e == npos || e < start_) ? npos : e - start_;
    start_ = 0;
  }

  void renormalize() {
    for (double& c : true_coef_) c *= scale_;
    for (double& c : gen_coef_) c *= scale_;
    if (grid_) grid_->scale(scale_);
    scale_ = 1.0;
  }

  void history_eval(const double* x, double& value, double* grad, bool want_grad) const {
    const int d = dim();
    double v = 0.0;
    std::vector<double> g(d, 0.0);
    if (kernel_->spec().is_exact()) {
      auto term = [&](double c, const double* z) {
        double r2 = 0.0;
        for (int k = 0; k < d; ++k) {
          const double t = x[k] - z[k];
          r2 += t * t;
        }
        double kv = 0.0, kg = 0.0;
        for (double is2 : inv_s2_) {
          const double e = std::exp(-0.5 * r2 * is2);
          kv += e;
          kg += e * is2;
        }
        v += c * kv;
        if (want_grad)
          for (int k = 0; k < d; ++k) g[k] -= c * kg * (x[k] - z[k]);
      };
      for (std::size_t i = 0; i < true_coef_.size(); ++i) term(true_coef_[i], true_centers_.col(static_cast<Eigen::Index>(i)).data());
      for (std::size_t h = start_; h < gen_coef_.size(); ++h) term(gen_coef_[h], &gen_centers_[h * d]);
      if (grid_) {
        double smin = 1.0 / std::sqrt(*std::max_element(inv_s2_.begin(), inv_s2_.end()));
        double mass = 0.0;
        for (double c : gen_coef_) mass += std::abs(c);
        const double tol = opts_.compress_tol * std::max(mass + grid_abs_mass(), 1e-300) / smin;
        grid_->accumulate(x, v, g.data(), tol);
      }
    } else {
      const Eigen::Map<const Vector> xv(x, d);
      for (const auto& e : entries_unscaled()) {
        v += e.coef * kernel_->eval(xv, e.center);
        if (want_grad) {
          const Vector gk = kernel_->grad_x(xv, e.center);
          for (int k = 0; k < d; ++k) g[k] += e.coef * gk(k);
        }
      }
    }
    value += scale_ * v;
    for (int k = 0; k < d; ++k) grad[k] += scale_ * g[k];
  }

  double grid_abs_mass() const { return grid_ ? grid_->abs_mass() : 0.0; }

  std::vector<HistoryEntry> entries_unscaled() const {
    std::vector<HistoryEntry> out;
    for (std::size_t i = 0; i < true_coef_.size(); ++i)
      out.push_back({true_coef_[i], true_centers_.col(static_cast<Eigen::Index>(i)), CenterClass::true_point});
    const int d = dim();
    for (std::size_t h = start_; h < gen_coef_.size(); ++h)
      out.push_back({gen_coef_[h], Eigen::Map<const Vector>(&gen_centers_[h * d], d), CenterClass::generated});
    return out;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::shared_ptr<const Kernel> kernel_;
  DiscriminatorMode mode_;
  HistoryOptions opts_;
  Vector theta_;

  std::vector<double> inv_s2_;
  double scale_ = 1.0;
  Matrix true_centers_;
  std::vector<double> true_coef_;
  std::vector<double> gen_coef_;
  std::vector<double> gen_centers_;
  std::size_t start_ = 0;
  std::vector<std::size_t> last_slot_entry_;
  std::optional<GaussCellGrid> grid_;
};

}  // namespace ipm
