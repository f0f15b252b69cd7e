#pragma once

#include "ipm/core.hpp"
#include "ipm/random.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace ipm {

enum class KernelVariant { exact_rbf, rff, multiscale };

inline std::string to_string(KernelVariant v) {
  switch (v) {
    case KernelVariant::exact_rbf: return "exact_rbf";
    case KernelVariant::rff: return "rff";
    case KernelVariant::multiscale: return "multiscale";
  }
  return "?";
}

inline KernelVariant kernel_variant_from_string(const std::string& s) {
  if (s == "exact_rbf") return KernelVariant::exact_rbf;
  if (s == "rff") return KernelVariant::rff;
  if (s == "multiscale") return KernelVariant::multiscale;
  throw InputError("unknown kernel variant '" + s + "'");
}

struct KernelSpec {
  KernelVariant variant = KernelVariant::exact_rbf;
  double sigma = 1.0;           // exact_rbf, rff
  std::vector<double> sigmas;   // multiscale
  int features = 1000;          // rff
  std::uint64_t seed = 0;       // rff
  // rff only: scale features by sqrt(2/R) instead of sqrt(1/R), giving K(x,x) = 2.
  bool paper_scaling = false;

  static KernelSpec exact_rbf(double sigma) {
    KernelSpec s;
    s.variant = KernelVariant::exact_rbf;
    s.sigma = sigma;
    s.validate();
    return s;
  }
  static KernelSpec rff(double sigma, int features, std::uint64_t seed, bool paper_scaling = false) {
    KernelSpec s;
    s.variant = KernelVariant::rff;
    s.sigma = sigma;
    s.features = features;
    s.seed = seed;
    s.paper_scaling = paper_scaling;
    s.validate();
    return s;
  }
  // Widths are sorted into canonical increasing order; duplicates are rejected.
  static KernelSpec multiscale(std::vector<double> widths) {
    KernelSpec s;
    s.variant = KernelVariant::multiscale;
    std::sort(widths.begin(), widths.end());
    s.sigmas = std::move(widths);
    s.validate();
    return s;
  }

  void validate() const {
    auto check_width = [](double w) {
      if (!(w > 0.0) || !std::isfinite(w)) throw InputError("kernel width must be positive and finite");
    };
    switch (variant) {
      case KernelVariant::exact_rbf: check_width(sigma); break;
      case KernelVariant::rff:
        check_width(sigma);
        if (features < 1) throw InputError("rff feature count must be >= 1");
        break;
      case KernelVariant::multiscale:
        if (sigmas.empty()) throw InputError("multiscale kernel needs at least one width");
        for (std::size_t i = 0; i < sigmas.size(); ++i) {
          check_width(sigmas[i]);
          if (i > 0 && !(sigmas[i] > sigmas[i - 1]))
            throw InputError("multiscale widths must be strictly increasing");
        }
        break;
    }
  }

  // Gaussian widths whose sum makes up an exact kernel (empty for rff).
  std::vector<double> exact_widths() const {
    if (variant == KernelVariant::exact_rbf) return {sigma};
    if (variant == KernelVariant::multiscale) return sigmas;
    return {};
  }

  bool is_exact() const { return variant != KernelVariant::rff; }

  std::string label() const {
    switch (variant) {
      case KernelVariant::exact_rbf: return "rbf(" + std::to_string(sigma) + ")";
      case KernelVariant::rff: return "rff(" + std::to_string(sigma) + "," + std::to_string(features) + ")";
      case KernelVariant::multiscale: {
        std::string out = "multiscale(";
        for (std::size_t i = 0; i < sigmas.size(); ++i) out += (i ? "," : "") + std::to_string(sigmas[i]);
        return out + ")";
      }
    }
    return "?";
  }
};

// R x d matrix of frequency rows w_r ~ N(0, I / sigma^2).
struct FeatureFrequencies {
  Matrix omega;

  static FeatureFrequencies sample(int features, int dim, double sigma, std::uint64_t seed) {
    require(features >= 1 && dim >= 1, "frequency sampling needs features >= 1 and dim >= 1");
    require(sigma > 0.0, "frequency sampling needs sigma > 0");
    const CounterRng rng(seed);
    FeatureFrequencies f;
    f.omega.resize(features, dim);
    for (int r = 0; r < features; ++r)
      for (int k = 0; k < dim; ++k)
        f.omega(r, k) = rng.normal(static_cast<std::uint64_t>(r) * dim + k) / sigma;
    return f;
  }

  int count() const { return static_cast<int>(omega.rows()); }
  int dim() const { return static_cast<int>(omega.cols()); }
};

struct KernelConstants {
  double k1, k2, k3, k4;
};

inline KernelConstants kernel_constants(const KernelSpec& spec) {
  spec.validate();
  double c = 0.0;
  if (spec.variant == KernelVariant::multiscale) {
    for (double s : spec.sigmas) c += 1.0 / (s * s);
  } else {
    c = 1.0 / (spec.sigma * spec.sigma);
  }
  return {c, c, c, c};
}

// A kernel bound to a dimension. For rff this owns the sampled frequencies.
class Kernel {
 public:
  Kernel(KernelSpec spec, int dim) : spec_(std::move(spec)), dim_(dim) {
    spec_.validate();
    require(dim >= 1, "kernel dimension must be >= 1");
    if (spec_.variant == KernelVariant::rff) {
      freqs_ = std::make_shared<const FeatureFrequencies>(
          FeatureFrequencies::sample(spec_.features, dim, spec_.sigma, spec_.seed));
      scale_ = std::sqrt((spec_.paper_scaling ? 2.0 : 1.0) / spec_.features);
    } else {
      widths_ = spec_.exact_widths();
    }
  }

  const KernelSpec& spec() const { return spec_; }
  int dim() const { return dim_; }
  const std::vector<double>& widths() const { return widths_; }
  const FeatureFrequencies& frequencies() const {
    if (!freqs_) throw InputError("kernel has no random features");
    return *freqs_;
  }
  double feature_scale() const { return scale_; }
  int feature_dim() const { return spec_.variant == KernelVariant::rff ? 2 * spec_.features : 0; }

  double eval(const Vector& x, const Vector& y) const {
    check(x, y);
    if (freqs_) return features(x).dot(features(y));
    const double r2 = (x - y).squaredNorm();
    double k = 0.0;
    for (double s : widths_) k += std::exp(-r2 / (2.0 * s * s));
    return k;
  }

  Vector grad_x(const Vector& x, const Vector& y) const {
    check(x, y);
    if (freqs_) return feature_jacobian(x).transpose() * features(y);
    const Vector d = x - y;
    const double r2 = d.squaredNorm();
    double c = 0.0;
    for (double s : widths_) c -= std::exp(-r2 / (2.0 * s * s)) / (s * s);
    return c * d;
  }

  Matrix hess_xx(const Vector& x, const Vector& y) const {
    check(x, y);
    if (freqs_) {
      const Matrix& w = freqs_->omega;
      const Vector ay = features(y);
      Matrix h = Matrix::Zero(dim_, dim_);
      for (int r = 0; r < w.rows(); ++r) {
        const double t = w.row(r).dot(x);
        const double c = -scale_ * (std::cos(t) * ay(2 * r) + std::sin(t) * ay(2 * r + 1));
        h.noalias() += c * w.row(r).transpose() * w.row(r);
      }
      return h;
    }
    const Vector d = x - y;
    const double r2 = d.squaredNorm();
    Matrix h = Matrix::Zero(dim_, dim_);
    const Matrix ddt = d * d.transpose();
    for (double s : widths_) {
      const double s2 = s * s;
      const double k = std::exp(-r2 / (2.0 * s2));
      h += k * (ddt / (s2 * s2) - Matrix::Identity(dim_, dim_) / s2);
    }
    return h;
  }

  // d^2 K / dx dy
  Matrix cross_hess(const Vector& x, const Vector& y) const {
    check(x, y);
    if (freqs_) {
      const Matrix& w = freqs_->omega;
      Matrix h = Matrix::Zero(dim_, dim_);
      for (int r = 0; r < w.rows(); ++r) {
        const double tx = w.row(r).dot(x);
        const double ty = w.row(r).dot(y);
        const double c = scale_ * scale_ * (std::sin(tx) * std::sin(ty) + std::cos(tx) * std::cos(ty));
        h.noalias() += c * w.row(r).transpose() * w.row(r);
      }
      return h;
    }
    return -hess_xx(x, y);
  }

  // Interleaved [cos(w_1.x), sin(w_1.x), cos(w_2.x), ...] times the feature scale.
  Vector features(const Vector& x) const {
    const FeatureFrequencies& f = frequencies();
    require(x.size() == dim_, "feature map: dimension mismatch");
    const Vector t = f.omega * x;
    Vector a(2 * t.size());
    for (Eigen::Index r = 0; r < t.size(); ++r) {
      a(2 * r) = scale_ * std::cos(t(r));
      a(2 * r + 1) = scale_ * std::sin(t(r));
    }
    return a;
  }

  // 2R x d Jacobian of the feature map.
  Matrix feature_jacobian(const Vector& x) const {
    const FeatureFrequencies& f = frequencies();
    require(x.size() == dim_, "feature map: dimension mismatch");
    const Vector t = f.omega * x;
    Matrix j(2 * t.size(), dim_);
    for (Eigen::Index r = 0; r < t.size(); ++r) {
      j.row(2 * r) = -scale_ * std::sin(t(r)) * f.omega.row(r);
      j.row(2 * r + 1) = scale_ * std::cos(t(r)) * f.omega.row(r);
    }
    return j;
  }

 private:
  void check(const Vector& x, const Vector& y) const {
    if (x.size() != dim_ || y.size() != dim_)
      throw InputError("kernel: dimension mismatch (expected " + std::to_string(dim_) + ", got " +
                       std::to_string(x.size()) + " and " + std::to_string(y.size()) + ")");
  }

  KernelSpec spec_;
  int dim_;
  std::vector<double> widths_;
  std::shared_ptr<const FeatureFrequencies> freqs_;
  double scale_ = 0.0;
};

// Free-function forms. For rff these sample the frequencies on every call; bind a
// Kernel once when evaluating repeatedly.
inline int common_dim(const Vector& x, const Vector& y) {
  if (x.size() != y.size() || x.size() == 0) throw InputError("kernel: dimension mismatch");
  return static_cast<int>(x.size());
}
inline double kernel_eval(const KernelSpec& s, const Vector& x, const Vector& y) {
  return Kernel(s, common_dim(x, y)).eval(x, y);
}
inline Vector kernel_grad_x(const KernelSpec& s, const Vector& x, const Vector& y) {
  return Kernel(s, common_dim(x, y)).grad_x(x, y);
}
inline Matrix kernel_hess_xx(const KernelSpec& s, const Vector& x, const Vector& y) {
  return Kernel(s, common_dim(x, y)).hess_xx(x, y);
}
inline Matrix kernel_cross_hess(const KernelSpec& s, const Vector& x, const Vector& y) {
  return Kernel(s, common_dim(x, y)).cross_hess(x, y);
}

inline Vector rff_feature_map(const Vector& x, const FeatureFrequencies& freqs, bool paper_scaling = false) {
  require(x.size() == freqs.dim(), "feature map: dimension mismatch");
  const double scale = std::sqrt((paper_scaling ? 2.0 : 1.0) / freqs.count());
  const Vector t = freqs.omega * x;
  Vector a(2 * t.size());
  for (Eigen::Index r = 0; r < t.size(); ++r) {
    a(2 * r) = scale * std::cos(t(r));
    a(2 * r + 1) = scale * std::sin(t(r));
  }
  return a;
}

}  // namespace ipm
