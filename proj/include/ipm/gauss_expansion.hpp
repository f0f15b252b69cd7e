#pragma once

#include "ipm/core.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <vector>

namespace ipm {

// Compressed sum of Gaussians  g(x) = sum_h c_h exp(-|x - z_h|^2 / (2 sigma^2))  with
// centers near an anchor a. With s = sqrt(2) sigma, u = (x-a)/s, v = (z-a)/s:
//   g(x) = exp(-|u|^2) sum_alpha A_alpha u^alpha,
//   A_alpha = 2^|alpha| / alpha! * sum_h c_h exp(-|v_h|^2) v_h^alpha,
// truncated at total degree P. The truncation error is bounded by
//   M exp(-|u|^2) tail(z, P),   z = 2 |u| v_max,   tail(z, P) = sum_{n>P} z^n / n!,
// where M = sum_h |c_h|.
class MultiIndexTable {
 public:
  MultiIndexTable(int dim, int order) : dim_(dim), order_(order) {
    std::vector<int> cur(dim, 0);
    build(cur, 0, order);
  }
  int dim() const { return dim_; }
  int order() const { return order_; }
  std::size_t size() const { return weight_.size(); }
  const int* exponents(std::size_t i) const { return &exps_[i * dim_]; }
  double weight(std::size_t i) const { return weight_[i]; }

 private:
  void build(std::vector<int>& cur, int k, int budget) {
    if (k == dim_) {
      double w = 1.0;
      for (int e : cur)
        for (int t = 1; t <= e; ++t) w *= 2.0 / t;
      exps_.insert(exps_.end(), cur.begin(), cur.end());
      weight_.push_back(w);
      return;
    }
    for (int e = 0; e <= budget; ++e) {
      cur[k] = e;
      build(cur, k + 1, budget - e);
    }
    cur[k] = 0;
  }

  int dim_, order_;
  std::vector<int> exps_;
  std::vector<double> weight_;
};

// Upper bound on sum_{n > order} z^n / n!  (Lagrange remainder: z^{P+1}/(P+1)! e^z).
inline double exp_series_tail(double z, int order) {
  if (z <= 0.0) return 0.0;
  return std::exp((order + 1) * std::log(z) - std::lgamma(order + 2.0) + z);
}

class GaussExpansion {
 public:
  GaussExpansion(std::shared_ptr<const MultiIndexTable> table, double sigma, Vector anchor)
      : table_(std::move(table)), s_(std::sqrt(2.0) * sigma), anchor_(std::move(anchor)),
        coef_(table_->size(), 0.0) {
    lgamma_[0] = std::lgamma(table_->order() + 1.0);
  }

  void add(double c, const double* z) {
    const int d = table_->dim();
    double v2 = 0.0;
    for (int k = 0; k < d; ++k) {
      v_[k] = (z[k] - anchor_(k)) / s_;
      v2 += v_[k] * v_[k];
    }
    fill_powers(v_.data());
    const double w = c * std::exp(-v2);
    for (std::size_t i = 0; i < coef_.size(); ++i) coef_[i] += w * table_->weight(i) * monomial(i);
    abs_mass_ += std::abs(c);
    v_max_ = std::max(v_max_, std::sqrt(v2));
  }

  void scale(double f) {
    for (double& a : coef_) a *= f;
    abs_mass_ *= std::abs(f);
  }

  // Adds g(x) to value and grad g(x) to grad (length d); returns a bound on the
  // absolute error of the gradient and writes the value-error bound to value_err.
  double accumulate(const double* x, double& value, double* grad, double& value_err) const {
    const int d = table_->dim();
    const int P = table_->order();
    std::array<double, kMaxDim> u{};
    double u2 = 0.0;
    for (int k = 0; k < d; ++k) {
      u[k] = (x[k] - anchor_(k)) / s_;
      u2 += u[k] * u[k];
    }
    const double damp = std::exp(-u2);
    const double un = std::sqrt(u2);
    const double z = 2.0 * un * v_max_;
    double gerr = 0.0;
    value_err = 0.0;
    if (z > 0.0) {
      // z^n/n! e^{z - |u|^2} for n = P, P+1
      const double lz = std::log(z);
      const double tP = std::exp(P * lz - lgamma_[0] + z - u2);
      const double tP1 = tP * z / (P + 1);
      value_err = abs_mass_ * tP1;
      gerr = abs_mass_ * (2.0 * v_max_ * tP + 2.0 * un * tP1) / s_;
    }
    if (damp == 0.0) return gerr;

    fill_powers(u.data());
    double S = 0.0;
    std::array<double, kMaxDim> dS{};
    for (std::size_t i = 0; i < coef_.size(); ++i) {
      const int* e = table_->exponents(i);
      const double a = coef_[i];
      S += a * monomial(i);
      for (int k = 0; k < d; ++k) {
        if (e[k] == 0) continue;
        double m = e[k] * pow_[k][e[k] - 1];
        for (int q = 0; q < d; ++q)
          if (q != k) m *= pow_[q][e[q]];
        dS[k] += a * m;
      }
    }
    value += damp * S;
    for (int k = 0; k < d; ++k) grad[k] += damp * (dS[k] - 2.0 * u[k] * S) / s_;
    return gerr;
  }

  double abs_mass() const { return abs_mass_; }
  static constexpr int kMaxDim = 3;
  static constexpr int kMaxOrder = 24;

 private:
  void fill_powers(const double* t) const {
    for (int k = 0; k < table_->dim(); ++k) {
      pow_[k][0] = 1.0;
      for (int e = 1; e <= table_->order(); ++e) pow_[k][e] = pow_[k][e - 1] * t[k];
    }
  }
  double monomial(std::size_t i) const {
    const int* e = table_->exponents(i);
    double m = 1.0;
    for (int k = 0; k < table_->dim(); ++k) m *= pow_[k][e[k]];
    return m;
  }

  std::shared_ptr<const MultiIndexTable> table_;
  double s_;
  Vector anchor_;
  std::vector<double> coef_;
  double abs_mass_ = 0.0;
  double v_max_ = 0.0;
  std::array<double, kMaxDim> v_{};
  std::array<double, 1> lgamma_{};
  mutable std::array<std::array<double, kMaxOrder + 1>, kMaxDim> pow_{};
};

// Grid of expansions, one per (width, cell). Cells have side sqrt(2) sigma / 4 so
// every center is within sqrt(d)/8 (scaled units) of its anchor.
class GaussCellGrid {
 public:
  static bool supports(int dim) { return dim >= 1 && dim <= GaussExpansion::kMaxDim; }

  GaussCellGrid(int dim, std::vector<double> widths) : dim_(dim), widths_(std::move(widths)) {
    if (!supports(dim)) throw InputError("gauss expansion supports dimension 1..3 only");
    const int order = dim == 1 ? 16 : 10;
    table_ = std::make_shared<const MultiIndexTable>(dim, order);
  }

  void add(double c, const double* z) {
    for (std::size_t w = 0; w < widths_.size(); ++w) {
      const double h = std::sqrt(2.0) * widths_[w] / 4.0;
      Key key{};
      key[0] = static_cast<std::int64_t>(w);
      Vector anchor(dim_);
      for (int k = 0; k < dim_; ++k) {
        const double cell = std::floor(z[k] / h);
        if (!std::isfinite(cell) || std::abs(cell) > 1e15) throw NumericError("gauss expansion: center out of range");
        key[k + 1] = static_cast<std::int64_t>(cell);
        anchor(k) = (cell + 0.5) * h;
      }
      auto it = cells_.find(key);
      if (it == cells_.end()) it = cells_.emplace(key, GaussExpansion(table_, widths_[w], anchor)).first;
      it->second.add(c, z);
    }
  }

  void scale(double f) {
    for (auto& [k, e] : cells_) e.scale(f);
  }

  // Adds value/gradient; throws if the certified gradient error exceeds tol.
  void accumulate(const double* x, double& value, double* grad, double tol) const {
    double gerr = 0.0, verr_total = 0.0;
    for (const auto& [k, e] : cells_) {
      double verr = 0.0;
      gerr += e.accumulate(x, value, grad, verr);
      verr_total += verr;
    }
    if (gerr > tol || verr_total > tol)
      throw NumericError("gauss expansion: truncation bound " + std::to_string(std::max(gerr, verr_total)) +
                         " exceeds tolerance");
  }

  double abs_mass() const {
    double m = 0.0;
    for (const auto& [k, e] : cells_) m += e.abs_mass();
    return m / static_cast<double>(widths_.size());
  }
  std::size_t cell_count() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

 private:
  using Key = std::array<std::int64_t, GaussExpansion::kMaxDim + 1>;
  int dim_;
  std::vector<double> widths_;
  std::shared_ptr<const MultiIndexTable> table_;
  std::map<Key, GaussExpansion> cells_;
};

}  // namespace ipm
