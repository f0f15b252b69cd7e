#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace ipm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Raised for malformed or inconsistent inputs (dimension mismatch, bad widths, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a computation cannot produce a trustworthy number.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

inline double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

}  // namespace ipm
