#pragma once

#include "ipm/core.hpp"

#include <string>

namespace ipm {

// Weighted point set; points are stored column-wise (d x n).
class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;

  DiscreteDistribution(Matrix points, Vector masses) : points_(std::move(points)), masses_(std::move(masses)) {
    require(points_.cols() >= 1 && points_.rows() >= 1, "distribution needs at least one point of dimension >= 1");
    require(masses_.size() == points_.cols(), "distribution: one mass per point required");
    require(points_.allFinite(), "distribution: non-finite coordinate");
    for (Eigen::Index j = 0; j < masses_.size(); ++j)
      require(masses_(j) > 0.0 && std::isfinite(masses_(j)), "distribution: masses must be positive");
    masses_ /= masses_.sum();
  }

  // Masses kept as given. Used for one isolated region of a larger distribution,
  // whose local masses need not sum to one.
  static DiscreteDistribution sub_distribution(Matrix points, Vector masses) {
    DiscreteDistribution out(points, masses);
    out.masses_ = std::move(masses);
    return out;
  }

  static DiscreteDistribution uniform(Matrix points) {
    const Eigen::Index n = points.cols();
    return DiscreteDistribution(std::move(points), Vector::Constant(n, 1.0));
  }

  int dim() const { return static_cast<int>(points_.rows()); }
  int size() const { return static_cast<int>(points_.cols()); }
  const Matrix& points() const { return points_; }
  const Vector& masses() const { return masses_; }
  Vector point(int j) const { return points_.col(j); }
  double mass(int j) const { return masses_(j); }

  // Same masses, new locations. Masses are never touched by the dynamics.
  DiscreteDistribution with_points(Matrix points) const {
    require(points.rows() == points_.rows() && points.cols() == points_.cols(), "with_points: shape mismatch");
    DiscreteDistribution out;
    out.points_ = std::move(points);
    out.masses_ = masses_;
    return out;
  }

 private:
  Matrix points_;
  Vector masses_;
};

}  // namespace ipm
