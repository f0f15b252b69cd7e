#pragma once

#include "ipm/core.hpp"
#include "ipm/distribution.hpp"
#include "ipm/kernels.hpp"
#include "ipm/transport.hpp"

namespace ipm {

// sum_ik p_i p_k K(x_i,x_k) - 2 sum_ij p_i q_j K(x_i,y_j) + sum_jl q_j q_l K(y_j,y_l)
inline double mmd_squared(const DiscreteDistribution& p, const DiscreteDistribution& q, const Kernel& k) {
  require(p.dim() == q.dim() && p.dim() == k.dim(), "mmd: dimension mismatch");
  auto cross = [&](const DiscreteDistribution& a, const DiscreteDistribution& b) {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i)
      for (int j = 0; j < b.size(); ++j) s += a.mass(i) * b.mass(j) * k.eval(a.point(i), b.point(j));
    return s;
  };
  return cross(p, p) - 2.0 * cross(p, q) + cross(q, q);
}

inline double mmd_squared(const DiscreteDistribution& p, const DiscreteDistribution& q, const KernelSpec& spec) {
  require(p.dim() == q.dim(), "mmd: dimension mismatch");
  return mmd_squared(p, q, Kernel(spec, p.dim()));
}

// W2(P_g^k, P_r) / W2(P_g^0, P_r)
inline double normalized_wasserstein(const DiscreteDistribution& pr, const DiscreteDistribution& pg0,
                                     const DiscreteDistribution& pgk) {
  const double w0 = wasserstein2(pg0, pr);
  if (!(w0 > 0.0)) throw InputError("normalized Wasserstein undefined: initial distance is zero");
  return wasserstein2(pgk, pr) / w0;
}

inline double divergence_fraction(const DiscreteDistribution& pg, double threshold = 2.0) {
  int count = 0;
  for (int j = 0; j < pg.size(); ++j)
    if (!(pg.points().col(j).norm() <= threshold)) ++count;  // non-finite counts as diverged
  return static_cast<double>(count) / pg.size();
}

// Single true point, single generated point, discriminator at its fixed point.
inline double converged_generator_loss(const Vector& x0, const Vector& xg, const KernelSpec& spec, double lambda) {
  require(lambda > 0.0, "converged loss needs lambda > 0");
  require(x0.size() == xg.size(), "converged loss: dimension mismatch");
  const Kernel k(spec, static_cast<int>(x0.size()));
  return (k.eval(xg, xg) - k.eval(x0, xg)) / lambda;
}

// L_g = -sum_j q_j f(y_j)
template <class Discriminator>
double generator_loss(const Discriminator& f, const DiscreteDistribution& pg) {
  double s = 0.0;
  for (int j = 0; j < pg.size(); ++j) s -= pg.mass(j) * f.eval(pg.point(j));
  return s;
}

}  // namespace ipm
