#include "ipm/divergence.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ipm;

namespace {

const KernelSpec kRbf = KernelSpec::exact_rbf(1.0);

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

TrainConfig escape_cfg(double eta, double lambda) {
  TrainConfig c;
  c.eta_d = c.eta_g = eta;
  c.lambda = lambda;
  return c;
}

// naive F with a fixed, very long series
double naive_residual(double v, double rho, double sigma, double eg, double ed, long terms) {
  double s = 0.0;
  for (long j = 0; j < terms; ++j) {
    const double r = j * v;
    s += std::pow(rho, static_cast<double>(j)) * (-r / (sigma * sigma)) * std::exp(-r * r / (2 * sigma * sigma));
  }
  return v + eg * ed * s;
}

}  // namespace

TEST(Velocity, ResidualLimits) {
  // large v: series negligible
  EXPECT_NEAR(velocity_residual(1e3, 0.999, kRbf, 1e-3, 1e-3), 1e3, 1e-12);
  // rho = 1, v -> 0: F -> -infinity like -eta_g eta_d phi(0) / v
  const double f1 = velocity_residual(1e-4, 1.0, kRbf, 1e-3, 1e-3);
  const double f2 = velocity_residual(1e-5, 1.0, kRbf, 1e-3, 1e-3);
  EXPECT_LT(f2, f1);
  EXPECT_NEAR(f2 * 1e-5, -1e-6, 1e-9);
  // j = 0 term vanishes: agrees with the naive sum from j = 0
  for (double v : {0.01, 0.3, 2.0})
    EXPECT_NEAR(velocity_residual(v, 0.99, kRbf, 0.1, 0.2), naive_residual(v, 0.99, 1.0, 0.1, 0.2, 100000), 1e-14);
  EXPECT_THROW(velocity_residual(-1.0, 0.9, kRbf, 1, 1), InputError);
  EXPECT_THROW(velocity_residual(1.0, 0.9, KernelSpec::rff(1.0, 10, 1), 1, 1), InputError);
}

TEST(Velocity, SolveAndBracket) {
  DivergenceWitness diag;
  const double rho = 1.0 - 1e-3 * 1e-3;
  const double v0 = solve_velocity(rho, kRbf, 1e-3, 1e-3, {}, &diag);
  EXPECT_GT(v0, 0.0);
  EXPECT_LT(std::abs(velocity_residual(v0, rho, kRbf, 1e-3, 1e-3)), 1e-12);
  EXPECT_LT(velocity_residual(v0 * (1 - 1e-6), rho, kRbf, 1e-3, 1e-3), 0.0);
  EXPECT_GT(velocity_residual(v0 * (1 + 1e-6), rho, kRbf, 1e-3, 1e-3), 0.0);
  // small-v asymptotics: v^2 ~ eta_g eta_d * phi(0)
  EXPECT_NEAR(v0, 1e-3, 1e-4);
  EXPECT_GE(diag.sign_changes, 1);
  // strong regularization kills the sign change
  EXPECT_THROW(solve_velocity(0.5, kRbf, 1e-3, 1e-3), InputError);
}

TEST(Velocity, TruncationConverged) {
  const double rho = 1.0 - 1e-6;
  DivergenceOptions tight;
  tight.tail_tol = 1e-30;
  const double a = solve_velocity(rho, kRbf, 1e-3, 1e-3);
  const double b = solve_velocity(rho, kRbf, 1e-3, 1e-3, tight);
  EXPECT_LT(std::abs(a - b), 1e-12);
}

TEST(Witness, DiscriminatorConstruction) {
  const auto w = make_witness(vec2(0.3, -0.2), vec2(1, 1), kRbf, 1e-3, 1e-3, 1e-3);
  EXPECT_NEAR(w.u.norm(), 1.0, 1e-12);
  EXPECT_GT(w.j_max, 1);
  EXPECT_LT(w.tail_bound, 1e-15);
  const auto f = build_divergent_discriminator(w, kRbf, 1e-3);
  // values at the trail centers behave like the geometric weights near the head
  const double at0 = f.eval(w.x0 - w.v0 * w.u);
  EXPECT_LT(at0, 0.0);
  // agreement with the closed form
  for (double t : {-2.0, -0.5, 0.0, 0.4, 3.0}) {
    const Vector x = w.x0 + t * w.u + vec2(0.1 * t, -0.05);
    const double ref = divergent_discriminator_value(w, kRbf, 1e-3, 0, x);
    EXPECT_NEAR(f.eval(x), ref, 1e-13 * std::abs(ref));
  }
  // gradient of f^0 at x0: v0 u / (rho eta_g)
  const Vector g = f.grad(w.x0);
  EXPECT_LT((g - w.v0 / (w.rho * w.eta_g) * w.u).norm(), 1e-10 * g.norm());
  // gradient of f^1 at x0 (after one discriminator step): v0 u / eta_g
  auto f1 = f;
  f1.decay(w.rho);
  f1.add_generated(-1e-3, w.x0.data(), -1);
  EXPECT_LT((f1.grad(w.x0) - w.v0 / w.eta_g * w.u).norm(), 1e-10 * f1.grad(w.x0).norm());
}

TEST(Witness, TruncationTailAhead) {
  // doubling j_max changes evaluations ahead of the trail by < 1e-12
  const auto w = make_witness(vec2(0, 0), vec2(1, 0), kRbf, 1e-3, 1e-3, 1e-3);
  auto w2 = w;
  w2.j_max = 2 * w.j_max;
  for (double t : {-1.0, 0.0, 2.0}) {
    const Vector x = vec2(t, 0.3);
    EXPECT_LT(std::abs(divergent_discriminator_value(w, kRbf, 1e-3, 0, x) -
                       divergent_discriminator_value(w2, kRbf, 1e-3, 0, x)),
              1e-12);
  }
}

TEST(Witness, RecurrenceMatchesClosedForm) {
  const auto w = make_witness(vec2(0, 0), vec2(0.6, 0.8), kRbf, 1e-2, 1e-2, 1e-2);
  auto f = build_divergent_discriminator(w, kRbf, 1e-2);
  f.decay(w.rho);
  f.add_generated(-1e-2, w.x0.data(), -1);
  // after one step the trail holds one more center
  auto w1 = w;
  w1.j_max = w.j_max + 1;
  RandomStream rs(3);
  for (int p = 0; p < 20; ++p) {
    const Vector x = vec2(2 * rs.normal(), 2 * rs.normal());
    EXPECT_NEAR(f.eval(x), divergent_discriminator_value(w1, kRbf, 1e-2, 1, x), 1e-10);
  }
}

TEST(Escape, LinearTrajectory) {
  const double eta = 1e-3, lambda = 1e-3;
  const auto w = make_witness(vec2(0.5, 0.5), vec2(1, 0), kRbf, eta, eta, lambda);
  const auto res = verify_linear_escape(w, kRbf, escape_cfg(eta, lambda), 1000);
  EXPECT_LT(res.max_deviation, 1e-8 * 1000 * w.v0);
  EXPECT_TRUE(res.monotone);
  EXPECT_LT(res.max_angle, 1e-10);
  EXPECT_EQ(res.trajectory.size(), 1001u);

  // any direction
  const auto wr = make_witness(vec2(0.5, 0.5), vec2(std::cos(2.0), std::sin(2.0)), kRbf, eta, eta, lambda);
  EXPECT_LT(verify_linear_escape(wr, kRbf, escape_cfg(eta, lambda), 1000).max_deviation, 1e-8 * 1000 * wr.v0);

  // 10% wrong velocity: deviation keeps growing with k
  const auto bad = verify_linear_escape(w, kRbf, escape_cfg(eta, lambda), 1000, 1.1 * w.v0);
  EXPECT_GT(bad.max_deviation, 1e-3 * 1000 * w.v0);
  double prev = 0.0;
  for (int k = 100; k <= 1000; k += 100) {
    const double dev = (bad.trajectory[k] - (w.x0 + k * w.v0 * w.u)).norm();
    EXPECT_GT(dev, prev);
    prev = dev;
  }
}

TEST(Escape, MultiscaleAndThreeDims) {
  const auto spec = KernelSpec::multiscale({0.5, 2.0});
  Vector x0 = Vector::Zero(3), u = Vector::Zero(3);
  u(2) = 1;
  const auto w = make_witness(x0, u, spec, 1e-2, 1e-2, 1e-2);
  TrainConfig c = escape_cfg(1e-2, 1e-2);
  EXPECT_LT(verify_linear_escape(w, spec, c, 300).max_deviation, 1e-8 * 300 * w.v0);
  c.lambda = 0.02;
  EXPECT_THROW(verify_linear_escape(w, spec, c, 10), InputError);
}
