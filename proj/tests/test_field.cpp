#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hexsense/field.hpp"

using namespace hexsense;
using Catch::Approx;

TEST_CASE("eval matches the defining expression") {
  const GaussianParams unit{1.0, 1.0, 0.0, 0.0};
  CHECK(eval(unit, {0.0, 0.0}) == 1.0);  // value at the center is exactly c1
  CHECK(eval(unit, {1.0, 0.0}) == Approx(std::exp(-1.0)).epsilon(1e-14));

  // direct substitution, written out independently of eval's internals
  const GaussianParams p{2.0, 0.5, 0.3, -0.2};
  const double expected = 2.0 * std::exp(-((1.0 - 0.3) * (1.0 - 0.3) +
                                           (1.0 + 0.2) * (1.0 + 0.2)) / 0.5);
  CHECK(eval(p, {1.0, 1.0}) == Approx(expected).epsilon(1e-14));
  CHECK(eval(p, {1.0, 1.0}) > 0.0);
}

TEST_CASE("eval is translation invariant up to rounding") {
  std::mt19937_64 eng(123);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double m1 = u(eng), m2 = u(eng), px = u(eng), py = u(eng);
    const double vx = u(eng), vy = u(eng);
    const GaussianParams a{1.7, 0.9, m1, m2};
    const GaussianParams b{1.7, 0.9, m1 + vx, m2 + vy};
    const double va = eval(a, {px, py});
    const double vb = eval(b, {px + vx, py + vy});
    CHECK(va == Approx(vb).epsilon(1e-12));
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(GaussianParams(0.0, 1.0, 0.0, 0.0), Error);
  CHECK_THROWS_AS(GaussianParams(1.0, -2.0, 0.0, 0.0), Error);
  CHECK_THROWS_AS(GaussianParams(1.0, 1.0, std::nan(""), 0.0), Error);
}

TEST_CASE("forward map at a centered field") {
  const auto quad = forward_phi({1.0, 1.0, 0.0, 0.0}, 1.0);
  CHECK(quad.mu[0] == 1.0);
  CHECK(quad.mu[2] == quad.mu[3]);  // mirror-symmetric pair, bitwise
  CHECK(quad.mu[1] == Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(quad.mu[2] == Approx(quad.mu[1]).epsilon(1e-14));
}

TEST_CASE("forward map with the center displaced toward node 2") {
  // at m = (0, l/2) the center is equidistant from nodes 1 and 2
  const auto mid = forward_phi({1.0, 1.0, 0.0, 0.5}, 1.0);
  CHECK(mid.mu[1] == mid.mu[0]);
  CHECK(mid.mu[2] == mid.mu[3]);  // m1 = 0 keeps the mirror symmetry exact

  const auto quad = forward_phi({1.0, 1.0, 0.0, 0.7}, 1.0);
  CHECK(quad.mu[1] > quad.mu[0]);
  CHECK(quad.mu[2] == quad.mu[3]);
}

TEST_CASE("forward map composes eval at the canonical positions") {
  const GaussianParams p{2.0, 0.5, 0.3, -0.2};
  const double l = 0.8;
  const auto quad = forward_phi(p, l);
  const auto pos = canonical_sensor_positions(l);
  for (int i = 0; i < 4; ++i) CHECK(quad.mu[i] == eval(p, pos[i]));
}

namespace {

// Hand-derived partial derivatives of the field, the oracle for jacobian_phi.
Mat4 analytic_jacobian(const GaussianParams& p, double edge) {
  const auto pos = canonical_sensor_positions(edge);
  Mat4 jac{};
  for (int i = 0; i < 4; ++i) {
    const double f = eval(p, pos[i]);
    const double dx = pos[i].x - p.m1;
    const double dy = pos[i].y - p.m2;
    const double r2 = dx * dx + dy * dy;
    jac[i][0] = f / p.c1;
    jac[i][1] = f * r2 / (p.c2 * p.c2);
    jac[i][2] = f * 2.0 * dx / p.c2;
    jac[i][3] = f * 2.0 * dy / p.c2;
  }
  return jac;
}

}  // namespace

TEST_CASE("finite-difference jacobian against analytic partials") {
  const GaussianParams p{1.0, 1.0, 0.2, 0.1};
  const auto fd = jacobian_phi(p, 1.0, 1e-6);
  const auto exact = analytic_jacobian(p, 1.0);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const double scale = std::max(std::abs(exact[r][c]), 1e-3);
      CHECK(std::abs(fd[r][c] - exact[r][c]) / scale < 1e-6);
    }
  }
}

TEST_CASE("jacobian amplitude column is the forward map over c1") {
  const GaussianParams p{2.0, 0.7, 0.4, -0.3};
  const auto jac = jacobian_phi(p, 1.0);
  const auto quad = forward_phi(p, 1.0);
  for (int r = 0; r < 4; ++r)
    CHECK(jac[r][0] == Approx(quad.mu[r] / p.c1).epsilon(1e-8));
}

TEST_CASE("jacobian center columns vanish in the first row at m = 0") {
  const auto jac = jacobian_phi({1.0, 1.0, 0.0, 0.0}, 1.0);
  CHECK(jac[0][2] == 0.0);  // central difference of an even function
  CHECK(jac[0][3] == 0.0);
}

TEST_CASE("zero noise leaves the quad untouched") {
  const auto quad = forward_phi({1.0, 1.0, 0.3, 0.1}, 1.0);
  const auto noisy = add_noise(quad, NoiseModel{0.0, 99});
  for (int i = 0; i < 4; ++i) CHECK(noisy.mu[i] == quad.mu[i]);
}

TEST_CASE("noise is deterministic under the seed") {
  const auto quad = forward_phi({1.0, 1.0, 0.3, 0.1}, 1.0);
  const auto a = add_noise(quad, NoiseModel{0.01, 7});
  const auto b = add_noise(quad, NoiseModel{0.01, 7});
  for (int i = 0; i < 4; ++i) CHECK(a.mu[i] == b.mu[i]);
  const auto c = add_noise(quad, NoiseModel{0.01, 8});
  CHECK(a.mu[0] != c.mu[0]);
}

TEST_CASE("noise stream sample moments") {
  const std::size_t n = 100000;
  const double sigma = 0.01;
  NoiseStream stream(NoiseModel{sigma, 2024});
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = stream.draw();
    sum += d;
    sumsq += d * d;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));
  CHECK(var == Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("negative sigma is rejected") {
  CHECK_THROWS_AS(NoiseStream(NoiseModel{-0.1, 0}), Error);
}
