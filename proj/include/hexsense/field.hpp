#pragma once

#include <array>
#include <cmath>

#include "hexsense/common.hpp"
#include "hexsense/rng.hpp"

namespace hexsense {

/// Parameters of the planar Gaussian bump C1 * exp(-|x - m|^2 / C2):
/// amplitude C1 > 0, squared width C2 > 0, center m = (m1, m2).
struct GaussianParams {
  double c1;
  double c2;
  double m1;
  double m2;

  GaussianParams(double c1_, double c2_, double m1_, double m2_)
      : c1(c1_), c2(c2_), m1(m1_), m2(m2_) {
    if (!(c1 > 0.0) || !std::isfinite(c1))
      throw Error(ErrorCode::InvalidParams, "amplitude c1 must be positive and finite");
    if (!(c2 > 0.0) || !std::isfinite(c2))
      throw Error(ErrorCode::InvalidParams, "squared width c2 must be positive and finite");
    if (!std::isfinite(m1) || !std::isfinite(m2))
      throw Error(ErrorCode::InvalidParams, "center coordinates must be finite");
  }

  Vec2 center() const { return {m1, m2}; }
  double mod_m() const { return std::hypot(m1, m2); }
  /// Full-quadrant center bearing; atan2, not arctan(m2/m1).
  double angle() const { return std::atan2(m2, m1); }
};

/// Field value at `point`.
inline double eval(const GaussianParams& p, Vec2 point) {
  const double dx = point.x - p.m1;
  const double dy = point.y - p.m2;
  return p.c1 * std::exp(-(dx * dx + dy * dy) / p.c2);
}

/// Sensor positions of the canonical inner-node frame: the node itself at the
/// origin, one neighbor straight up, two neighbors down-left and down-right.
inline std::array<Vec2, 4> canonical_sensor_positions(double edge) {
  const double s = std::sqrt(3.0) / 2.0 * edge;
  return {Vec2{0.0, 0.0}, Vec2{0.0, edge}, Vec2{-s, -edge / 2.0}, Vec2{s, -edge / 2.0}};
}

/// The four measurements mu1..mu4 taken in the canonical frame, plus the edge
/// length they were taken at. mu1 is the center node; mu2 up; mu3 down-left;
/// mu4 down-right.
struct MeasurementQuad {
  std::array<double, 4> mu;
  double edge;

  MeasurementQuad(std::array<double, 4> mu_, double edge_) : mu(mu_), edge(edge_) {
    for (double m : mu)
      if (!std::isfinite(m))
        throw Error(ErrorCode::InvalidParams, "measurements must be finite");
    if (!(edge > 0.0) || !std::isfinite(edge))
      throw Error(ErrorCode::InvalidParams, "edge length must be positive");
  }
};

/// Forward map: field parameters -> the four canonical measurements.
inline MeasurementQuad forward_phi(const GaussianParams& p, double edge) {
  const auto pos = canonical_sensor_positions(edge);
  return MeasurementQuad(
      {eval(p, pos[0]), eval(p, pos[1]), eval(p, pos[2]), eval(p, pos[3])}, edge);
}

using Mat4 = std::array<std::array<double, 4>, 4>;

namespace detail {

// Raw evaluation without parameter validation; finite-difference probes may
// step outside the valid domain for extreme inputs.
inline std::array<double, 4> phi_raw(double c1, double c2, double m1, double m2,
                                     double edge) {
  const auto pos = canonical_sensor_positions(edge);
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) {
    const double dx = pos[i].x - m1;
    const double dy = pos[i].y - m2;
    out[i] = c1 * std::exp(-(dx * dx + dy * dy) / c2);
  }
  return out;
}

}  // namespace detail

/// Central finite-difference Jacobian of the forward map. Rows follow mu1..mu4,
/// columns the parameter order (c1, c2, m1, m2). Step is relative:
/// h_k = step * max(|p_k|, 1).
inline Mat4 jacobian_phi(const GaussianParams& p, double edge, double step = 1e-6) {
  if (!(edge > 0.0)) throw Error(ErrorCode::InvalidParams, "edge length must be positive");
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidParams, "step must be positive");
  const std::array<double, 4> base{p.c1, p.c2, p.m1, p.m2};
  Mat4 jac{};
  for (int k = 0; k < 4; ++k) {
    const double h = step * std::max(std::abs(base[k]), 1.0);
    auto hi = base, lo = base;
    hi[k] += h;
    lo[k] -= h;
    const auto fhi = detail::phi_raw(hi[0], hi[1], hi[2], hi[3], edge);
    const auto flo = detail::phi_raw(lo[0], lo[1], lo[2], lo[3], edge);
    for (int r = 0; r < 4; ++r) jac[r][k] = (fhi[r] - flo[r]) / (2.0 * h);
  }
  return jac;
}

/// Additive measurement noise: std deviation sigma, reproducible under seed.
struct NoiseModel {
  double sigma;
  std::uint64_t seed;
};

/// Stateful noise stream for a whole experiment; draws are consumed in fixed
/// order (mu1..mu4 per quad, node index order in the harness) so runs with the
/// same seed are bit-reproducible.
class NoiseStream {
 public:
  explicit NoiseStream(const NoiseModel& model)
      : sigma_(model.sigma), sampler_(model.seed) {
    if (!(model.sigma >= 0.0) || !std::isfinite(model.sigma))
      throw Error(ErrorCode::InvalidParams, "noise sigma must be nonnegative");
  }

  double draw() { return sigma_ * sampler_.normal(); }
  double sigma() const { return sigma_; }

 private:
  double sigma_;
  GaussianSampler sampler_;
};

/// Adds one i.i.d. Gaussian deviate per measurement, in mu1..mu4 order.
inline MeasurementQuad add_noise(const MeasurementQuad& quad, NoiseStream& stream) {
  auto mu = quad.mu;
  for (double& m : mu) m += stream.draw();
  return MeasurementQuad(mu, quad.edge);
}

inline MeasurementQuad add_noise(const MeasurementQuad& quad, const NoiseModel& model) {
  NoiseStream stream(model);
  return add_noise(quad, stream);
}

}  // namespace hexsense
