#pragma once

#include <cmath>
#include <optional>
#include <span>

#include "hexsense/field.hpp"
#include "hexsense/lattice.hpp"

namespace hexsense {

enum class InversionFailure {
  None,
  NonPositiveMeasurement,  // some mu_i <= 0, possible under noise
  WidthDegenerate,         // mu2*mu3*mu4 >= mu1^3 (log nonpositive or below guard)
};

inline const char* inversion_failure_name(InversionFailure f) {
  switch (f) {
    case InversionFailure::None: return "none";
    case InversionFailure::NonPositiveMeasurement: return "nonpositive_measurement";
    case InversionFailure::WidthDegenerate: return "width_degenerate";
  }
  return "unknown";
}

struct InversionOutcome {
  InversionFailure failure = InversionFailure::None;
  std::optional<GaussianParams> params;

  bool ok() const { return failure == InversionFailure::None; }
};

/// Four-point inversion: recovers (c1, c2, m1, m2) in the canonical frame from
/// one measurement quad. Requires all mu_i > 0 and mu2*mu3*mu4 < mu1^3; the
/// width log is additionally guarded at 1e-12 so a near-degenerate quad cannot
/// return an effectively infinite c2.
inline InversionOutcome try_invert(const MeasurementQuad& quad) noexcept {
  const auto& mu = quad.mu;
  for (double m : mu)
    if (!(m > 0.0)) return {InversionFailure::NonPositiveMeasurement, std::nullopt};

  const double log1 = std::log(mu[0]), log2 = std::log(mu[1]);
  const double log3 = std::log(mu[2]), log4 = std::log(mu[3]);
  const double width_log = 3.0 * log1 - log2 - log3 - log4;
  if (!(width_log >= 1e-12)) return {InversionFailure::WidthDegenerate, std::nullopt};

  const double l = quad.edge;
  const double c2 = 3.0 * l * l / width_log;
  const double m1 = c2 / (2.0 * l * std::sqrt(3.0)) * (log4 - log3);
  const double m2 = c2 / (6.0 * l) * (2.0 * log2 - log3 - log4);
  const double c1 = mu[0] * std::exp((m1 * m1 + m2 * m2) / c2);
  if (!std::isfinite(c1) || !std::isfinite(m1) || !std::isfinite(m2))
    return {InversionFailure::WidthDegenerate, std::nullopt};
  return {InversionFailure::None, GaussianParams(c1, c2, m1, m2)};
}

/// Throwing form of try_invert.
inline GaussianParams invert_measurements(const MeasurementQuad& quad) {
  auto out = try_invert(quad);
  if (out.ok()) return *out.params;
  if (out.failure == InversionFailure::NonPositiveMeasurement)
    throw Error(ErrorCode::NonPositiveMeasurement, "some measurement is not positive");
  throw Error(ErrorCode::WidthDegenerate, "mu2*mu3*mu4 >= mu1^3 (width log nonpositive)");
}

/// One node's recovered parameters. `params_local` has the center relative to
/// the node in its canonical frame; `params_global` the same Gaussian with the
/// center mapped back to global coordinates. c1 and c2 are isometry-invariant
/// and identical between the two.
struct LocalEstimate {
  std::size_t node = 0;
  InversionFailure failure = InversionFailure::None;
  std::optional<GaussianParams> params_global;
  std::optional<GaussianParams> params_local;

  bool valid() const { return failure == InversionFailure::None; }
};

/// Estimates the field parameters at one inner node from its own measurement
/// and its three neighbors'. `values` holds one measurement per network node.
/// Inversion failures are embedded, not thrown, so noisy runs keep going.
inline LocalEstimate estimate_at_node(const HexNetwork& net, std::size_t node,
                                      std::span<const double> values) {
  const LocalFrame frame = local_frame(net, node);  // throws NotInnerNode
  if (values.size() != net.nodes.size())
    throw Error(ErrorCode::InvalidParams, "one measurement per node required");

  const MeasurementQuad quad(
      {values[node], values[frame.neighbor_labels[0]], values[frame.neighbor_labels[1]],
       values[frame.neighbor_labels[2]]},
      net.edge);

  LocalEstimate est;
  est.node = node;
  auto out = try_invert(quad);
  est.failure = out.failure;
  if (out.ok()) {
    est.params_local = *out.params;
    const Vec2 center_global = frame.apply_inverse(out.params->center());
    est.params_global =
        GaussianParams(out.params->c1, out.params->c2, center_global.x, center_global.y);
  }
  return est;
}

}  // namespace hexsense
