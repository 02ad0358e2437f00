#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hexsense/estimator.hpp"
#include "hexsense/field.hpp"

namespace hexsense {

enum class VarianceSource { ClosedForm, NumericOracle, MonteCarlo };

/// Which printed variance family to evaluate. The published S(l;C2) carries
/// exp(2|m|/C2) where the (DPhi)^-1 derivation gives exp(2|m|^2/C2), and the
/// published S(l;C1) carries a global 9/l^4 where the derivation gives
/// 1/(9 l^4). OracleCorrected uses the derived forms, which agree with the
/// numeric oracle to machine precision; AsPrinted reproduces the text.
enum class ClosedFormVariant { OracleCorrected, AsPrinted };

enum class VarianceChannel { C1, C2, ModM, Angle };

inline const char* variance_channel_name(VarianceChannel c) {
  switch (c) {
    case VarianceChannel::C1: return "c1";
    case VarianceChannel::C2: return "c2";
    case VarianceChannel::ModM: return "modm";
    case VarianceChannel::Angle: return "angle";
  }
  return "unknown";
}

/// First-order error variances of the four estimated quantities under i.i.d.
/// additive measurement noise of variance sigma^2. Entries may be +inf for
/// degenerate geometry (|m| = 0 for the polar channels); downstream fusion
/// treats +inf as zero weight.
struct VarianceSet {
  double var_c1 = 0.0;
  double var_c2 = 0.0;
  double var_mod_m = 0.0;
  double var_angle = 0.0;
  VarianceSource source = VarianceSource::ClosedForm;
  double discard_rate = 0.0;  // Monte Carlo only

  double channel(VarianceChannel c) const {
    switch (c) {
      case VarianceChannel::C1: return var_c1;
      case VarianceChannel::C2: return var_c2;
      case VarianceChannel::ModM: return var_mod_m;
      case VarianceChannel::Angle: return var_angle;
    }
    return std::numeric_limits<double>::quiet_NaN();
  }
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(sum coef_k * exp(arg_k)) for nonnegative coefficients, overflow-safe.
inline double log_sum_exp(const std::vector<std::pair<double, double>>& terms) {
  double peak = -kInf;
  for (auto [coef, arg] : terms)
    if (coef > 0.0) peak = std::max(peak, std::log(coef) + arg);
  if (peak == -kInf) return -kInf;
  double acc = 0.0;
  for (auto [coef, arg] : terms)
    if (coef > 0.0) acc += std::exp(std::log(coef) + arg - peak);
  return peak + std::log(acc);
}

}  // namespace detail

/// Closed-form error variances S(l; c1), S(l; c2), S(l; |m|), S(l; angle).
/// Evaluated in log space so extreme parameter values saturate to +inf instead
/// of producing NaN.
inline VarianceSet closed_form_variances(
    double edge, const GaussianParams& p, double sigma2,
    ClosedFormVariant variant = ClosedFormVariant::OracleCorrected) {
  if (!(edge > 0.0)) throw Error(ErrorCode::InvalidParams, "edge length must be positive");
  if (!(sigma2 >= 0.0)) throw Error(ErrorCode::InvalidParams, "sigma2 must be nonnegative");
  VarianceSet out;
  out.source = VarianceSource::ClosedForm;
  if (sigma2 == 0.0) return out;  // sigma^2 is a global factor

  const double l = edge, c1 = p.c1, c2 = p.c2, m1 = p.m1, m2 = p.m2;
  const double s3 = std::sqrt(3.0);
  const double mm2 = m1 * m1 + m2 * m2;
  const double mod_m = std::sqrt(mm2);
  const double a2 = 2.0 * l * (l - 2.0 * m2) / c2;
  const double a3 = 2.0 * l * (l + s3 * m1 + m2) / c2;
  const double a4 = 2.0 * l * (l - s3 * m1 + m2) / c2;
  const double log_s2 = std::log(sigma2);
  const double log_l = std::log(l);

  const double pref_c2 = (variant == ClosedFormVariant::AsPrinted)
                             ? 2.0 * mod_m / c2    // as printed in the text
                             : 2.0 * mm2 / c2;     // derivation / oracle
  out.var_c2 = std::exp(
      log_s2 + pref_c2 + 4.0 * std::log(c2) - std::log(9.0) - 2.0 * std::log(c1) -
      4.0 * log_l +
      detail::log_sum_exp({{9.0, 0.0}, {1.0, a2}, {1.0, a3}, {1.0, a4}}));

  auto square = [](double v) { return v * v; };
  double log_pref_c1 = log_s2 + 2.0 * mm2 / c2 - std::log(9.0) - 4.0 * log_l;
  if (variant == ClosedFormVariant::AsPrinted)
    log_pref_c1 += std::log(81.0);  // printed prefactor is 9/l^4, not 1/(9 l^4)
  out.var_c1 = std::exp(
      log_pref_c1 +
      detail::log_sum_exp({{9.0 * square(mm2 - l * l), 0.0},
                           {square(mm2 + 2.0 * l * m2), a2},
                           {square(mm2 - l * (s3 * m1 + m2)), a3},
                           {square(mm2 + l * (s3 * m1 - m2)), a4}}));

  if (mm2 == 0.0) {
    out.var_mod_m = detail::kInf;
    out.var_angle = detail::kInf;
    return out;
  }

  const double log_common =
      log_s2 + 2.0 * mm2 / c2 + 2.0 * std::log(c2) - std::log(36.0) - 2.0 * std::log(c1);
  out.var_mod_m = std::exp(
      log_common - 4.0 * log_l - std::log(mm2) +
      detail::log_sum_exp({{36.0 * square(mm2), 0.0},
                           {square(2.0 * mm2 + 2.0 * l * m2), a2},
                           {square(2.0 * mm2 - l * (s3 * m1 + m2)), a3},
                           {square(2.0 * mm2 + l * (s3 * m1 - m2)), a4}}));
  out.var_angle = std::exp(
      log_common - 2.0 * log_l - 2.0 * std::log(mm2) +
      detail::log_sum_exp({{4.0 * m1 * m1, a2},
                           {square(m1 - s3 * m2), a3},
                           {square(m1 + s3 * m2), a4}}));
  return out;
}

namespace detail {

// Gauss-Jordan inverse with partial pivoting; returns false on a zero pivot.
inline bool invert4x4(Mat4 a, Mat4& inv) {
  inv = {{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) return false;
    std::swap(a[piv], a[col]);
    std::swap(inv[piv], inv[col]);
    const double d = a[col][col];
    for (int c = 0; c < 4; ++c) {
      a[col][c] /= d;
      inv[col][c] /= d;
    }
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (int c = 0; c < 4; ++c) {
        a[r][c] -= f * a[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  for (auto& row : inv)
    for (double v : row)
      if (!std::isfinite(v)) return false;
  return true;
}

inline double norm_inf(const Mat4& m) {
  double best = 0.0;
  for (const auto& row : m) {
    double s = 0.0;
    for (double v : row) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

}  // namespace detail

/// Raw first-order variances of (c1, c2, m1, m2): sigma^2 * sum_j A[k][j]^2
/// with A = (DPhi)^-1 from the finite-difference Jacobian.
inline std::array<double, 4> oracle_parameter_variances(double edge,
                                                        const GaussianParams& p,
                                                        double sigma2,
                                                        double fd_step = 1e-6) {
  const Mat4 jac = jacobian_phi(p, edge, fd_step);
  Mat4 inv;
  if (!detail::invert4x4(jac, inv))
    throw Error(ErrorCode::SingularJacobian, "forward-map Jacobian is singular");
  const double cond = detail::norm_inf(jac) * detail::norm_inf(inv);
  if (!(cond <= 1e12))
    throw Error(ErrorCode::SingularJacobian,
                "Jacobian condition number " + std::to_string(cond) + " exceeds 1e12");
  std::array<double, 4> out{};
  for (int k = 0; k < 4; ++k) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += inv[k][j] * inv[k][j];
    out[k] = sigma2 * s;
  }
  return out;
}

/// Numeric oracle for the closed forms: propagates unit measurement errors
/// through (DPhi)^-1 and chains the polar map (|m|, angle) through the m rows.
inline VarianceSet numeric_oracle_variances(double edge, const GaussianParams& p,
                                            double sigma2, double fd_step = 1e-6) {
  if (!(sigma2 >= 0.0)) throw Error(ErrorCode::InvalidParams, "sigma2 must be nonnegative");
  VarianceSet out;
  out.source = VarianceSource::NumericOracle;
  if (sigma2 == 0.0) {
    // still surfaces SingularJacobian for uninformative geometry
    (void)oracle_parameter_variances(edge, p, 1.0, fd_step);
    return out;
  }

  const Mat4 jac = jacobian_phi(p, edge, fd_step);
  Mat4 inv;
  if (!detail::invert4x4(jac, inv))
    throw Error(ErrorCode::SingularJacobian, "forward-map Jacobian is singular");
  const double cond = detail::norm_inf(jac) * detail::norm_inf(inv);
  if (!(cond <= 1e12))
    throw Error(ErrorCode::SingularJacobian,
                "Jacobian condition number " + std::to_string(cond) + " exceeds 1e12");

  auto row_sumsq = [&](int k) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += inv[k][j] * inv[k][j];
    return s;
  };
  out.var_c1 = sigma2 * row_sumsq(0);
  out.var_c2 = sigma2 * row_sumsq(1);

  const double mod_m = p.mod_m();
  if (mod_m == 0.0) {
    out.var_mod_m = detail::kInf;
    out.var_angle = detail::kInf;
    return out;
  }
  const Vec2 grad_mod{p.m1 / mod_m, p.m2 / mod_m};
  const Vec2 grad_ang{-p.m2 / (mod_m * mod_m), p.m1 / (mod_m * mod_m)};
  double acc_mod = 0.0, acc_ang = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double dm1 = inv[2][j], dm2 = inv[3][j];
    const double dmod = grad_mod.x * dm1 + grad_mod.y * dm2;
    const double dang = grad_ang.x * dm1 + grad_ang.y * dm2;
    acc_mod += dmod * dmod;
    acc_ang += dang * dang;
  }
  out.var_mod_m = sigma2 * acc_mod;
  out.var_angle = sigma2 * acc_ang;
  return out;
}

/// Wraps an angle difference into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kPi = 3.14159265358979323846;
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a = kPi;
  return a;
}

/// Empirical validation: repeats noisy measurement + inversion and returns the
/// sample second moments of (c1, c2, |m|, angle) about the true values.
/// Invalid inversions are discarded; the discard rate is reported. Throws
/// TooFewValidSamples when fewer than half of the trials invert.
inline VarianceSet monte_carlo_variances(double edge, const GaussianParams& p,
                                         double sigma, std::size_t trials,
                                         std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::InvalidParams, "trials must be >= 1");
  const MeasurementQuad clean = forward_phi(p, edge);
  NoiseStream stream(NoiseModel{sigma, seed});
  const double true_mod = p.mod_m();
  const double true_ang = p.angle();

  std::size_t n_valid = 0;
  double acc_c1 = 0.0, acc_c2 = 0.0, acc_mod = 0.0, acc_ang = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const MeasurementQuad noisy = add_noise(clean, stream);
    const auto inverted = try_invert(noisy);
    if (!inverted.ok()) continue;
    ++n_valid;
    const auto& q = *inverted.params;
    acc_c1 += (q.c1 - p.c1) * (q.c1 - p.c1);
    acc_c2 += (q.c2 - p.c2) * (q.c2 - p.c2);
    const double dmod = q.mod_m() - true_mod;
    const double dang = wrap_angle(q.angle() - true_ang);
    acc_mod += dmod * dmod;
    acc_ang += dang * dang;
  }
  if (2 * n_valid < trials)
    throw Error(ErrorCode::TooFewValidSamples,
                std::to_string(n_valid) + " of " + std::to_string(trials) +
                    " trials inverted successfully");

  VarianceSet out;
  out.source = VarianceSource::MonteCarlo;
  out.discard_rate = 1.0 - static_cast<double>(n_valid) / static_cast<double>(trials);
  const auto n = static_cast<double>(n_valid);
  out.var_c1 = acc_c1 / n;
  out.var_c2 = acc_c2 / n;
  out.var_mod_m = acc_mod / n;
  out.var_angle = acc_ang / n;
  return out;
}

}  // namespace hexsense
