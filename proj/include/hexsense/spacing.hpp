#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "hexsense/sensitivity.hpp"

namespace hexsense {

/// Outcome of the spacing optimization for one variance channel.
struct SpacingResult {
  double l_opt = 0.0;
  double s_at_opt = 0.0;
  VarianceChannel channel = VarianceChannel::C2;
  std::pair<double, double> bracket{0.0, 0.0};  // scanned interval
  std::vector<std::pair<double, double>> local_minima;  // (l, S), ascending in l
};

struct SpacingOptions {
  std::size_t grid_points = 2000;
  double lo_factor = 1e-2;  // scan interval [lo_factor * L, hi_factor * L],
  double hi_factor = 20.0;  // L = sqrt(c2) + |m|
  double golden_tol = 1e-10;  // relative interval width at termination
};

namespace detail {

// Golden-section minimization on [a, b]; assumes a bracketed minimum.
inline std::pair<double, double> golden_section(const std::function<double(double)>& f,
                                                double a, double b, double tol_rel) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while ((b - a) > tol_rel * (std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? std::pair{c, fc} : std::pair{d, fd};
}

}  // namespace detail

/// Global minimum of S(l; channel) over l > 0 by dense log-spaced grid scan
/// followed by golden-section refinement of every grid-local minimum. The
/// functions have several local minima and argmin discontinuities, so a single
/// local descent is not reliable. sigma2 scales the reported value only; the
/// argmin is independent of it (and of c1).
inline SpacingResult minimize_spacing(VarianceChannel channel, const GaussianParams& p,
                                      double sigma2, const SpacingOptions& opts = {}) {
  if (!(sigma2 >= 0.0)) throw Error(ErrorCode::InvalidParams, "sigma2 must be nonnegative");
  const double scale = std::sqrt(p.c2) + p.mod_m();
  const double lo = opts.lo_factor * scale;
  const double hi = opts.hi_factor * scale;
  const std::size_t n = std::max<std::size_t>(opts.grid_points, 8);

  auto shape = [&](double l) {  // sigma^2 = 1: global factor
    return closed_form_variances(l, p, 1.0).channel(channel);
  };

  std::vector<double> grid(n), value(n);
  const double log_step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = lo * std::exp(log_step * static_cast<double>(i));
    value[i] = shape(grid[i]);
  }

  SpacingResult res;
  res.channel = channel;
  res.bracket = {lo, hi};

  std::vector<std::pair<double, double>> minima;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!std::isfinite(value[i])) continue;
    if (value[i] <= value[i - 1] && value[i] <= value[i + 1]) {
      minima.push_back(detail::golden_section(shape, grid[i - 1], grid[i + 1], opts.golden_tol));
    }
  }
  if (minima.empty()) {
    // S diverges at both ends, so a finite probe implies an interior minimum;
    // fall back to refining around the best grid point.
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (std::isfinite(value[i]) && (best == n || value[i] < value[best])) best = i;
    if (best == n)
      throw Error(ErrorCode::NoFiniteValue,
                  std::string("S(l; ") + variance_channel_name(channel) +
                      ") is not finite anywhere on the scan interval");
    const std::size_t a = best > 0 ? best - 1 : best;
    const std::size_t b = best + 1 < n ? best + 1 : best;
    minima.push_back(detail::golden_section(shape, grid[a], grid[b], opts.golden_tol));
  }

  std::sort(minima.begin(), minima.end());
  for (const auto& m : minima) {
    if (!res.local_minima.empty() &&
        std::abs(m.first - res.local_minima.back().first) <= 1e-6 * m.first) {
      if (m.second < res.local_minima.back().second) res.local_minima.back() = m;
      continue;
    }
    res.local_minima.push_back(m);
  }

  const auto best = std::min_element(
      res.local_minima.begin(), res.local_minima.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  res.l_opt = best->first;
  res.s_at_opt = sigma2 * best->second;
  for (auto& m : res.local_minima) m.second *= sigma2;
  return res;
}

/// The unique root l > sqrt(c2) of (l^2/c2 - 1) e^{2 l^2/c2} = 3: the
/// stationary-point condition of S(l; c2) at m = 0. Bisection on
/// [sqrt(c2), 2 sqrt(c2)]; the root is about 1.11691 sqrt(c2).
inline double canonical_root(double c2) {
  if (!(c2 > 0.0)) throw Error(ErrorCode::InvalidParams, "c2 must be positive");
  const double s = std::sqrt(c2);
  double lo = s, hi = 2.0 * s;
  auto f = [&](double l) { return (l * l / c2 - 1.0) * std::exp(2.0 * l * l / c2) - 3.0; };
  // f(lo) = -3, f(hi) = 3 e^8 - 3 > 0
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Bounds sqrt(c2) - |m| < l_opt(c2) < sqrt(2) sqrt(c2) + |m|. The lower bound
/// may be nonpositive (vacuous) for |m| >= sqrt(c2).
inline std::pair<double, double> prop2_bounds(double c2, double mod_m) {
  if (!(c2 > 0.0)) throw Error(ErrorCode::InvalidParams, "c2 must be positive");
  if (!(mod_m >= 0.0)) throw Error(ErrorCode::InvalidParams, "|m| must be nonnegative");
  const double s = std::sqrt(c2);
  return {s - mod_m, std::sqrt(2.0) * s + mod_m};
}

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;

  double at(std::size_t i) const {
    if (count <= 1) return lo;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
};

struct SweepPoint {
  double m1 = 0.0;
  double m2 = 0.0;
  double l_opt = std::numeric_limits<double>::quiet_NaN();
  double s_at_opt = std::numeric_limits<double>::quiet_NaN();
};

/// l_opt over a grid of center positions, heat-map ready. Points where the
/// channel has no finite value (|m| = 0 for the polar channels) carry NaN.
/// Discontinuities in the argmin are expected and preserved. c1 has no effect
/// on any argmin and is fixed to 1 internally.
inline std::vector<SweepPoint> sweep_lopt_map(VarianceChannel channel, GridSpec m1_grid,
                                              GridSpec m2_grid, double c2, double sigma2,
                                              const SpacingOptions& opts = {}) {
  if (m1_grid.count == 0 || m2_grid.count == 0)
    throw Error(ErrorCode::InvalidParams, "sweep grid must be nonempty");
  std::vector<SweepPoint> out;
  out.reserve(m1_grid.count * m2_grid.count);
  for (std::size_t i = 0; i < m1_grid.count; ++i) {
    for (std::size_t j = 0; j < m2_grid.count; ++j) {
      SweepPoint pt;
      pt.m1 = m1_grid.at(i);
      pt.m2 = m2_grid.at(j);
      try {
        const auto res =
            minimize_spacing(channel, GaussianParams(1.0, c2, pt.m1, pt.m2), sigma2, opts);
        pt.l_opt = res.l_opt;
        pt.s_at_opt = res.s_at_opt;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoFiniteValue) throw;
      }
      out.push_back(pt);
    }
  }
  return out;
}

}  // namespace hexsense
