#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hexsense/common.hpp"
#include "hexsense/lattice.hpp"

namespace hexsense {

/// Communication graph of the fusion phase: closed neighborhoods (each node's
/// neighbor set includes the node itself) over the N estimating nodes.
struct FusionGraph {
  std::vector<std::vector<std::size_t>> neighborhoods;  // sorted, self included

  std::size_t size() const { return neighborhoods.size(); }

  void validate() const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& nb = neighborhoods[i];
      if (!std::is_sorted(nb.begin(), nb.end()))
        throw Error(ErrorCode::InvalidParams, "neighborhoods must be sorted");
      if (!std::binary_search(nb.begin(), nb.end(), i))
        throw Error(ErrorCode::InvalidParams, "closed neighborhood must include the node");
      for (std::size_t j : nb) {
        if (j >= n) throw Error(ErrorCode::InvalidParams, "neighbor index out of range");
        const auto& back = neighborhoods[j];
        if (!std::binary_search(back.begin(), back.end(), i))
          throw Error(ErrorCode::InvalidParams, "neighborhood membership must be symmetric");
      }
    }
  }

  bool connected() const {
    const std::size_t n = size();
    if (n == 0) return false;
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j : neighborhoods[i]) {
        if (!seen[j]) {
          seen[j] = 1;
          ++count;
          stack.push_back(j);
        }
      }
    }
    return count == n;
  }
};

/// Builds a fusion graph from undirected edges, adding the self loops.
inline FusionGraph graph_from_edges(std::size_t n,
                                    std::span<const std::pair<std::size_t, std::size_t>> edges) {
  FusionGraph g;
  g.neighborhoods.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) g.neighborhoods[i].push_back(i);
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) throw Error(ErrorCode::InvalidParams, "edge index out of range");
    if (a == b) continue;
    g.neighborhoods[a].push_back(b);
    g.neighborhoods[b].push_back(a);
  }
  for (auto& nb : g.neighborhoods) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return g;
}

/// Graph of the connections among the inner nodes of a lattice (lattice edges
/// with both endpoints inner), nodes re-indexed 0..N-1 in `net.inner` order.
inline FusionGraph make_inner_graph(const HexNetwork& net) {
  std::vector<std::size_t> to_fused(net.nodes.size(), SIZE_MAX);
  for (std::size_t k = 0; k < net.inner.size(); ++k) to_fused[net.inner[k]] = k;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (auto [a, b] : net.edges)
    if (to_fused[a] != SIZE_MAX && to_fused[b] != SIZE_MAX)
      edges.push_back({to_fused[a], to_fused[b]});
  auto g = graph_from_edges(net.inner.size(), edges);
  if (!g.connected())
    throw Error(ErrorCode::DisconnectedGraph, "inner-node graph is not connected");
  return g;
}

/// Per-node fused value x and quality s (presumed error variance) at step t.
struct ConsensusState {
  std::vector<double> x;
  std::vector<double> s;
  std::size_t t = 0;
};

struct ConsensusOptions {
  double tol_x = 1e-9;       // absolute spread tolerance on x
  double tol_s_rel = 1e-6;   // spread tolerance on s, relative to max s
  std::size_t max_iter = 10000;
  bool record_trace = false;
};

struct FusionReport {
  double x_star = 0.0;
  double s_star = 0.0;  // 0 when the method carries no quality channel
  std::size_t iterations = 0;
  bool converged = false;
  std::string diagnostic;
  std::vector<ConsensusState> trace;  // includes the initial state when recorded
};

using WeightMatrix = std::vector<std::vector<double>>;

/// Row-stochastic averaging weights, uniform over closed neighborhoods.
inline WeightMatrix uniform_neighborhood_matrix(const FusionGraph& g) {
  const std::size_t n = g.size();
  WeightMatrix p(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / static_cast<double>(g.neighborhoods[i].size());
    for (std::size_t j : g.neighborhoods[i]) p[i][j] = w;
  }
  return p;
}

/// Metropolis weights: symmetric, hence doubly stochastic on any graph, so the
/// fixed-matrix iteration converges to the arithmetic average.
inline WeightMatrix metropolis_matrix(const FusionGraph& g) {
  const std::size_t n = g.size();
  WeightMatrix p(n, std::vector<double>(n, 0.0));
  auto open_degree = [&](std::size_t i) { return g.neighborhoods[i].size() - 1; };
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j : g.neighborhoods[i]) {
      if (j == i) continue;
      p[i][j] = 1.0 / (1.0 + static_cast<double>(std::max(open_degree(i), open_degree(j))));
      acc += p[i][j];
    }
    p[i][i] = 1.0 - acc;
  }
  return p;
}

namespace detail {

inline void check_stochastic(const WeightMatrix& p, const FusionGraph& g) {
  const std::size_t n = g.size();
  if (p.size() != n) throw Error(ErrorCode::NotStochastic, "matrix size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i].size() != n) throw Error(ErrorCode::NotStochastic, "matrix size mismatch");
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (p[i][j] < 0.0) throw Error(ErrorCode::NotStochastic, "negative weight");
      if (p[i][j] != 0.0 &&
          !std::binary_search(g.neighborhoods[i].begin(), g.neighborhoods[i].end(), j))
        throw Error(ErrorCode::SparsityViolation,
                    "nonzero weight outside the closed neighborhood");
      row += p[i][j];
    }
    if (std::abs(row - 1.0) > 1e-12)
      throw Error(ErrorCode::NotStochastic, "row does not sum to 1");
  }
}

inline std::vector<double> apply(const WeightMatrix& p, const std::vector<double>& x) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) out[i] += p[i][j] * x[j];
  return out;
}

inline void require_connected(const FusionGraph& g) {
  g.validate();
  if (!g.connected()) throw Error(ErrorCode::DisconnectedGraph, "graph is not connected");
}

}  // namespace detail

/// Fixed-matrix average consensus x(t+1) = P x(t). With a doubly stochastic P
/// the limit is the arithmetic average of x0.
inline FusionReport average_consensus(const FusionGraph& g, std::vector<double> x,
                                      const WeightMatrix& p,
                                      const ConsensusOptions& opts = {}) {
  detail::require_connected(g);
  detail::check_stochastic(p, g);
  if (x.size() != g.size()) throw Error(ErrorCode::InvalidParams, "x0 size mismatch");

  FusionReport rep;
  ConsensusState state{x, std::vector<double>(x.size(), 0.0), 0};
  if (opts.record_trace) rep.trace.push_back(state);
  while (true) {
    if (spread(state.x) <= opts.tol_x) {
      rep.converged = true;
      break;
    }
    if (state.t >= opts.max_iter) break;
    state.x = detail::apply(p, state.x);
    ++state.t;
    if (opts.record_trace) rep.trace.push_back(state);
  }
  rep.iterations = state.t;
  rep.x_star = state.x[0];
  return rep;
}

/// Known-variance optimal estimator: inverse-variance weighted mean. Entries
/// of +inf get zero weight; all-infinite input has no information.
inline double optimal_fusion(std::span<const double> x, std::span<const double> variances) {
  if (x.size() != variances.size() || x.empty())
    throw Error(ErrorCode::InvalidParams, "value/variance size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = variances[i];
    if (std::isnan(v) || v <= 0.0)
      throw Error(ErrorCode::InvalidParams, "variances must be positive");
    if (std::isinf(v)) continue;
    num += x[i] / v;
    den += 1.0 / v;
  }
  if (den == 0.0) throw Error(ErrorCode::AllWeightsZero, "every variance is infinite");
  return num / den;
}

/// Distributed version of optimal_fusion for a-priori known variances: two
/// parallel average-consensus runs on a = x/sigma^2 and b = 1/sigma^2 under
/// Metropolis weights; each node's ratio a/b converges to the optimum.
inline FusionReport two_channel_fusion(const FusionGraph& g, std::span<const double> x,
                                       std::span<const double> variances,
                                       const ConsensusOptions& opts = {}) {
  detail::require_connected(g);
  if (x.size() != g.size() || variances.size() != g.size())
    throw Error(ErrorCode::InvalidParams, "x0/variance size mismatch");

  std::vector<double> a(x.size()), b(x.size());
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = variances[i];
    if (std::isnan(v) || v <= 0.0)
      throw Error(ErrorCode::InvalidParams, "variances must be positive");
    a[i] = std::isinf(v) ? 0.0 : x[i] / v;
    b[i] = std::isinf(v) ? 0.0 : 1.0 / v;
    den += b[i];
  }
  if (den == 0.0) throw Error(ErrorCode::AllWeightsZero, "every variance is infinite");

  const WeightMatrix p = metropolis_matrix(g);
  double scale_a = 1.0, scale_b = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale_a = std::max(scale_a, std::abs(a[i]));
    scale_b = std::max(scale_b, std::abs(b[i]));
  }

  FusionReport rep;
  ConsensusState state{a, b, 0};  // trace slots: x <- a, s <- b
  if (opts.record_trace) rep.trace.push_back(state);
  while (true) {
    if (spread(state.x) <= opts.tol_x * scale_a && spread(state.s) <= opts.tol_x * scale_b) {
      rep.converged = true;
      break;
    }
    if (state.t >= opts.max_iter) break;
    state.x = detail::apply(p, state.x);
    state.s = detail::apply(p, state.s);
    ++state.t;
    if (opts.record_trace) rep.trace.push_back(state);
  }
  rep.iterations = state.t;
  rep.x_star = state.x[0] / state.s[0];
  return rep;
}

/// Quality clamping before a state-dependent run: nonfinite entries (invalid
/// estimates) become cap_factor times the largest finite quality, tiny entries
/// are floored at eps_min. Returns the cap value. Throws when no entry is
/// finite, since then the weights carry no information.
inline double clamp_qualities(std::vector<double>& s, double eps_min = 1e-12,
                              double cap_factor = 1e6) {
  double max_finite = 0.0;
  bool any_finite = false;
  for (double& v : s) {
    if (std::isfinite(v)) {
      if (v < eps_min) v = eps_min;
      max_finite = std::max(max_finite, v);
      any_finite = true;
    }
  }
  if (!any_finite)
    throw Error(ErrorCode::AllWeightsZero, "no finite quality value to clamp against");
  const double cap = cap_factor * max_finite;
  for (double& v : s)
    if (!std::isfinite(v)) v = cap;
  return cap;
}

/// Row weights of the state-dependent iteration: P uses 1/s_j, M uses 1/s_j^2,
/// both normalized over the closed neighborhood. Both are row-stochastic by
/// construction.
inline WeightMatrix wise_p_matrix(const FusionGraph& g, std::span<const double> s) {
  const std::size_t n = g.size();
  WeightMatrix p(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double den = 0.0;
    for (std::size_t j : g.neighborhoods[i]) den += 1.0 / s[j];
    for (std::size_t j : g.neighborhoods[i]) p[i][j] = (1.0 / s[j]) / den;
  }
  return p;
}

inline WeightMatrix wise_m_matrix(const FusionGraph& g, std::span<const double> s) {
  const std::size_t n = g.size();
  WeightMatrix m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double den = 0.0;
    for (std::size_t j : g.neighborhoods[i]) den += 1.0 / (s[j] * s[j]);
    for (std::size_t j : g.neighborhoods[i]) m[i][j] = (1.0 / (s[j] * s[j])) / den;
  }
  return m;
}

/// One synchronous update x <- P(s) x, s <- M(s) s. Requires positive finite s
/// (clamp first).
inline ConsensusState wise_step(const ConsensusState& state, const FusionGraph& g) {
  const std::size_t n = g.size();
  ConsensusState next;
  next.x.resize(n);
  next.s.resize(n);
  next.t = state.t + 1;
  for (std::size_t i = 0; i < n; ++i) {
    double den_p = 0.0, num_p = 0.0, den_m = 0.0, num_m = 0.0;
    for (std::size_t j : g.neighborhoods[i]) {
      const double w = 1.0 / state.s[j];
      den_p += w;
      num_p += w * state.x[j];
      den_m += w * w;
      num_m += w * w * state.s[j];
    }
    next.x[i] = num_p / den_p;
    next.s[i] = num_m / den_m;
  }
  return next;
}

namespace detail {

inline bool wise_converged(const ConsensusState& st, const ConsensusOptions& opts) {
  double s_max = 0.0;
  for (double v : st.s) s_max = std::max(s_max, std::abs(v));
  return spread(st.x) <= opts.tol_x && spread(st.s) <= opts.tol_s_rel * s_max;
}

}  // namespace detail

/// Quality-weighted consensus: iterates wise_step until both x and s have
/// converged in spread. Non-convergence within max_iter is reported, not
/// thrown.
inline FusionReport run_wise(const FusionGraph& g, std::vector<double> x,
                             std::vector<double> s, const ConsensusOptions& opts = {}) {
  detail::require_connected(g);
  if (x.size() != g.size() || s.size() != g.size())
    throw Error(ErrorCode::InvalidParams, "x0/s0 size mismatch");
  clamp_qualities(s);

  FusionReport rep;
  ConsensusState state{std::move(x), std::move(s), 0};
  if (opts.record_trace) rep.trace.push_back(state);
  while (true) {
    if (detail::wise_converged(state, opts)) {
      rep.converged = true;
      break;
    }
    if (state.t >= opts.max_iter) break;
    state = wise_step(state, g);
    if (opts.record_trace) rep.trace.push_back(state);
  }
  rep.iterations = state.t;
  rep.x_star = state.x[0];
  rep.s_star = state.s[0];
  return rep;
}

/// Variation: instead of running consensus on s, each node recomputes its
/// quality from its current estimate at every step; x then follows the same
/// P(s) update. variance_fn(i, x_i) may return +inf; values are clamped per
/// step. If the whole vector turns nonfinite the run stops unconverged.
inline FusionReport variant_recompute(
    const FusionGraph& g, std::vector<double> x,
    const std::function<double(std::size_t, double)>& variance_fn,
    const ConsensusOptions& opts = {}) {
  detail::require_connected(g);
  if (x.size() != g.size()) throw Error(ErrorCode::InvalidParams, "x0 size mismatch");

  FusionReport rep;
  ConsensusState state{std::move(x), std::vector<double>(g.size(), 1.0), 0};
  while (true) {
    for (std::size_t i = 0; i < g.size(); ++i) state.s[i] = variance_fn(i, state.x[i]);
    try {
      clamp_qualities(state.s);
    } catch (const Error&) {
      rep.diagnostic = "all recomputed qualities nonfinite at step " + std::to_string(state.t);
      break;
    }
    if (opts.record_trace) rep.trace.push_back(state);
    if (spread(state.x) <= opts.tol_x) {
      rep.converged = true;
      break;
    }
    if (state.t >= opts.max_iter) break;
    auto next = wise_step(state, g);
    state.x = std::move(next.x);  // s is recomputed, not propagated
    state.t = next.t;
  }
  rep.iterations = state.t;
  rep.x_star = state.x[0];
  rep.s_star = state.s[0];
  return rep;
}

/// Variation: each outer step first smooths s with k_bar extra M-updates, then
/// performs one standard paired update. k_bar = 0 reproduces run_wise exactly.
inline FusionReport variant_hybrid(const FusionGraph& g, std::vector<double> x,
                                   std::vector<double> s, std::size_t k_bar,
                                   const ConsensusOptions& opts = {}) {
  detail::require_connected(g);
  if (x.size() != g.size() || s.size() != g.size())
    throw Error(ErrorCode::InvalidParams, "x0/s0 size mismatch");
  clamp_qualities(s);

  FusionReport rep;
  ConsensusState state{std::move(x), std::move(s), 0};
  if (opts.record_trace) rep.trace.push_back(state);
  std::size_t outer = 0;
  while (true) {
    if (detail::wise_converged(state, opts)) {
      rep.converged = true;
      break;
    }
    if (outer >= opts.max_iter) break;
    for (std::size_t k = 0; k < k_bar; ++k) {
      const std::size_t n = g.size();
      std::vector<double> sn(n);
      for (std::size_t i = 0; i < n; ++i) {
        double den = 0.0, num = 0.0;
        for (std::size_t j : g.neighborhoods[i]) {
          const double w = 1.0 / (state.s[j] * state.s[j]);
          den += w;
          num += w * state.s[j];
        }
        sn[i] = num / den;
      }
      state.s = std::move(sn);
    }
    state = wise_step(state, g);
    ++outer;
    if (opts.record_trace) rep.trace.push_back(state);
  }
  rep.iterations = outer;
  rep.x_star = state.x[0];
  rep.s_star = state.s[0];
  return rep;
}

}  // namespace hexsense
