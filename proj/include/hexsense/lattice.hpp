#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "hexsense/common.hpp"
#include "hexsense/field.hpp"

namespace hexsense {

enum class TessellationKind { Hexagonal, Triangular, Square };

/// Area covered by N nodes of a regular tessellation with edge length l.
inline double coverage_area(TessellationKind kind, double edge, std::size_t n_nodes) {
  if (!(edge > 0.0)) throw Error(ErrorCode::InvalidParams, "edge length must be positive");
  const double l2n = edge * edge * static_cast<double>(n_nodes);
  switch (kind) {
    case TessellationKind::Hexagonal: return 3.0 * std::sqrt(3.0) / 4.0 * l2n;
    case TessellationKind::Triangular: return std::sqrt(3.0) / 2.0 * l2n;
    case TessellationKind::Square: return l2n;
  }
  throw Error(ErrorCode::InvalidParams, "unknown tessellation kind");
}

/// A patch of honeycomb lattice. Vertices are sensor nodes, edges are
/// communication links of length `edge`. Inner nodes (exactly three neighbors)
/// are the only ones that estimate; border nodes still contribute measurements.
struct HexNetwork {
  std::vector<Vec2> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // i < j, sorted
  double edge = 0.0;
  std::vector<std::size_t> inner;                     // sorted indices of degree-3 nodes
  std::vector<std::vector<std::size_t>> adjacency;    // sorted neighbor lists

  std::size_t degree(std::size_t i) const { return adjacency[i].size(); }

  /// Recomputes adjacency and the inner set from `edges`.
  void rebuild_topology() {
    adjacency.assign(nodes.size(), {});
    for (auto [a, b] : edges) {
      adjacency[a].push_back(b);
      adjacency[b].push_back(a);
    }
    for (auto& nb : adjacency) std::sort(nb.begin(), nb.end());
    inner.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (adjacency[i].size() == 3) inner.push_back(i);
  }

  /// Checks the lattice invariants: uniform edge length and, at every inner
  /// node, neighbor directions at mutual 120 degrees.
  void validate(double tol_rel = 1e-9) const {
    for (auto [a, b] : edges) {
      const double len = (nodes[a] - nodes[b]).norm();
      if (std::abs(len - edge) > tol_rel * edge)
        throw Error(ErrorCode::InvalidParams, "edge length deviates from l");
    }
    for (std::size_t i : inner) {
      const auto& nb = adjacency[i];
      for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = a + 1; b < 3; ++b) {
          const Vec2 da = nodes[nb[a]] - nodes[i];
          const Vec2 db = nodes[nb[b]] - nodes[i];
          const double cosang = da.dot(db) / (da.norm() * db.norm());
          if (std::abs(cosang - (-0.5)) > 1e-9)
            throw Error(ErrorCode::InvalidParams, "inner-node neighbors not at 120 degrees");
        }
      }
    }
  }
};

namespace detail {

// Incremental vertex store with tolerance-based deduplication. Candidate
// vertices generated from adjacent cells agree only up to rounding, so lookup
// probes the 3x3 block of quantized keys around the candidate.
class VertexDedup {
 public:
  explicit VertexDedup(double edge) : quantum_(1e-6 * edge), tol_(1e-9 * edge) {}

  std::size_t insert(Vec2 p, std::vector<Vec2>& nodes) {
    const std::int64_t kx = quantize(p.x), ky = quantize(p.y);
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        auto it = map_.find({kx + dx, ky + dy});
        if (it != map_.end() && (nodes[it->second] - p).norm() <= tol_) return it->second;
      }
    }
    nodes.push_back(p);
    map_[{kx, ky}] = nodes.size() - 1;
    return nodes.size() - 1;
  }

 private:
  std::int64_t quantize(double v) const { return std::llround(v / quantum_); }

  double quantum_, tol_;
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> map_;
};

// Reorders nodes lexicographically by (rounded y, rounded x) so indices are
// reproducible, then rewrites edges and rebuilds topology.
inline void finalize_network(HexNetwork& net) {
  const double quantum = 1e-6 * net.edge;
  std::vector<std::size_t> perm(net.nodes.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto key = [&](std::size_t i) {
    return std::pair{std::llround(net.nodes[i].y / quantum),
                     std::llround(net.nodes[i].x / quantum)};
  };
  std::sort(perm.begin(), perm.end(),
            [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t r = 0; r < perm.size(); ++r) inv[perm[r]] = r;

  std::vector<Vec2> nodes(net.nodes.size());
  for (std::size_t r = 0; r < perm.size(); ++r) nodes[r] = net.nodes[perm[r]];
  net.nodes = std::move(nodes);
  for (auto& [a, b] : net.edges) {
    a = inv[a];
    b = inv[b];
    if (a > b) std::swap(a, b);
  }
  std::sort(net.edges.begin(), net.edges.end());
  net.rebuild_topology();
}

// Vertices of the pointy-top hexagonal cell centered at c: angles 30 + 60k
// degrees, circumradius = edge length.
inline std::array<Vec2, 6> cell_vertices(Vec2 c, double edge) {
  std::array<Vec2, 6> v{};
  for (int k = 0; k < 6; ++k) {
    const double a = (30.0 + 60.0 * k) * 3.14159265358979323846 / 180.0;
    v[k] = {c.x + edge * std::cos(a), c.y + edge * std::sin(a)};
  }
  return v;
}

}  // namespace detail

/// All hexagonal cells within `rings` rings of a central cell; rings = 0 is a
/// single hexagon. Node indices are ordered by (y, x), deterministically.
inline HexNetwork generate_honeycomb(std::size_t rings, double edge, Vec2 origin = {}) {
  if (!(edge > 0.0)) throw Error(ErrorCode::InvalidParams, "edge length must be positive");
  HexNetwork net;
  net.edge = edge;
  detail::VertexDedup dedup(edge);
  std::set<std::pair<std::size_t, std::size_t>> edge_set;
  const double s3 = std::sqrt(3.0);
  const auto r = static_cast<std::int64_t>(rings);
  for (std::int64_t q = -r; q <= r; ++q) {
    for (std::int64_t w = std::max(-r, -q - r); w <= std::min(r, -q + r); ++w) {
      // axial cell coordinates (q, w); pointy-top centers s3*l apart
      const Vec2 c{origin.x + s3 * edge * (q + 0.5 * w), origin.y + 1.5 * edge * w};
      const auto verts = detail::cell_vertices(c, edge);
      std::array<std::size_t, 6> idx{};
      for (int k = 0; k < 6; ++k) idx[k] = dedup.insert(verts[k], net.nodes);
      for (int k = 0; k < 6; ++k) {
        auto a = idx[k], b = idx[(k + 1) % 6];
        edge_set.insert({std::min(a, b), std::max(a, b)});
      }
    }
  }
  net.edges.assign(edge_set.begin(), edge_set.end());
  detail::finalize_network(net);
  return net;
}

/// The twelve-node network: a hexagonal cycle of six inner nodes, each with
/// one pendant neighbor pointing radially outward.
inline HexNetwork preset_paper_network(double edge) {
  if (!(edge > 0.0)) throw Error(ErrorCode::InvalidParams, "edge length must be positive");
  HexNetwork net;
  net.edge = edge;
  const auto ring = detail::cell_vertices({0.0, 0.0}, edge);
  for (int k = 0; k < 6; ++k) net.nodes.push_back(ring[k]);
  for (int k = 0; k < 6; ++k) net.nodes.push_back(ring[k] * 2.0);  // pendants
  for (std::size_t k = 0; k < 6; ++k) {
    const std::size_t nxt = (k + 1) % 6;
    net.edges.push_back({std::min(k, nxt), std::max(k, nxt)});
    net.edges.push_back({k, k + 6});
  }
  detail::finalize_network(net);
  return net;
}

/// Proper isometry taking a node to the origin and its three neighbors onto
/// the canonical sensor triple (0,l), (-sqrt3/2 l, -l/2), (sqrt3/2 l, -l/2).
/// Applied as q = rotation * p + translation.
struct LocalFrame {
  std::size_t node = 0;
  Mat2 rotation;
  Vec2 translation;
  /// Node indices mapped to canonical labels 2, 3, 4 (in that order).
  std::array<std::size_t, 3> neighbor_labels{};

  Vec2 apply(Vec2 p) const { return rotation.apply(p) + translation; }
  Vec2 apply_inverse(Vec2 q) const { return rotation.apply_transposed(q - translation); }
};

/// Frame of an inner node. Among the three rotations mapping the neighbor
/// triad onto the canonical one, picks the smallest angle, ties broken toward
/// the counterclockwise choice.
inline LocalFrame local_frame(const HexNetwork& net, std::size_t node) {
  if (node >= net.nodes.size() || net.degree(node) != 3)
    throw Error(ErrorCode::NotInnerNode, "node " + std::to_string(node) + " does not have degree 3");
  const auto& nb = net.adjacency[node];
  const Vec2 p0 = net.nodes[node];

  constexpr double kPi = 3.14159265358979323846;
  double best = 0.0;
  bool found = false;
  for (std::size_t k = 0; k < 3; ++k) {
    const Vec2 d = net.nodes[nb[k]] - p0;
    double cand = kPi / 2.0 - std::atan2(d.y, d.x);  // rotate neighbor k to "up"
    cand = std::remainder(cand, 2.0 * kPi);          // wrap to (-pi, pi]
    if (cand <= -kPi + 1e-15) cand = kPi;
    if (!found || std::abs(cand) < std::abs(best) - 1e-12 ||
        (std::abs(std::abs(cand) - std::abs(best)) <= 1e-12 && cand > best)) {
      best = cand;
      found = true;
    }
  }

  LocalFrame frame;
  frame.node = node;
  frame.rotation = Mat2::rotation(best);
  frame.translation = Vec2{0.0, 0.0} - frame.rotation.apply(p0);

  const auto canon = canonical_sensor_positions(net.edge);
  const double tol = 1e-9 * net.edge;
  std::array<bool, 3> used{};
  for (std::size_t label = 0; label < 3; ++label) {
    bool matched = false;
    for (std::size_t k = 0; k < 3; ++k) {
      if (used[k]) continue;
      if ((frame.apply(net.nodes[nb[k]]) - canon[label + 1]).norm() <= tol) {
        frame.neighbor_labels[label] = nb[k];
        used[k] = true;
        matched = true;
        break;
      }
    }
    if (!matched)
      throw Error(ErrorCode::NotInnerNode,
                  "neighbors of node " + std::to_string(node) +
                      " are not in honeycomb configuration");
  }
  return frame;
}

}  // namespace hexsense
