#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "stitch3d/common.hpp"

namespace stitch3d {

/// Good edges carry distances treated as exact (bond-length class);
/// Noe edges carry noisy range measurements.
enum class EdgeKind { Good, Noe };

struct Edge {
  int i = 0, j = 0;       // canonical order i < j
  double d = 0.0;         // measured length, > 0
  EdgeKind kind = EdgeKind::Noe;
};

/// Node subset whose relative coordinates are known a priori. When
/// reflection_known is set, the supplied coordinates carry the true
/// chirality (they may still be arbitrarily rotated and translated).
struct MolecularFragment {
  std::vector<int> node_ids;
  std::vector<Point3> local_coords;
  bool reflection_known = false;
};

struct NoiseSpec {
  double eta = 0.0;   // multiplicative noise half-width, in [0, 1)
  uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<Point3> coords;
  int size() const { return static_cast<int>(coords.size()); }
};

struct ScalingStats {
  double delta = 0.0;  // mean of true/estimated length over edges
  double kappa = 0.0;  // mean relative deviation |est - true| / true
};

/// Sparse pairwise-distance measurement graph. Edges are stored once per
/// unordered pair in canonical (min,max) order; duplicates offered to
/// add_edge keep the first occurrence and bump duplicates_dropped.
class MeasurementGraph {
 public:
  MeasurementGraph() = default;
  explicit MeasurementGraph(int n) : n_(n) {}

  int n() const { return n_; }
  int m() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::optional<double>& rho() const { return rho_; }
  void set_rho(double rho) { rho_ = rho; }

  std::vector<std::pair<int, Point3>>& anchors() { return anchors_; }
  const std::vector<std::pair<int, Point3>>& anchors() const { return anchors_; }
  std::vector<MolecularFragment>& fragments() { return fragments_; }
  const std::vector<MolecularFragment>& fragments() const { return fragments_; }

  int duplicates_dropped() const { return duplicates_dropped_; }

  /// Inserts an edge; returns false for a duplicate pair (first value kept).
  bool add_edge(int i, int j, double d, EdgeKind kind) {
    if (i == j) throw std::invalid_argument("self-loop edge");
    if (i < 0 || j < 0 || i >= n_ || j >= n_)
      throw std::invalid_argument("edge endpoint out of range");
    if (!(d > 0.0) || !std::isfinite(d))
      throw std::invalid_argument("edge distance must be positive and finite");
    if (i > j) std::swap(i, j);
    const int64_t key = pair_key(i, j);
    if (index_.count(key)) {
      ++duplicates_dropped_;
      return false;
    }
    index_.emplace(key, static_cast<int>(edges_.size()));
    edges_.push_back({i, j, d, kind});
    return true;
  }

  const Edge* find_edge(int i, int j) const {
    if (i > j) std::swap(i, j);
    auto it = index_.find(pair_key(i, j));
    return it == index_.end() ? nullptr : &edges_[it->second];
  }

  int edge_index(int i, int j) const {
    if (i > j) std::swap(i, j);
    auto it = index_.find(pair_key(i, j));
    return it == index_.end() ? -1 : it->second;
  }

  std::vector<int> degrees() const {
    std::vector<int> deg(n_, 0);
    for (const auto& e : edges_) {
      ++deg[e.i];
      ++deg[e.j];
    }
    return deg;
  }

  /// adjacency()[v] lists (neighbor, edge index) pairs.
  std::vector<std::vector<std::pair<int, int>>> adjacency() const {
    std::vector<std::vector<std::pair<int, int>>> adj(n_);
    for (int e = 0; e < m(); ++e) {
      adj[edges_[e].i].emplace_back(edges_[e].j, e);
      adj[edges_[e].j].emplace_back(edges_[e].i, e);
    }
    return adj;
  }

  /// Checks structural invariants; throws std::logic_error on violation.
  void validate() const {
    std::vector<char> is_anchor(n_, 0);
    for (const auto& [id, p] : anchors_) {
      if (id < 0 || id >= n_) throw std::logic_error("anchor id out of range");
      if (is_anchor[id]) throw std::logic_error("duplicate anchor id");
      if (!p.finite()) throw std::logic_error("anchor coordinates not finite");
      is_anchor[id] = 1;
    }
    for (const auto& f : fragments_) {
      if (f.node_ids.size() != f.local_coords.size() || f.node_ids.size() < 3)
        throw std::logic_error("fragment must pair >=3 ids with coordinates");
      std::vector<char> seen(n_, 0);
      for (int id : f.node_ids) {
        if (id < 0 || id >= n_) throw std::logic_error("fragment id out of range");
        if (seen[id]) throw std::logic_error("duplicate node id in fragment");
        seen[id] = 1;
      }
      // Good edges inside a fragment must agree with the prior coordinates.
      for (size_t a = 0; a < f.node_ids.size(); ++a) {
        for (size_t b = a + 1; b < f.node_ids.size(); ++b) {
          const Edge* e = find_edge(f.node_ids[a], f.node_ids[b]);
          if (!e || e->kind != EdgeKind::Good) continue;
          const double l = distance(f.local_coords[a], f.local_coords[b]);
          if (std::abs(l - e->d) > 1e-9 * std::max(1.0, e->d))
            throw std::logic_error("fragment coordinates contradict a good edge");
        }
      }
    }
  }

 private:
  static int64_t pair_key(int i, int j) {
    return (static_cast<int64_t>(i) << 32) | static_cast<uint32_t>(j);
  }

  int n_ = 0;
  std::vector<Edge> edges_;
  std::unordered_map<int64_t, int> index_;
  std::optional<double> rho_;
  std::vector<std::pair<int, Point3>> anchors_;
  std::vector<MolecularFragment> fragments_;
  int duplicates_dropped_ = 0;
};

/// Final coordinate estimate; absent entries are nodes the pipeline could
/// not attach to the globally rigid core.
struct GlobalEmbedding {
  std::vector<std::optional<Point3>> coords;

  GlobalEmbedding() = default;
  explicit GlobalEmbedding(int n) : coords(n) {}

  int size() const { return static_cast<int>(coords.size()); }
  int localized_count() const {
    int c = 0;
    for (const auto& p : coords) c += p.has_value();
    return c;
  }
};

}  // namespace stitch3d
