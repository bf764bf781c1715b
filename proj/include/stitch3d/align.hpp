#pragma once

#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "stitch3d/metrics.hpp"
#include "stitch3d/patches.hpp"

namespace stitch3d {

struct PairAlignment {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();  // maps l-frame to k-frame
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  int overlap = 0;
  double residual = 0.0;  // RMS mismatch over the common nodes
};

struct PatchGraphEdge {
  int k = 0, l = 0;
  Eigen::Matrix3d h;
  Eigen::Vector3d t;
  int overlap = 0;
  double residual = 0.0;
};

/// Patches as vertices; an edge wherever two patches share enough nodes to
/// be registered onto each other.
struct PatchGraph {
  int patch_count = 0;
  std::vector<PatchGraphEdge> edges;
  std::vector<int> degrees;

  std::vector<std::vector<std::pair<int, int>>> adjacency() const {
    std::vector<std::vector<std::pair<int, int>>> adj(patch_count);
    for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
      adj[edges[e].k].emplace_back(edges[e].l, e);
      adj[edges[e].l].emplace_back(edges[e].k, e);
    }
    return adj;
  }
};

/// Closed-form registration of patch pl onto patch pk over their common
/// nodes (orthogonal transform, reflection allowed, plus translation).
/// nullopt when the overlap is below min_overlap or the common nodes are
/// collinear.
inline std::optional<PairAlignment> align_pair(const Patch& pk,
                                               const Patch& pl,
                                               int min_overlap = 4) {
  std::vector<std::pair<int, int>> common;  // (local in pk, local in pl)
  {
    size_t a = 0, b = 0;
    while (a < pk.node_ids.size() && b < pl.node_ids.size()) {
      if (pk.node_ids[a] == pl.node_ids[b]) {
        common.emplace_back(static_cast<int>(a), static_cast<int>(b));
        ++a;
        ++b;
      } else if (pk.node_ids[a] < pl.node_ids[b]) {
        ++a;
      } else {
        ++b;
      }
    }
  }
  if (static_cast<int>(common.size()) < min_overlap) return std::nullopt;

  Eigen::Matrix3Xd xk(3, common.size()), xl(3, common.size());
  for (size_t c = 0; c < common.size(); ++c) {
    xk.col(c) = pk.local_coords.col(common[c].first);
    xl.col(c) = pl.local_coords.col(common[c].second);
  }
  RigidTransform tf;
  try {
    tf = orthogonal_procrustes(xk, xl);
  } catch (const DegenerateConfiguration&) {
    return std::nullopt;
  }
  PairAlignment out;
  out.h = tf.O;
  out.t = tf.t;
  out.overlap = static_cast<int>(common.size());
  out.residual =
      std::sqrt((xk - ((tf.O * xl).colwise() + tf.t)).squaredNorm() /
                static_cast<double>(common.size()));
  return out;
}

/// Registers every alignable patch pair. Candidate pairs come off the
/// node-to-patch index, so disjoint patches cost nothing.
inline PatchGraph build_patch_graph(const PatchSet& ps, int min_overlap = 4) {
  PatchGraph pg;
  pg.patch_count = static_cast<int>(ps.patches.size());
  pg.degrees.assign(pg.patch_count, 0);

  std::set<std::pair<int, int>> candidates;
  for (const auto& owners : ps.node_to_patches)
    for (size_t a = 0; a < owners.size(); ++a)
      for (size_t b = a + 1; b < owners.size(); ++b)
        candidates.emplace(std::min(owners[a], owners[b]),
                           std::max(owners[a], owners[b]));

  std::vector<std::pair<int, int>> pairs(candidates.begin(), candidates.end());
  std::vector<std::optional<PairAlignment>> results(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), [&](int i) {
    results[i] = align_pair(ps.patches[pairs[i].first],
                            ps.patches[pairs[i].second], min_overlap);
  });
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (!results[i]) continue;
    pg.edges.push_back({pairs[i].first, pairs[i].second, results[i]->h,
                        results[i]->t, results[i]->overlap,
                        results[i]->residual});
    ++pg.degrees[pairs[i].first];
    ++pg.degrees[pairs[i].second];
  }
  return pg;
}

}  // namespace stitch3d
