#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stitch3d/cmds.hpp"
#include "stitch3d/connectivity.hpp"
#include "stitch3d/localize_sdp.hpp"
#include "stitch3d/metrics.hpp"
#include "stitch3d/refine.hpp"
#include "stitch3d/spectral.hpp"
#include "stitch3d/types.hpp"

namespace stitch3d {

enum class PatchOriginKind { OneHop, Fragment, Partition, LinkPatch };

struct PatchOrigin {
  PatchOriginKind kind = PatchOriginKind::OneHop;
  int a = -1;  // center node / fragment id / cluster id / first cluster
  int b = -1;  // second cluster for link patches
};

struct Patch {
  int id = -1;
  std::vector<int> node_ids;       // global ids, ascending
  Eigen::Matrix3Xd local_coords;   // 3 x |node_ids| once embedded
  PatchOrigin origin;
  bool reflection_known = false;
  int reflection_sign = +1;
  // Pseudo-anchor K4 (local indices) the localizability certificate used;
  // the embedding must anchor to the same four nodes.
  std::optional<std::array<int, 4>> pseudo_anchors;

  int size() const { return static_cast<int>(node_ids.size()); }
  bool embedded() const {
    return local_coords.cols() == static_cast<long>(node_ids.size());
  }
  int local_index(int global) const {
    const auto it =
        std::lower_bound(node_ids.begin(), node_ids.end(), global);
    if (it == node_ids.end() || *it != global) return -1;
    return static_cast<int>(it - node_ids.begin());
  }
};

struct PatchSet {
  std::vector<Patch> patches;
  std::vector<std::vector<int>> node_to_patches;
  std::vector<int> unpatched_nodes;
  std::vector<std::string> warnings;

  void build_index(int n) {
    node_to_patches.assign(n, {});
    for (const auto& p : patches)
      for (int v : p.node_ids) node_to_patches[v].push_back(p.id);
    unpatched_nodes.clear();
    for (int v = 0; v < n; ++v)
      if (node_to_patches[v].empty()) unpatched_nodes.push_back(v);
  }
};

struct PatchConfig {
  double eps = 1e-4;                           // w_i threshold
  WulVariant wul_variant = WulVariant::Feasibility;
  uint64_t seed = 0;
  SdpOptions sdp{.tol = 1e-7, .max_iter = 150, .dim_cap = 200};
  int size_cap = 70;     // warn when an extended partition outgrows the SDP
  bool skip_wul = false; // direct embedding of raw components (comparisons)
};

namespace detail {

/// WUL-extract a candidate node set and append the surviving 4-connected
/// pieces as patches. A certificate is anchored to its K4, so the anchors
/// ride along only when the re-split keeps all four together.
inline void extract_and_emit(const MeasurementGraph& g,
                             const std::vector<int>& cand_global, int center,
                             const PatchConfig& cfg, uint64_t patch_seed,
                             PatchOrigin origin,
                             std::vector<Patch>& out,
                             std::vector<std::string>& warnings,
                             const std::vector<int>& core_global = {}) {
  if (cand_global.size() < 4) return;
  std::vector<int> sorted = cand_global;
  std::sort(sorted.begin(), sorted.end());

  std::vector<int> kept_global;
  std::optional<std::array<int, 4>> anchors_global;
  if (cfg.skip_wul) {
    kept_global = sorted;
  } else {
    const auto patch = induce_patch(g, sorted);
    int center_local = -1;
    if (center >= 0) {
      const auto it = std::lower_bound(sorted.begin(), sorted.end(), center);
      if (it != sorted.end() && *it == center)
        center_local = static_cast<int>(it - sorted.begin());
    }
    std::vector<int> core_local;
    for (int v : core_global) {
      const auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
      if (it != sorted.end() && *it == v)
        core_local.push_back(static_cast<int>(it - sorted.begin()));
    }
    WulDiagnostics diag;
    try {
      diag = extract_localizable_subgraph(patch, center_local, cfg.eps,
                                          cfg.wul_variant, patch_seed, cfg.sdp,
                                          core_local);
    } catch (const NoPseudoAnchors&) {
      return;  // no K4: not embeddable by the anchored machinery
    } catch (const SolverFailure&) {
      warnings.push_back("localizability extraction failed on a patch; kept as-is");
      diag.kept.resize(sorted.size());
      for (size_t k = 0; k < sorted.size(); ++k) diag.kept[k] = static_cast<int>(k);
    }
    if (diag.kept.size() < 4) return;
    for (int local : diag.kept) kept_global.push_back(sorted[local]);
    std::array<int, 4> ag{};
    for (int a = 0; a < 4; ++a) ag[a] = sorted[diag.anchors[a]];
    anchors_global = ag;
  }

  // Extraction can break 4-connectedness; re-split what survived.
  const SimpleGraph kept_graph =
      SimpleGraph::from_measurement(g).induced(kept_global);
  for (const auto& comp_local : four_connected_components(kept_graph)) {
    Patch p;
    p.origin = origin;
    for (int local : comp_local) p.node_ids.push_back(kept_global[local]);
    std::sort(p.node_ids.begin(), p.node_ids.end());
    if (anchors_global) {
      std::array<int, 4> al{};
      bool all_present = true;
      for (int a = 0; a < 4; ++a) {
        const auto it = std::lower_bound(p.node_ids.begin(), p.node_ids.end(),
                                         (*anchors_global)[a]);
        if (it == p.node_ids.end() || *it != (*anchors_global)[a]) {
          all_present = false;
          break;
        }
        al[a] = static_cast<int>(it - p.node_ids.begin());
      }
      if (all_present) p.pseudo_anchors = al;
    }
    out.push_back(std::move(p));
  }
}

/// Drops exact duplicates, plus K4 patches fully contained in larger
/// patches (they duplicate four points of the container and nothing else;
/// bigger overlapping patches still add alignment information).
inline void containment_dedup(std::vector<Patch>& patches) {
  std::stable_sort(patches.begin(), patches.end(),
                   [](const Patch& a, const Patch& b) {
                     return a.node_ids.size() > b.node_ids.size();
                   });
  std::vector<Patch> kept;
  std::set<std::vector<int>> seen;
  for (auto& p : patches) {
    if (seen.count(p.node_ids)) continue;
    bool drop = false;
    if (p.node_ids.size() <= 4) {
      for (const auto& big : kept) {
        if (big.node_ids.size() > p.node_ids.size() &&
            std::includes(big.node_ids.begin(), big.node_ids.end(),
                          p.node_ids.begin(), p.node_ids.end())) {
          drop = true;
          break;
        }
      }
    }
    if (!drop) {
      seen.insert(p.node_ids);
      kept.push_back(std::move(p));
    }
  }
  patches = std::move(kept);
  for (size_t i = 0; i < patches.size(); ++i)
    patches[i].id = static_cast<int>(i);
}

}  // namespace detail

/// Nodes of degree < 4 cannot be pinned in R^3; prune them (repeatedly,
/// since removal lowers neighbors' degrees) before building patches.
inline std::vector<char> prune_low_degree(const MeasurementGraph& g,
                                          int min_degree = 4) {
  std::vector<char> alive(g.n(), 1);
  const auto adj = g.adjacency();
  bool changed = true;
  while (changed) {
    changed = false;
    for (int v = 0; v < g.n(); ++v) {
      if (!alive[v]) continue;
      int deg = 0;
      for (const auto& [w, e] : adj[v]) deg += alive[w];
      if (deg < min_degree) {
        alive[v] = 0;
        changed = true;
      }
    }
  }
  return alive;
}

/// 1-hop patch decomposition: per node, the star subgraph is split into
/// 4-connected components, each reduced to its localizable core, and the
/// results deduplicated by containment.
inline PatchSet build_patches_1hop(const MeasurementGraph& g,
                                   const PatchConfig& cfg) {
  PatchSet ps;
  const std::vector<char> alive = prune_low_degree(g);
  const auto adj = g.adjacency();
  const SimpleGraph sg = SimpleGraph::from_measurement(g);

  std::vector<std::vector<int>> stars(g.n());
  for (int i = 0; i < g.n(); ++i) {
    if (!alive[i]) continue;
    std::vector<int>& star = stars[i];
    star.push_back(i);
    for (const auto& [w, e] : adj[i])
      if (alive[w]) star.push_back(w);
    std::sort(star.begin(), star.end());
  }

  std::vector<std::vector<Patch>> found(g.n());
  std::vector<std::vector<std::string>> warn(g.n());
  parallel_for(g.n(), [&](int i) {
    if (stars[i].size() < 4) return;
    const SimpleGraph star_graph = sg.induced(stars[i]);
    const auto comps = four_connected_components(star_graph);
    for (size_t c = 0; c < comps.size(); ++c) {
      std::vector<int> comp_global;
      for (int local : comps[c]) comp_global.push_back(stars[i][local]);
      detail::extract_and_emit(
          g, comp_global, i, cfg,
          derive_seed(cfg.seed, "wul-1hop", static_cast<uint64_t>(i) * 97 + c),
          {PatchOriginKind::OneHop, i, -1}, found[i], warn[i]);
    }
  });
  for (int i = 0; i < g.n(); ++i) {
    for (auto& p : found[i]) ps.patches.push_back(std::move(p));
    for (auto& w : warn[i]) ps.warnings.push_back(std::move(w));
  }

  detail::containment_dedup(ps.patches);
  ps.build_index(g.n());
  return ps;
}

/// Fragment-driven decomposition: each fragment is grown by its 1-hop
/// neighborhood and reduced to a localizable core that must retain the
/// fragment itself (its coordinates are prior knowledge). Nodes left in no
/// patch get ordinary 1-hop patches.
inline PatchSet build_patches_fragments(const MeasurementGraph& g,
                                        const PatchConfig& cfg) {
  PatchSet ps;
  const auto adj = g.adjacency();
  const SimpleGraph sg = SimpleGraph::from_measurement(g);

  const int nf = static_cast<int>(g.fragments().size());
  std::vector<std::vector<Patch>> found(nf);
  std::vector<std::vector<std::string>> warn(nf);
  parallel_for(nf, [&](int f) {
    const MolecularFragment& frag = g.fragments()[f];
    std::set<int> ext(frag.node_ids.begin(), frag.node_ids.end());
    for (int v : frag.node_ids)
      for (const auto& [w, e] : adj[v]) ext.insert(w);
    std::vector<int> nodes(ext.begin(), ext.end());
    if (nodes.size() < 4) return;

    const auto patch = detail::induce_patch(g, nodes);
    std::vector<char> keep(nodes.size(), 0);
    std::optional<std::array<int, 4>> anchors;
    std::vector<int> core_local;
    for (int v : frag.node_ids) {
      const auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
      core_local.push_back(static_cast<int>(it - nodes.begin()));
    }
    try {
      const WulDiagnostics diag = extract_localizable_subgraph(
          patch, -1, cfg.eps, cfg.wul_variant,
          derive_seed(cfg.seed, "wul-fragment", f), cfg.sdp, core_local);
      for (int local : diag.kept) keep[local] = 1;
      anchors = diag.anchors;
    } catch (const std::exception&) {
      keep.assign(nodes.size(), 1);
    }
    // The fragment's own nodes are known a priori; never drop them.
    for (int v : frag.node_ids) {
      const auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
      keep[it - nodes.begin()] = 1;
    }
    Patch p;
    p.origin = {PatchOriginKind::Fragment, f, -1};
    p.reflection_known = frag.reflection_known;
    for (size_t k = 0; k < nodes.size(); ++k)
      if (keep[k]) p.node_ids.push_back(nodes[k]);
    if (p.node_ids.size() < 4) return;
    if (anchors) {
      std::array<int, 4> al{};
      bool ok = true;
      for (int a = 0; a < 4 && ok; ++a) {
        const int global = nodes[(*anchors)[a]];
        const auto it =
            std::lower_bound(p.node_ids.begin(), p.node_ids.end(), global);
        if (it == p.node_ids.end() || *it != global)
          ok = false;
        else
          al[a] = static_cast<int>(it - p.node_ids.begin());
      }
      if (ok) p.pseudo_anchors = al;
    }
    found[f].push_back(std::move(p));
  });
  for (int f = 0; f < nf; ++f) {
    for (auto& p : found[f]) ps.patches.push_back(std::move(p));
    for (auto& w : warn[f]) ps.warnings.push_back(std::move(w));
  }

  // Singletons: cover remaining nodes with ordinary 1-hop patches.
  std::vector<char> covered(g.n(), 0);
  for (const auto& p : ps.patches)
    for (int v : p.node_ids) covered[v] = 1;
  const std::vector<char> alive = prune_low_degree(g);
  for (int i = 0; i < g.n(); ++i) {
    if (covered[i] || !alive[i]) continue;
    std::vector<int> star{i};
    for (const auto& [w, e] : adj[i])
      if (alive[w]) star.push_back(w);
    std::sort(star.begin(), star.end());
    if (star.size() < 4) continue;
    const SimpleGraph star_graph = sg.induced(star);
    const auto comps = four_connected_components(star_graph);
    for (size_t c = 0; c < comps.size(); ++c) {
      std::vector<int> comp_global;
      for (int local : comps[c]) comp_global.push_back(star[local]);
      detail::extract_and_emit(
          g, comp_global, i, cfg,
          derive_seed(cfg.seed, "wul-singleton", static_cast<uint64_t>(i)),
          {PatchOriginKind::OneHop, i, -1}, ps.patches, ps.warnings);
    }
  }

  detail::containment_dedup(ps.patches);
  ps.build_index(g.n());
  return ps;
}

/// Nodes of the link patch joining two (extended) patches: their common
/// nodes plus the endpoints of link edges, i.e. edges with one endpoint
/// exclusive to each side.
inline std::vector<int> link_patch_nodes(const MeasurementGraph& g,
                                         const std::vector<int>& patch_a,
                                         const std::vector<int>& patch_b) {
  const std::set<int> sa(patch_a.begin(), patch_a.end());
  const std::set<int> sb(patch_b.begin(), patch_b.end());
  std::set<int> nodes;
  for (int v : patch_a)
    if (sb.count(v)) nodes.insert(v);
  for (const auto& e : g.edges()) {
    const bool ai = sa.count(e.i), aj = sa.count(e.j);
    const bool bi = sb.count(e.i), bj = sb.count(e.j);
    if ((ai && !bi && bj && !aj) || (bi && !ai && aj && !bj)) {
      nodes.insert(e.i);
      nodes.insert(e.j);
    }
  }
  return {nodes.begin(), nodes.end()};
}

/// Spectral-partition decomposition: K partitions extended by their 1-hop
/// neighborhoods, optionally joined by link patches (common nodes plus
/// endpoints of edges crossing between two patches), every candidate then
/// reduced to its localizable core.
inline PatchSet build_patches_spectral(const MeasurementGraph& g, int K,
                                       bool with_link_patches,
                                       const PatchConfig& cfg) {
  PatchSet ps;
  const auto parts = spectral_partition(g, K, cfg.seed);
  const auto adj = g.adjacency();

  std::vector<std::vector<int>> extended(parts.size());
  for (size_t c = 0; c < parts.size(); ++c) {
    std::set<int> ext(parts[c].begin(), parts[c].end());
    for (int v : parts[c])
      for (const auto& [w, e] : adj[v]) ext.insert(w);
    extended[c].assign(ext.begin(), ext.end());
    if (static_cast<int>(extended[c].size()) > cfg.size_cap)
      ps.warnings.push_back(
          "extended partition " + std::to_string(c) + " has " +
          std::to_string(extended[c].size()) +
          " nodes (cap " + std::to_string(cfg.size_cap) +
          "); consider a larger K");
  }

  std::vector<std::vector<Patch>> found(parts.size());
  std::vector<std::vector<std::string>> warn(parts.size());
  parallel_for(static_cast<int>(parts.size()), [&](int c) {
    detail::extract_and_emit(g, extended[c], -1, cfg,
                             derive_seed(cfg.seed, "wul-partition", c),
                             {PatchOriginKind::Partition, c, -1}, found[c],
                             warn[c], parts[c]);
  });
  for (size_t c = 0; c < parts.size(); ++c) {
    for (auto& p : found[c]) ps.patches.push_back(std::move(p));
    for (auto& w : warn[c]) ps.warnings.push_back(std::move(w));
  }

  if (with_link_patches) {
    for (size_t a = 0; a < extended.size(); ++a) {
      for (size_t b = a + 1; b < extended.size(); ++b) {
        const std::vector<int> nodes =
            link_patch_nodes(g, extended[a], extended[b]);
        if (nodes.size() < 4) continue;
        detail::extract_and_emit(
            g, nodes, -1, cfg,
            derive_seed(cfg.seed, "wul-link",
                        static_cast<uint64_t>(a) * 1000 + b),
            {PatchOriginKind::LinkPatch, static_cast<int>(a),
             static_cast<int>(b)},
            ps.patches, ps.warnings);
      }
    }
  }

  detail::containment_dedup(ps.patches);
  ps.build_index(g.n());
  return ps;
}

enum class EmbedMethod { Auto, Cmds, Sdp };

/// Measured distances induced on a patch, with refinement weights: good
/// edges are heavy soft constraints, noisy ranges get unit weight.
inline std::vector<DistanceTarget> patch_targets(const MeasurementGraph& g,
                                                 const Patch& p,
                                                 double good_weight = 10.0) {
  std::vector<DistanceTarget> targets;
  const auto patch = detail::induce_patch(g, p.node_ids);
  targets.reserve(patch.edges.size());
  for (size_t e = 0; e < patch.edges.size(); ++e)
    targets.push_back({patch.edges[e][0], patch.edges[e][1], patch.dist[e],
                       patch.kind[e] == EdgeKind::Good ? good_weight : 1.0});
  return targets;
}

namespace detail {

/// All-pairs shortest-path completion of a patch's distance matrix; the
/// classical-MDS embedding of it is a cheap second starting point that
/// sidesteps the occasional bad basin of the SDP projection.
inline Eigen::MatrixXd shortest_path_completion(
    int n, const std::vector<std::array<int, 2>>& edges,
    const std::vector<double>& dist) {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd D = Eigen::MatrixXd::Constant(n, n, inf);
  for (int i = 0; i < n; ++i) D(i, i) = 0;
  for (size_t e = 0; e < edges.size(); ++e) {
    D(edges[e][0], edges[e][1]) = dist[e];
    D(edges[e][1], edges[e][0]) = dist[e];
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (D(i, k) + D(k, j) < D(i, j)) D(i, j) = D(i, k) + D(k, j);
  return D;
}

}  // namespace detail

/// Embeds one patch in its own frame: classical MDS when every pairwise
/// distance is present, the penalty SDP otherwise, always polished by
/// gradient descent on the measured distances. Incomplete patches also try
/// a shortest-path-completed MDS start; the lower-stress result wins.
inline void embed_patch(const MeasurementGraph& g, Patch& p,
                        EmbedMethod method, bool regularize,
                        const SdpOptions& sdp_opts, int refine_iters = 4000) {
  const int n = p.size();
  const auto patch = detail::induce_patch(g, p.node_ids);
  const bool complete =
      static_cast<int>(patch.edges.size()) == n * (n - 1) / 2;
  EmbedMethod chosen = method;
  if (method == EmbedMethod::Auto)
    chosen = complete ? EmbedMethod::Cmds : EmbedMethod::Sdp;
  if (chosen == EmbedMethod::Cmds && !complete)
    throw std::invalid_argument("cmds embedding needs a complete patch");

  const auto targets = patch_targets(g, p);
  if (chosen == EmbedMethod::Cmds) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (size_t e = 0; e < patch.edges.size(); ++e) {
      D(patch.edges[e][0], patch.edges[e][1]) = patch.dist[e];
      D(patch.edges[e][1], patch.edges[e][0]) = patch.dist[e];
    }
    p.local_coords = cmds(D, 3).coords;
    refine_gradient(p.local_coords, targets, refine_iters);
    return;
  }

  Eigen::Matrix3Xd mds_start =
      cmds(detail::shortest_path_completion(n, patch.edges, patch.dist), 3)
          .coords;
  const RefineInfo mds_info = refine_gradient(mds_start, targets, refine_iters);
  try {
    Eigen::Matrix3Xd sdp_start =
        embed_patch_sdp(n, patch.edges, patch.dist, regularize, sdp_opts,
                        p.pseudo_anchors)
            .coords;
    const RefineInfo sdp_info =
        refine_gradient(sdp_start, targets, refine_iters);
    p.local_coords = mds_info.stress < sdp_info.stress ? mds_start : sdp_start;
  } catch (const SolverFailure&) {
    p.local_coords = mds_start;  // relaxation broke down; the MDS start stands
  }
}

/// Embeds every patch (concurrently; patches are independent).
inline void embed_all_patches(const MeasurementGraph& g, PatchSet& ps,
                              EmbedMethod method, bool regularize,
                              const SdpOptions& sdp_opts,
                              int refine_iters = 4000) {
  parallel_for(static_cast<int>(ps.patches.size()), [&](int k) {
    embed_patch(g, ps.patches[k], method, regularize, sdp_opts, refine_iters);
  });
}

/// Registers fragment-derived patches onto their fragment's prior
/// coordinates (reflection allowed), so a patch with a reflection-known
/// fragment carries the fragment's chirality.
inline void register_fragment_patches(const MeasurementGraph& g,
                                      PatchSet& ps) {
  for (auto& p : ps.patches) {
    if (p.origin.kind != PatchOriginKind::Fragment || !p.embedded()) continue;
    const MolecularFragment& frag = g.fragments()[p.origin.a];
    std::vector<int> locals;
    Eigen::Matrix3Xd ref(3, frag.node_ids.size());
    Eigen::Matrix3Xd est(3, frag.node_ids.size());
    int c = 0;
    for (size_t k = 0; k < frag.node_ids.size(); ++k) {
      const int local = p.local_index(frag.node_ids[k]);
      if (local < 0) continue;
      ref.col(c) = frag.local_coords[k].vec();
      est.col(c) = p.local_coords.col(local);
      ++c;
    }
    if (c < 3) continue;
    try {
      const RigidTransform tf =
          orthogonal_procrustes(ref.leftCols(c), est.leftCols(c));
      p.local_coords = (tf.O * p.local_coords).colwise() + tf.t;
      if (p.reflection_known) p.reflection_sign = +1;
    } catch (const DegenerateConfiguration&) {
      // collinear fragment: orientation prior unusable, reflection unknown
      p.reflection_known = false;
    }
  }
}

struct MdaResult {
  // Median per-pair distance estimates for pairs co-occurring in >= 1 patch,
  // keyed by (i, j) with i < j.
  std::map<std::pair<int, int>, double> estimates;
};

/// Median denoising: every pair appearing in several patches gets the median
/// of its embedded distances (good edges keep their measured value), then
/// every patch is re-embedded by classical MDS on its now-complete distance
/// matrix. Single pass.
inline MdaResult mda_denoise(PatchSet& ps, const MeasurementGraph& g) {
  MdaResult out;
  std::map<std::pair<int, int>, std::vector<double>> samples;
  for (const auto& p : ps.patches) {
    if (!p.embedded()) throw std::logic_error("mda needs embedded patches");
    for (int a = 0; a < p.size(); ++a)
      for (int b = a + 1; b < p.size(); ++b) {
        const double d = (p.local_coords.col(a) - p.local_coords.col(b)).norm();
        samples[{p.node_ids[a], p.node_ids[b]}].push_back(d);
      }
  }
  for (auto& [key, vals] : samples) {
    const Edge* e = g.find_edge(key.first, key.second);
    if (e && e->kind == EdgeKind::Good) {
      out.estimates[key] = e->d;  // hard prior wins over any re-estimate
      continue;
    }
    std::sort(vals.begin(), vals.end());
    const size_t k = vals.size();
    out.estimates[key] =
        k % 2 ? vals[k / 2] : 0.5 * (vals[k / 2 - 1] + vals[k / 2]);
  }

  parallel_for(static_cast<int>(ps.patches.size()), [&](int idx) {
    Patch& p = ps.patches[idx];
    const int n = p.size();
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const auto it =
            out.estimates.find({p.node_ids[a], p.node_ids[b]});
        D(a, b) = D(b, a) = it->second;
      }
    p.local_coords = cmds(D, 3).coords;
  });
  register_fragment_patches(g, ps);
  return out;
}

}  // namespace stitch3d
