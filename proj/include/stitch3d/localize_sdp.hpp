#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "stitch3d/cmds.hpp"
#include "stitch3d/connectivity.hpp"
#include "stitch3d/rng.hpp"
#include "stitch3d/sdp.hpp"
#include "stitch3d/types.hpp"

namespace stitch3d {

/// A patch-sized localization instance: ns sensors (local ids 0..ns-1),
/// a set of anchors with known coordinates, and measured distances.
struct LocalizationInstance {
  int sensor_count = 0;
  std::vector<std::pair<int, Eigen::Vector3d>> anchors;  // (original id, coord)
  struct Dist {
    int i = 0, j = 0;  // sensor ids
    double d = 0.0;
  };
  std::vector<Dist> sensor_sensor;
  // ((anchor index, sensor id), distance)
  std::vector<std::pair<std::pair<int, int>, double>> anchor_sensor;
};

enum class WulVariant { Feasibility, FullSdp };
enum class Localizability { UniquelyLocalizable, NotCertified };

struct WulDiagnostics {
  Eigen::VectorXd w;             // per patch node; anchors pinned at 0
  std::vector<int> kept;         // patch-local ids with w below threshold
  std::vector<int> removed;
  std::array<int, 4> anchors{};  // patch-local pseudo-anchor ids
};

/// Feasibility form of the anchored localization SDP: the (3+ns)-dim cone
/// variable Z = [I X; X' Y] with one equality per measured distance and the
/// top-left block pinned to the identity.
inline SdpProblem build_ul_feasibility_sdp(const LocalizationInstance& inst) {
  if (inst.anchors.size() < 4)
    throw InsufficientAnchors("anchored localization needs >= 4 anchors");
  const int ns = inst.sensor_count;
  SdpProblem p;
  p.init(3 + ns);
  // Identity block: Z_kk = 1 and Z_kl = 0 for k < l <= 3.
  for (int k = 0; k < 3; ++k)
    for (int l = k; l < 3; ++l) {
      SdpConstraint c;
      c.entries.push_back({k, l, 1.0});
      c.b = (k == l) ? 1.0 : 0.0;
      p.constraints.push_back(c);
    }
  // Sensor-sensor edges: (0; e_i - e_j)(0; e_i - e_j)' . Z = d^2.
  for (const auto& e : inst.sensor_sensor) {
    SdpConstraint c;
    const int i = 3 + e.i, j = 3 + e.j;
    c.entries.push_back({i, i, 1.0});
    c.entries.push_back({j, j, 1.0});
    c.entries.push_back({std::min(i, j), std::max(i, j), -1.0});
    c.b = e.d * e.d;
    p.constraints.push_back(c);
  }
  // Anchor-sensor edges: (a; -e_j)(a; -e_j)' . Z = d^2.
  for (const auto& [pair, d] : inst.anchor_sensor) {
    const Eigen::Vector3d a = inst.anchors[pair.first].second;
    const int j = 3 + pair.second;
    SdpConstraint c;
    for (int r = 0; r < 3; ++r)
      for (int col = r; col < 3; ++col)
        c.entries.push_back({r, col, a(r) * a(col)});
    for (int r = 0; r < 3; ++r) c.entries.push_back({r, j, -a(r)});
    c.entries.push_back({j, j, 1.0});
    c.b = d * d;
    p.constraints.push_back(c);
  }
  return p;
}

/// Penalty form of the same instance: minimize the total absolute violation
/// of the squared distances, split into nonnegative slack pairs. The six
/// identity-block constraints stay exact; only distance rows get slacks.
inline SdpProblem build_penalty_localization_sdp(
    const LocalizationInstance& inst) {
  SdpProblem p = build_ul_feasibility_sdp(inst);
  const int m_dist = static_cast<int>(p.constraints.size()) - 6;
  p.lp_dim = 2 * m_dist;
  p.lp_c = Eigen::VectorXd::Ones(p.lp_dim);
  for (int e = 0; e < m_dist; ++e)
    p.constraints[6 + e].lp = {{2 * e, 1.0}, {2 * e + 1, -1.0}};
  return p;
}

/// rank(Z) == d plus Y = XX' certifies that the interior-point solution is
/// the unique localization (max-rank solutions have rank d exactly when the
/// instance is uniquely localizable).
inline Localizability max_rank_check(const SdpSolution& sol, int d,
                                     double tol = 1e-6) {
  if (sol.status != SdpStatus::Optimal) return Localizability::NotCertified;
  const Eigen::MatrixXd& Z = sol.X;
  const int n = static_cast<int>(Z.rows()) - d;
  if (n < 0) return Localizability::NotCertified;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Z);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0) return Localizability::NotCertified;
  if (d < Z.rows() && sv(d) > 1e-6 * sv(0)) return Localizability::NotCertified;
  const Eigen::MatrixXd X = Z.topRightCorner(d, n);
  const Eigen::MatrixXd Y = Z.bottomRightCorner(n, n);
  if ((Y - X.transpose() * X).cwiseAbs().maxCoeff() > tol)
    return Localizability::NotCertified;
  return Localizability::UniquelyLocalizable;
}

namespace detail {

/// Distances of the induced subgraph on `nodes` (patch-local indexing).
struct InducedPatch {
  std::vector<int> nodes;                       // global ids
  std::vector<std::array<int, 2>> edges;        // local endpoints
  std::vector<double> dist;
  std::vector<EdgeKind> kind;
  SimpleGraph graph;                            // local topology
};

inline InducedPatch induce_patch(const MeasurementGraph& g,
                                 const std::vector<int>& nodes) {
  InducedPatch out;
  out.nodes = nodes;
  out.graph = SimpleGraph(static_cast<int>(nodes.size()));
  std::vector<int> local(g.n(), -1);
  for (size_t k = 0; k < nodes.size(); ++k) local[nodes[k]] = static_cast<int>(k);
  const auto adj = g.adjacency();
  for (size_t k = 0; k < nodes.size(); ++k) {
    for (const auto& [w, e] : adj[nodes[k]]) {
      const int lw = local[w];
      if (lw < 0 || static_cast<int>(k) >= lw) continue;
      out.edges.push_back({static_cast<int>(k), lw});
      out.dist.push_back(g.edges()[e].d);
      out.kind.push_back(g.edges()[e].kind);
      out.graph.add_edge(static_cast<int>(k), lw);
    }
  }
  return out;
}

}  // namespace detail

/// Keeps the subset of a patch certified uniquely localizable from a random
/// generic realization: randomize positions, pick a K4 through the center as
/// pseudo-anchors (embedded by classical MDS), solve the anchored SDP on the
/// realization's own distances, and keep the nodes whose Y - XX' diagonal
/// stays below eps. Nodes that a generic framework cannot pin down are the
/// ones a real embedding would misplace.
inline WulDiagnostics extract_localizable_subgraph(
    const detail::InducedPatch& patch, int center_local, double eps,
    WulVariant variant, uint64_t seed, const SdpOptions& opts = {},
    const std::vector<int>& core_local = {}) {
  const int n = static_cast<int>(patch.nodes.size());
  WulDiagnostics out;
  out.w = Eigen::VectorXd::Zero(n);

  // Pseudo-anchors: a K4 through the center when the patch is a star; for
  // other patches prefer a K4 inside the core nodes (anchoring a partition
  // patch in its halo certifies the wrong thing), else any K4.
  std::optional<std::array<int, 4>> anchors4;
  if (center_local >= 0)
    anchors4 = find_pseudo_anchors(patch.graph, center_local);
  else {
    if (!core_local.empty()) anchors4 = find_k4(patch.graph, core_local);
    if (!anchors4) anchors4 = find_k4(patch.graph);
  }
  if (!anchors4) throw NoPseudoAnchors("patch contains no K4");
  out.anchors = *anchors4;

  if (n == 4) {  // the K4 itself; nothing left to test
    out.kept = {0, 1, 2, 3};
    return out;
  }

  // Random generic realization in a box sized by the largest measurement.
  double dmax = 0;
  for (double d : patch.dist) dmax = std::max(dmax, d);
  if (dmax <= 0) dmax = 1.0;
  Rng rng(derive_seed(seed, "wul-realization"));
  std::vector<Eigen::Vector3d> pos(n);
  for (int v = 0; v < n; ++v)
    pos[v] = Eigen::Vector3d(rng.uniform(0, 1.5 * dmax),
                             rng.uniform(0, 1.5 * dmax),
                             rng.uniform(0, 1.5 * dmax));

  std::vector<char> is_anchor(n, 0);
  for (int a : out.anchors) is_anchor[a] = 1;

  // Anchor coordinates from classical MDS on the K4's realization distances
  // (any frame congruent with the realization works).
  Eigen::MatrixXd D4 = Eigen::MatrixXd::Zero(4, 4);
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      D4(a, b) = D4(b, a) =
          (pos[out.anchors[a]] - pos[out.anchors[b]]).norm();
  const CmdsResult mds = cmds(D4, 3);

  LocalizationInstance inst;
  std::vector<int> sensor_id(n, -1);
  for (int v = 0; v < n; ++v)
    if (!is_anchor[v]) {
      sensor_id[v] = inst.sensor_count++;
    }
  std::vector<int> anchor_idx(n, -1);
  for (int a = 0; a < 4; ++a) {
    anchor_idx[out.anchors[a]] = a;
    inst.anchors.emplace_back(out.anchors[a], mds.coords.col(a));
  }
  for (size_t e = 0; e < patch.edges.size(); ++e) {
    const int u = patch.edges[e][0], v = patch.edges[e][1];
    const double d = (pos[u] - pos[v]).norm();
    if (is_anchor[u] && is_anchor[v]) continue;  // fixed by the anchor frame
    if (!is_anchor[u] && !is_anchor[v])
      inst.sensor_sensor.push_back({sensor_id[u], sensor_id[v], d});
    else if (is_anchor[u])
      inst.anchor_sensor.push_back({{anchor_idx[u], sensor_id[v]}, d});
    else
      inst.anchor_sensor.push_back({{anchor_idx[v], sensor_id[u]}, d});
  }

  SdpOptions solve_opts = opts;
  solve_opts.dim_cap = std::max(opts.dim_cap, 3 + inst.sensor_count);
  SdpSolution sol =
      solve_sdp(variant == WulVariant::Feasibility
                    ? build_ul_feasibility_sdp(inst)
                    : build_penalty_localization_sdp(inst),
                solve_opts);
  if (sol.status != SdpStatus::Optimal && variant == WulVariant::Feasibility) {
    // The strict-equality form has no interior; the slack form does and
    // certifies the same node set, so retry with it before giving up.
    sol = solve_sdp(build_penalty_localization_sdp(inst), solve_opts);
  }
  if (sol.status != SdpStatus::Optimal)
    throw SolverFailure("localizability SDP did not reach optimality");

  const int ns = inst.sensor_count;
  const Eigen::MatrixXd X = sol.X.topRightCorner(3, ns);
  const Eigen::MatrixXd Y = sol.X.bottomRightCorner(ns, ns);
  for (int v = 0; v < n; ++v) {
    if (is_anchor[v]) {
      out.kept.push_back(v);
      continue;
    }
    const int s = sensor_id[v];
    out.w(v) = Y(s, s) - X.col(s).squaredNorm();
    if (out.w(v) < eps)
      out.kept.push_back(v);
    else
      out.removed.push_back(v);
  }
  return out;
}

/// Overload working on a node subset of a measurement graph; returned ids
/// are patch-local positions into `nodes`.
inline WulDiagnostics extract_localizable_subgraph(
    const MeasurementGraph& g, const std::vector<int>& nodes, int center_local,
    double eps, WulVariant variant, uint64_t seed, const SdpOptions& opts = {},
    const std::vector<int>& core_local = {}) {
  return extract_localizable_subgraph(detail::induce_patch(g, nodes),
                                      center_local, eps, variant, seed, opts,
                                      core_local);
}

struct PatchEmbedding {
  Eigen::Matrix3Xd coords;
  Eigen::VectorXd per_node_deviation;
  bool degenerate_rank = false;
  SdpStatus status = SdpStatus::Optimal;
};

namespace detail {

inline void fill_deviation(PatchEmbedding& out,
                           const std::vector<std::array<int, 2>>& edges,
                           const std::vector<double>& dist) {
  const int n = static_cast<int>(out.coords.cols());
  out.per_node_deviation = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd incident = Eigen::VectorXd::Zero(n);
  for (size_t e = 0; e < edges.size(); ++e) {
    const int i = edges[e][0], j = edges[e][1];
    const double viol =
        std::abs((out.coords.col(i) - out.coords.col(j)).squaredNorm() -
                 dist[e] * dist[e]);
    out.per_node_deviation(i) += viol;
    out.per_node_deviation(j) += viol;
    incident(i) += 1;
    incident(j) += 1;
  }
  for (int v = 0; v < n; ++v)
    if (incident(v) > 0) out.per_node_deviation(v) /= incident(v);
}

inline void flag_degenerate_rank(PatchEmbedding& out) {
  const int n = static_cast<int>(out.coords.cols());
  if (n <= 4) return;  // planar K4s are legitimate
  const Eigen::Matrix3Xd centered =
      out.coords.colwise() - Eigen::Vector3d(out.coords.rowwise().mean());
  Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
  if (svd.singularValues()(2) <= 1e-6 * svd.singularValues()(0))
    out.degenerate_rank = true;
}

/// Anchor-free variant on the centered Gram matrix; used when the patch has
/// no K4 to serve as pseudo-anchors.
inline PatchEmbedding embed_patch_sdp_gram(
    int n, const std::vector<std::array<int, 2>>& edges,
    const std::vector<double>& dist, bool regularize, const SdpOptions& opts) {
  const int m = static_cast<int>(edges.size());
  SdpProblem p;
  p.init(n, 2 * m);
  p.lp_c = Eigen::VectorXd::Ones(2 * m);
  double mean_d2 = 0;
  for (int e = 0; e < m; ++e) {
    SdpConstraint c;
    const int i = std::min(edges[e][0], edges[e][1]);
    const int j = std::max(edges[e][0], edges[e][1]);
    c.entries.push_back({i, i, 1.0});
    c.entries.push_back({j, j, 1.0});
    c.entries.push_back({i, j, -1.0});
    c.lp = {{2 * e, 1.0}, {2 * e + 1, -1.0}};
    c.b = dist[e] * dist[e];
    p.constraints.push_back(c);
    mean_d2 += c.b;
  }
  mean_d2 /= std::max(1, m);
  {
    // Centering gauge: the all-ones vector lies in the Gram kernel.
    SdpConstraint c;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) c.entries.push_back({i, j, 1.0});
    c.b = 0.0;
    p.constraints.push_back(c);
  }
  if (regularize) p.C = -0.1 * mean_d2 * Eigen::MatrixXd::Identity(n, n);

  SdpOptions solve_opts = opts;
  solve_opts.dim_cap = std::max(opts.dim_cap, n);
  const SdpSolution sol = solve_sdp(p, solve_opts);

  PatchEmbedding out;
  out.status = sol.status;
  if (sol.status != SdpStatus::Optimal && sol.status != SdpStatus::MaxIter)
    throw SolverFailure("patch embedding SDP failed");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sol.X);
  const Eigen::VectorXd ev = eig.eigenvalues();
  out.coords = Eigen::Matrix3Xd::Zero(3, n);
  for (int k = 0; k < 3 && k < n; ++k) {
    const double lambda = std::max(0.0, ev(n - 1 - k));
    out.coords.row(k) =
        std::sqrt(lambda) * eig.eigenvectors().col(n - 1 - k).transpose();
  }
  flag_degenerate_rank(out);
  fill_deviation(out, edges, dist);
  return out;
}

}  // namespace detail

/// Penalty-form SDP embedding of a patch. A K4 inside the patch is embedded
/// by classical MDS and pinned as pseudo-anchors; the remaining nodes enter
/// the anchored cone relaxation minimizing the total absolute violation of
/// squared distances (slack pairs). regularize adds a max-trace term that
/// spreads noisy configurations instead of letting the relaxation crowd
/// them toward the center. Falls back to an anchor-free Gram relaxation for
/// the rare K4-free patch. Coordinates land in the pseudo-anchor frame.
///
/// pseudo_anchors, when given, must index a K4 of the patch; localizability
/// certificates are anchored to a specific K4, so embedding a certified
/// subgraph has to reuse the K4 the certificate was computed with.
inline PatchEmbedding embed_patch_sdp(
    int n, const std::vector<std::array<int, 2>>& edges,
    const std::vector<double>& dist, bool regularize,
    const SdpOptions& opts = {},
    std::optional<std::array<int, 4>> pseudo_anchors = std::nullopt) {
  if (n < 4) throw std::invalid_argument("patch embedding needs >= 4 nodes");
  SimpleGraph graph(n);
  std::vector<std::vector<double>> dmat(n, std::vector<double>(n, -1.0));
  for (size_t e = 0; e < edges.size(); ++e) {
    graph.add_edge(edges[e][0], edges[e][1]);
    dmat[edges[e][0]][edges[e][1]] = dist[e];
    dmat[edges[e][1]][edges[e][0]] = dist[e];
  }
  const auto k4 = pseudo_anchors ? pseudo_anchors : find_k4(graph);
  if (!k4) return detail::embed_patch_sdp_gram(n, edges, dist, regularize, opts);
  const std::array<int, 4>& anchors = *k4;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      if (dmat[anchors[a]][anchors[b]] < 0)
        throw std::invalid_argument("pseudo-anchor set is not a K4 of the patch");

  Eigen::MatrixXd D4 = Eigen::MatrixXd::Zero(4, 4);
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      D4(a, b) = D4(b, a) = dmat[anchors[a]][anchors[b]];
  const CmdsResult mds = cmds(D4, 3);

  LocalizationInstance inst;
  std::vector<int> sensor_id(n, -1), anchor_idx(n, -1);
  for (int a = 0; a < 4; ++a) {
    anchor_idx[anchors[a]] = a;
    inst.anchors.emplace_back(anchors[a], mds.coords.col(a));
  }
  for (int v = 0; v < n; ++v)
    if (anchor_idx[v] < 0) sensor_id[v] = inst.sensor_count++;
  double mean_d2 = 0;
  for (size_t e = 0; e < edges.size(); ++e) {
    const int u = edges[e][0], v = edges[e][1];
    mean_d2 += dist[e] * dist[e];
    if (anchor_idx[u] >= 0 && anchor_idx[v] >= 0) continue;  // pinned by MDS
    if (anchor_idx[u] < 0 && anchor_idx[v] < 0)
      inst.sensor_sensor.push_back({sensor_id[u], sensor_id[v], dist[e]});
    else if (anchor_idx[u] >= 0)
      inst.anchor_sensor.push_back({{anchor_idx[u], sensor_id[v]}, dist[e]});
    else
      inst.anchor_sensor.push_back({{anchor_idx[v], sensor_id[u]}, dist[e]});
  }
  mean_d2 /= std::max<size_t>(1, edges.size());

  if (inst.sensor_count == 0) {  // the patch is exactly the K4
    PatchEmbedding out;
    out.coords = Eigen::Matrix3Xd::Zero(3, n);
    for (int a = 0; a < 4; ++a) out.coords.col(anchors[a]) = mds.coords.col(a);
    detail::fill_deviation(out, edges, dist);
    return out;
  }

  SdpProblem p = build_penalty_localization_sdp(inst);
  if (regularize && inst.sensor_count > 0) {
    p.C = Eigen::MatrixXd::Zero(p.dim, p.dim);
    for (int s = 0; s < inst.sensor_count; ++s) p.C(3 + s, 3 + s) = -0.1 * mean_d2;
  }
  SdpOptions solve_opts = opts;
  solve_opts.dim_cap = std::max(opts.dim_cap, p.dim);
  const SdpSolution sol = solve_sdp(p, solve_opts);

  PatchEmbedding out;
  out.status = sol.status;
  // A breakdown iterate with tiny residuals and a modest gap still beats
  // having no start at all; gradient refinement follows either way.
  const bool salvageable = sol.primal_infeas <= 1e-6 &&
                           sol.dual_infeas <= 1e-6 && sol.gap <= 1e-3;
  if (sol.status != SdpStatus::Optimal && sol.status != SdpStatus::MaxIter &&
      !salvageable)
    throw SolverFailure("patch embedding SDP failed");
  out.coords = Eigen::Matrix3Xd::Zero(3, n);
  for (int a = 0; a < 4; ++a) out.coords.col(anchors[a]) = mds.coords.col(a);
  for (int v = 0; v < n; ++v)
    if (sensor_id[v] >= 0)
      out.coords.col(v) = sol.X.block(0, 3 + sensor_id[v], 3, 1);
  detail::flag_degenerate_rank(out);
  detail::fill_deviation(out, edges, dist);
  return out;
}

}  // namespace stitch3d
