#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "stitch3d/patches.hpp"
#include "stitch3d/refine.hpp"

namespace stitch3d {

/// Rows of the translation least-squares system: one equation per measured
/// edge covered by at least one patch, p_i - p_j = rhs, with the rhs the
/// per-axis median of the patch-frame displacements. The implied matrix has
/// exactly two nonzeros per row and the all-ones vector in its null space.
struct TranslationSystem {
  int n = 0;
  std::vector<std::array<int, 2>> rows;  // (i, j)
  Eigen::Matrix3Xd rhs;                  // column per row
};

struct TranslationInfo {
  std::vector<std::vector<int>> unlocalized_components;
  int cg_iterations = 0;
  double normal_residual = 0.0;  // |T'(Tx - b)| / |b|, max over axes
};

/// Applies each patch's synchronized orthogonal transform to its local
/// frame coordinates.
inline PatchSet apply_transforms(const PatchSet& ps,
                                 const std::vector<Eigen::Matrix3d>& transforms) {
  if (transforms.size() != ps.patches.size())
    throw std::invalid_argument("need one transform per patch");
  PatchSet out = ps;
  for (size_t k = 0; k < out.patches.size(); ++k)
    out.patches[k].local_coords = transforms[k] * out.patches[k].local_coords;
  return out;
}

/// Median displacement per measured edge across every patch containing it.
/// A displacement wrecked by one bad patch embedding gets outvoted.
inline TranslationSystem build_translation_system(const PatchSet& ps,
                                                  const MeasurementGraph& g) {
  TranslationSystem sys;
  sys.n = g.n();
  std::vector<std::array<std::vector<double>, 3>> samples;
  std::vector<int> row_of_edge(g.m(), -1);
  for (int e = 0; e < g.m(); ++e) {
    const Edge& edge = g.edges()[e];
    // patches containing both endpoints, via the inverted index
    for (int pid : ps.node_to_patches[edge.i]) {
      const Patch& p = ps.patches[pid];
      const int li = p.local_index(edge.i);
      const int lj = p.local_index(edge.j);
      if (li < 0 || lj < 0) continue;
      if (row_of_edge[e] < 0) {
        row_of_edge[e] = static_cast<int>(samples.size());
        sys.rows.push_back({edge.i, edge.j});
        samples.emplace_back();
      }
      const Eigen::Vector3d d = p.local_coords.col(li) - p.local_coords.col(lj);
      for (int axis = 0; axis < 3; ++axis)
        samples[row_of_edge[e]][axis].push_back(d(axis));
    }
  }
  sys.rhs.resize(3, sys.rows.size());
  for (size_t r = 0; r < sys.rows.size(); ++r) {
    for (int axis = 0; axis < 3; ++axis) {
      auto& v = samples[r][axis];
      std::sort(v.begin(), v.end());
      const size_t k = v.size();
      sys.rhs(axis, r) =
          k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
    }
  }
  return sys;
}

/// Least-squares solve of the displacement system under the zero-mean
/// gauge: Jacobi-preconditioned conjugate gradients on the normal equations
/// (the graph Laplacian of the covered edges), restricted to the largest
/// covered component. Other components are reported, not localized.
inline GlobalEmbedding solve_translations(const TranslationSystem& sys,
                                          TranslationInfo* info = nullptr,
                                          double tol = 1e-10,
                                          int max_iter = 20000) {
  GlobalEmbedding emb(sys.n);
  if (sys.rows.empty()) return emb;

  // covered components via union-find
  std::vector<int> parent(sys.n);
  for (int i = 0; i < sys.n; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& r : sys.rows) parent[find(r[0])] = find(r[1]);
  std::vector<int> comp_size(sys.n, 0);
  std::vector<char> covered(sys.n, 0);
  for (const auto& r : sys.rows) covered[r[0]] = covered[r[1]] = 1;
  for (int v = 0; v < sys.n; ++v)
    if (covered[v]) ++comp_size[find(v)];
  int main_root = -1;
  for (int v = 0; v < sys.n; ++v)
    if (comp_size[v] > (main_root < 0 ? 0 : comp_size[main_root]))
      main_root = v;

  if (info) {
    std::map<int, std::vector<int>> others;
    for (int v = 0; v < sys.n; ++v)
      if (covered[v] && find(v) != main_root) others[find(v)].push_back(v);
    for (auto& [root, nodes] : others)
      info->unlocalized_components.push_back(std::move(nodes));
  }

  std::vector<int> local(sys.n, -1);
  std::vector<int> members;
  for (int v = 0; v < sys.n; ++v)
    if (covered[v] && find(v) == main_root) {
      local[v] = static_cast<int>(members.size());
      members.push_back(v);
    }
  const int m = static_cast<int>(members.size());

  // normal equations: graph Laplacian over the main component
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
  Eigen::Matrix3Xd b = Eigen::Matrix3Xd::Zero(3, m);
  for (size_t r = 0; r < sys.rows.size(); ++r) {
    const int i = local[sys.rows[r][0]], j = local[sys.rows[r][1]];
    if (i < 0 || j < 0) continue;
    trips.emplace_back(i, j, -1.0);
    trips.emplace_back(j, i, -1.0);
    diag(i) += 1;
    diag(j) += 1;
    b.col(i) += sys.rhs.col(r);
    b.col(j) -= sys.rhs.col(r);
  }
  for (int i = 0; i < m; ++i) trips.emplace_back(i, i, diag(i));
  Eigen::SparseMatrix<double> L(m, m);
  L.setFromTriplets(trips.begin(), trips.end());

  Eigen::Matrix3Xd x = Eigen::Matrix3Xd::Zero(3, m);
  int total_iters = 0;
  double worst_resid = 0;
  for (int axis = 0; axis < 3; ++axis) {
    Eigen::VectorXd rhs = b.row(axis).transpose();
    const double bnorm = rhs.norm();
    if (bnorm == 0) continue;
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd r = rhs;
    Eigen::VectorXd z = r.cwiseQuotient(diag);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    int it = 0;
    for (; it < max_iter; ++it) {
      if (r.norm() <= tol * bnorm) break;
      const Eigen::VectorXd Lp = L * p;
      const double alpha = rz / p.dot(Lp);
      xi += alpha * p;
      r -= alpha * Lp;
      z = r.cwiseQuotient(diag);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    total_iters += it;
    worst_resid = std::max(worst_resid, (L * xi - rhs).norm() / bnorm);
    xi.array() -= xi.mean();  // zero-mean gauge
    x.row(axis) = xi.transpose();
  }
  if (info) {
    info->cg_iterations = total_iters;
    info->normal_residual = worst_resid;
  }
  for (int k = 0; k < m; ++k) emb.coords[members[k]] = Point3(x.col(k));
  return emb;
}

/// Translation synchronization: rotate patches by their synchronized
/// transforms, take per-edge median displacements, and least-squares the
/// global coordinates.
inline GlobalEmbedding sync_translations(
    const PatchSet& ps, const std::vector<Eigen::Matrix3d>& transforms,
    const MeasurementGraph& g, TranslationInfo* info = nullptr) {
  const PatchSet rotated = apply_transforms(ps, transforms);
  const TranslationSystem sys = build_translation_system(rotated, g);
  return solve_translations(sys, info);
}

/// Post-least-squares rescale: the least-squares step shrinks the
/// configuration; multiply by the mean ratio of measured to embedded edge
/// lengths, then polish with gradient descent on the rescaled measurements
/// (good edges keep their exact lengths).
inline std::pair<GlobalEmbedding, double> rescale_embedding(
    const MeasurementGraph& g, const GlobalEmbedding& emb,
    int refine_iters = 2000, double good_weight = 10.0) {
  double ratio = 0;
  int count = 0;
  for (const auto& e : g.edges()) {
    if (!emb.coords[e.i] || !emb.coords[e.j]) continue;
    const double d_emb =
        (emb.coords[e.i]->vec() - emb.coords[e.j]->vec()).norm();
    if (d_emb <= 0) continue;
    ratio += e.d / d_emb;
    ++count;
  }
  if (count == 0) return {emb, 1.0};
  const double delta_star = ratio / count;

  GlobalEmbedding out = emb;
  std::vector<int> local(g.n(), -1);
  std::vector<int> members;
  for (int v = 0; v < g.n(); ++v)
    if (out.coords[v]) {
      local[v] = static_cast<int>(members.size());
      members.push_back(v);
    }
  Eigen::Matrix3Xd x(3, members.size());
  for (size_t k = 0; k < members.size(); ++k)
    x.col(k) = delta_star * out.coords[members[k]]->vec();

  std::vector<DistanceTarget> targets;
  for (const auto& e : g.edges()) {
    const int i = local[e.i], j = local[e.j];
    if (i < 0 || j < 0) continue;
    if (e.kind == EdgeKind::Good)
      targets.push_back({i, j, e.d, good_weight});  // exact priors stay put
    else
      targets.push_back({i, j, delta_star * e.d, 1.0});
  }
  refine_gradient(x, targets, refine_iters);
  for (size_t k = 0; k < members.size(); ++k)
    out.coords[members[k]] = Point3(x.col(k));
  return {out, delta_star};
}

}  // namespace stitch3d
