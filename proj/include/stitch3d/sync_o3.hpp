#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "stitch3d/align.hpp"
#include "stitch3d/rng.hpp"

namespace stitch3d {

struct SyncO3Result {
  // Orthogonal matrix to apply to each patch's local coordinates; identity
  // for patches outside the synchronized component.
  std::vector<Eigen::Matrix3d> transforms;
  Eigen::VectorXd top_eigenvalues;  // first 6 eigenvalues of the normalized
                                    // alignment operator, descending
  double spectral_gap = 0.0;        // lambda_3 - lambda_4
  std::vector<char> in_main;        // patch participated in the sync
  int main_component_size = 0;
};

struct SyncOptions {
  bool so3_only = false;    // project onto rotations (det +1) instead of O(3)
  double tol = 1e-10;
  int min_overlap = 4;
};

namespace detail {

/// Top eigenpairs of a symmetric operator by shifted block subspace
/// iteration (deterministic start), with a dense fallback when the gap is
/// too small to converge within the iteration cap.
inline void top_eigenpairs(const Eigen::SparseMatrix<double>& B, int want,
                           double tol, int cap, Eigen::VectorXd& values,
                           Eigen::MatrixXd& vectors) {
  const int n = static_cast<int>(B.rows());
  const int q = std::min(n, want + 6);
  // Shift by +I so the algebraically largest eigenvalues dominate in
  // magnitude (the spectrum lives in [-1, 1]).
  Rng rng(derive_seed(0x517c, "subspace", n));
  Eigen::MatrixXd X(n, q);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < q; ++j) X(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  X = qr.householderQ() * Eigen::MatrixXd::Identity(n, q);

  Eigen::VectorXd ritz;
  for (int it = 0; it < cap; ++it) {
    Eigen::MatrixXd Y = B * X + X;
    Eigen::HouseholderQR<Eigen::MatrixXd> step(Y);
    X = step.householderQ() * Eigen::MatrixXd::Identity(n, q);
    if (it % 5 == 4 || it == cap - 1) {
      const Eigen::MatrixXd BX = B * X;
      const Eigen::MatrixXd T = X.transpose() * BX;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (T + T.transpose()));
      // reorder descending
      Eigen::MatrixXd rot(q, q);
      ritz.resize(q);
      for (int k = 0; k < q; ++k) {
        ritz(k) = es.eigenvalues()(q - 1 - k);
        rot.col(k) = es.eigenvectors().col(q - 1 - k);
      }
      const Eigen::MatrixXd V = X * rot;
      const Eigen::MatrixXd R = BX * rot - V * ritz.asDiagonal();
      double worst = 0;
      for (int k = 0; k < want; ++k) worst = std::max(worst, R.col(k).norm());
      if (worst <= tol) {
        values = ritz.head(want);
        vectors = V.leftCols(want);
        return;
      }
      X = V;
    }
  }
  // Dense fallback: unconditional and exact enough for the sizes here.
  const Eigen::MatrixXd Bd(B);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Bd);
  values.resize(want);
  vectors.resize(n, want);
  for (int k = 0; k < want; ++k) {
    values(k) = es.eigenvalues()(n - 1 - k);
    vectors.col(k) = es.eigenvectors().col(n - 1 - k);
  }
}

inline std::vector<int> patch_graph_components(const PatchGraph& pg) {
  std::vector<int> comp(pg.patch_count, -1);
  const auto adj = pg.adjacency();
  int c = 0;
  for (int start = 0; start < pg.patch_count; ++start) {
    if (comp[start] >= 0) continue;
    std::vector<int> stack{start};
    comp[start] = c;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const auto& [w, e] : adj[v])
        if (comp[w] < 0) {
          comp[w] = c;
          stack.push_back(w);
        }
    }
    ++c;
  }
  return comp;
}

inline Eigen::Matrix3d project_orthogonal(const Eigen::Matrix3d& m,
                                          bool so3_only) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d o = svd.matrixU() * svd.matrixV().transpose();
  if (so3_only && o.determinant() < 0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1;
    o = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return o;
}

}  // namespace detail

/// Eigenvector synchronization over O(3): stack the pairwise alignments
/// into the 3N x 3N block matrix H, normalize by patch degrees, and read
/// the per-patch orthogonal transforms off the top three eigenvectors
/// (computed through the similar symmetric operator D^-1/2 H D^-1/2).
/// Works on the largest patch-graph component; other patches keep identity
/// transforms and are flagged.
inline SyncO3Result sync_O3(const PatchGraph& pg,
                            const SyncOptions& opts = {}) {
  SyncO3Result out;
  const int N = pg.patch_count;
  out.transforms.assign(N, Eigen::Matrix3d::Identity());
  out.in_main.assign(N, 0);
  if (N == 0) return out;

  const std::vector<int> comp = detail::patch_graph_components(pg);
  int n_comp = 0;
  for (int c : comp) n_comp = std::max(n_comp, c + 1);
  std::vector<int> size(n_comp, 0);
  for (int c : comp) ++size[c];
  const int main_c = static_cast<int>(
      std::max_element(size.begin(), size.end()) - size.begin());
  out.main_component_size = size[main_c];

  std::vector<int> local(N, -1);
  std::vector<int> members;
  for (int i = 0; i < N; ++i)
    if (comp[i] == main_c) {
      local[i] = static_cast<int>(members.size());
      members.push_back(i);
      out.in_main[i] = 1;
    }
  const int M = static_cast<int>(members.size());
  if (M == 1) {
    out.top_eigenvalues = Eigen::VectorXd::Zero(6);
    out.top_eigenvalues.head(3).setOnes();
    out.spectral_gap = 1.0;
    return out;
  }

  Eigen::VectorXd deg = Eigen::VectorXd::Zero(M);
  for (const auto& e : pg.edges)
    if (local[e.k] >= 0 && local[e.l] >= 0) {
      deg(local[e.k]) += 1;
      deg(local[e.l]) += 1;
    }

  // B = D^-1/2 H D^-1/2, assembled blockwise.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(pg.edges.size() * 18);
  for (const auto& e : pg.edges) {
    const int k = local[e.k], l = local[e.l];
    if (k < 0 || l < 0) continue;
    const double w = 1.0 / std::sqrt(deg(k) * deg(l));
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        trips.emplace_back(3 * k + r, 3 * l + c, w * e.h(r, c));
        trips.emplace_back(3 * l + c, 3 * k + r, w * e.h(r, c));
      }
  }
  Eigen::SparseMatrix<double> B(3 * M, 3 * M);
  B.setFromTriplets(trips.begin(), trips.end());

  const int cap = 10 * static_cast<int>(std::sqrt(static_cast<double>(M))) + 20;
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  detail::top_eigenpairs(B, 6, opts.tol, cap, values, vectors);
  out.top_eigenvalues = values;
  out.spectral_gap = values(2) - values(3);

  // Random-walk eigenvectors: v = D^-1/2 u.
  Eigen::MatrixXd V = vectors.leftCols(3);
  for (int k = 0; k < M; ++k)
    V.middleRows(3 * k, 3) /= std::sqrt(deg(k));

  std::vector<Eigen::Matrix3d> blocks(M);
  for (int k = 0; k < M; ++k)
    blocks[k] = detail::project_orthogonal(V.middleRows(3 * k, 3),
                                           opts.so3_only);
  // Gauge: right-multiply every block by the first one's inverse, pinning
  // the first synchronized patch to the identity.
  const Eigen::Matrix3d g0 = blocks[0].transpose();
  for (int k = 0; k < M; ++k) {
    const Eigen::Matrix3d gi = blocks[k] * g0;
    // the block estimates the inverse pose; patches get its transpose
    out.transforms[members[k]] = gi.transpose();
  }
  return out;
}

/// Registration error between two transform families after factoring out
/// the best global orthogonal alignment, plus the share of patches whose
/// reflection ended up wrong.
inline std::pair<double, double> mse_transforms(
    const std::vector<Eigen::Matrix3d>& est,
    const std::vector<Eigen::Matrix3d>& truth) {
  if (est.size() != truth.size() || est.empty())
    throw std::invalid_argument("mse_transforms needs matched transform lists");
  const int N = static_cast<int>(est.size());
  Eigen::Matrix3d Q = Eigen::Matrix3d::Zero();
  for (int i = 0; i < N; ++i) Q += est[i] * truth[i].transpose();
  Q /= static_cast<double>(N);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      Q, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d O = svd.matrixV() * svd.matrixU().transpose();
  const double mse = 6.0 - 2.0 * svd.singularValues().sum();
  int wrong = 0;
  for (int i = 0; i < N; ++i)
    if ((O * est[i]).determinant() * truth[i].determinant() < 0) ++wrong;
  return {std::max(0.0, mse), static_cast<double>(wrong) / N};
}

/// Z2-then-SO(3) path: normalize reflections with a fixed mirror wherever
/// the sign says so, rebuild the pairwise alignments (now rotation-only),
/// and synchronize over SO(3). Returns the mirrored patch set alongside.
inline std::pair<PatchSet, SyncO3Result> sync_SO3_given_reflections(
    const PatchSet& ps, const std::vector<int>& signs,
    const SyncOptions& opts = {}) {
  if (signs.size() != ps.patches.size())
    throw std::invalid_argument("need one sign per patch");
  PatchSet mirrored = ps;
  for (size_t k = 0; k < mirrored.patches.size(); ++k)
    if (signs[k] < 0)
      mirrored.patches[k].local_coords.row(2) *= -1.0;
  const PatchGraph pg = build_patch_graph(mirrored, opts.min_overlap);
  SyncOptions so3 = opts;
  so3.so3_only = true;
  SyncO3Result res = sync_O3(pg, so3);
  return {std::move(mirrored), std::move(res)};
}

}  // namespace stitch3d
