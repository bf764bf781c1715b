#pragma once

#include <vector>

#include <Eigen/Dense>

#include "stitch3d/connectivity.hpp"
#include "stitch3d/rng.hpp"
#include "stitch3d/types.hpp"

namespace stitch3d {

namespace detail {

struct KMeansResult {
  std::vector<int> labels;
  double inertia = 0.0;
};

inline KMeansResult kmeans_once(const Eigen::MatrixXd& points, int K, Rng& rng,
                                int max_iter) {
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  Eigen::MatrixXd centers(K, d);

  // k-means++ seeding
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  int first = rng.uniform_int(0, n - 1);
  centers.row(0) = points.row(first);
  for (int k = 1; k < K; ++k) {
    double total = 0;
    for (int i = 0; i < n; ++i) {
      const double d2 =
          (points.row(i) - centers.row(k - 1)).squaredNorm();
      dist2[i] = std::min(dist2[i], d2);
      total += dist2[i];
    }
    double r = rng.unit() * total;
    int pick = n - 1;
    for (int i = 0; i < n; ++i) {
      r -= dist2[i];
      if (r <= 0) {
        pick = i;
        break;
      }
    }
    centers.row(k) = points.row(pick);
  }

  KMeansResult res;
  res.labels.assign(n, 0);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double d2 = (points.row(i) - centers.row(k)).squaredNorm();
        if (d2 < bd) {
          bd = d2;
          best = k;
        }
      }
      if (best != res.labels[i]) {
        res.labels[i] = best;
        changed = true;
      }
    }
    centers.setZero();
    Eigen::VectorXd count = Eigen::VectorXd::Zero(K);
    for (int i = 0; i < n; ++i) {
      centers.row(res.labels[i]) += points.row(i);
      count(res.labels[i]) += 1;
    }
    for (int k = 0; k < K; ++k) {
      if (count(k) > 0)
        centers.row(k) /= count(k);
      else
        centers.row(k) = points.row(rng.uniform_int(0, n - 1));
    }
    if (!changed && it > 0) break;
  }
  res.inertia = 0;
  for (int i = 0; i < n; ++i)
    res.inertia += (points.row(i) - centers.row(res.labels[i])).squaredNorm();
  return res;
}

}  // namespace detail

/// Normalized-cut spectral partition: K-means (k-means++ seeding, 20
/// restarts, best inertia) on rows of the top-K eigenvector matrix of the
/// random-walk operator D^-1 A, computed through its symmetric similarity
/// transform. All nodes get assigned; deterministic given the seed.
inline std::vector<std::vector<int>> spectral_partition(
    const MeasurementGraph& g, int K, uint64_t seed, int restarts = 20,
    int kmeans_iters = 100) {
  const int n = g.n();
  if (K < 2 || K > n / 4)
    throw std::invalid_argument("need 2 <= K <= n/4");
  const SimpleGraph sg = SimpleGraph::from_measurement(g);
  if (!sg.connected())
    throw GraphDisconnected("spectral partition needs a connected graph");

  Eigen::VectorXd deg = Eigen::VectorXd::Zero(n);
  for (const auto& e : g.edges()) {
    deg(e.i) += 1;
    deg(e.j) += 1;
  }
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) {
    const double w = 1.0 / std::sqrt(deg(e.i) * deg(e.j));
    B(e.i, e.j) = w;
    B(e.j, e.i) = w;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B);
  if (eig.info() != Eigen::Success)
    throw SolverFailure("spectral partition eigendecomposition failed");

  // Random-walk eigenvectors are D^-1/2 times the symmetric ones.
  Eigen::MatrixXd embed(n, K);
  for (int k = 0; k < K; ++k)
    embed.col(k) =
        eig.eigenvectors().col(n - 1 - k).cwiseQuotient(deg.cwiseSqrt());

  Rng rng(derive_seed(seed, "spectral-kmeans"));
  detail::KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    const auto res = detail::kmeans_once(embed, K, rng, kmeans_iters);
    if (res.inertia < best.inertia) best = res;
  }

  std::vector<std::vector<int>> parts(K);
  for (int i = 0; i < n; ++i) parts[best.labels[i]].push_back(i);
  parts.erase(std::remove_if(parts.begin(), parts.end(),
                             [](const auto& p) { return p.empty(); }),
              parts.end());
  return parts;
}

}  // namespace stitch3d
