#pragma once

#include <Eigen/Dense>

#include "stitch3d/types.hpp"

namespace stitch3d {

struct RigidTransform {
  Eigen::Matrix3d O = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return O * p + t; }
};

/// Least-squares registration: the (O, t) with O in O(3) minimizing
/// sum_i ||ref_i - (O * est_i + t)||^2 over matching columns.
/// Throws DegenerateConfiguration when the reference points are collinear.
inline RigidTransform orthogonal_procrustes(const Eigen::Matrix3Xd& ref,
                                            const Eigen::Matrix3Xd& est) {
  if (ref.cols() != est.cols() || ref.cols() < 3)
    throw DegenerateConfiguration("registration needs >= 3 matched points");
  const Eigen::Vector3d cr = ref.rowwise().mean();
  const Eigen::Vector3d ce = est.rowwise().mean();
  const Eigen::Matrix3Xd rc = ref.colwise() - cr;
  const Eigen::Matrix3Xd ec = est.colwise() - ce;
  {
    Eigen::JacobiSVD<Eigen::Matrix3Xd> rank_check(rc);
    const auto& sv = rank_check.singularValues();
    if (sv(1) <= 1e-9 * sv(0))
      throw DegenerateConfiguration("reference points are collinear");
  }
  const Eigen::Matrix3d B = ec * rc.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(B, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  RigidTransform out;
  out.O = svd.matrixV() * svd.matrixU().transpose();
  out.t = cr - out.O * ce;
  return out;
}

/// Least-squares registration constrained to a fixed determinant sign
/// (+1 rotation, -1 reflection); returns the transform and its RMS residual.
inline std::pair<RigidTransform, double> orthogonal_procrustes_det(
    const Eigen::Matrix3Xd& ref, const Eigen::Matrix3Xd& est, int target_det) {
  const Eigen::Vector3d cr = ref.rowwise().mean();
  const Eigen::Vector3d ce = est.rowwise().mean();
  const Eigen::Matrix3Xd rc = ref.colwise() - cr;
  const Eigen::Matrix3Xd ec = est.colwise() - ce;
  const Eigen::Matrix3d B = ec * rc.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(B, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::Matrix3d O = svd.matrixV() * svd.matrixU().transpose();
  if ((O.determinant() < 0) != (target_det < 0)) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1;  // flip the least-significant singular direction
    O = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  RigidTransform out;
  out.O = O;
  out.t = cr - O * ce;
  const double rms = std::sqrt(
      (rc - O * ec).squaredNorm() / static_cast<double>(ref.cols()));
  return {out, rms};
}

namespace detail {

/// Columns of (ref, est) restricted to nodes localized in est.
inline std::pair<Eigen::Matrix3Xd, Eigen::Matrix3Xd> localized_columns(
    const GroundTruth& ref, const GlobalEmbedding& est) {
  if (ref.size() != est.size())
    throw std::invalid_argument("truth/embedding size mismatch");
  const int k = est.localized_count();
  Eigen::Matrix3Xd a(3, k), b(3, k);
  int c = 0;
  for (int i = 0; i < est.size(); ++i) {
    if (!est.coords[i]) continue;
    a.col(c) = ref.coords[i].vec();
    b.col(c) = est.coords[i]->vec();
    ++c;
  }
  return {a, b};
}

}  // namespace detail

inline RigidTransform procrustes_align(const GroundTruth& ref,
                                       const GlobalEmbedding& est) {
  auto [a, b] = detail::localized_columns(ref, est);
  return orthogonal_procrustes(a, b);
}

/// Average normalized error between two matched point sets: Frobenius
/// mismatch after optimal rigid alignment of est onto ref, normalized by the
/// spread of ref about its centroid. Rigid-invariant and scale-free.
inline double ane_points(const Eigen::Matrix3Xd& ref,
                         const Eigen::Matrix3Xd& est) {
  const RigidTransform tf = orthogonal_procrustes(ref, est);
  const Eigen::Matrix3Xd aligned =
      (tf.O * est).colwise() + tf.t;
  const Eigen::Vector3d c = ref.rowwise().mean();
  const double denom = (ref.colwise() - c).norm();
  if (denom == 0) throw DegenerateConfiguration("reference has zero spread");
  return (ref - aligned).norm() / denom;
}

/// ANE over the localized nodes of an embedding.
inline double ane(const GroundTruth& ref, const GlobalEmbedding& est) {
  auto [a, b] = detail::localized_columns(ref, est);
  return ane_points(a, b);
}

/// delta = mean(true/estimated), kappa = mean(|est - true| / true), over
/// matched per-edge length lists.
inline ScalingStats scaling_stats(const std::vector<double>& estimated,
                                  const std::vector<double>& true_lengths) {
  if (estimated.size() != true_lengths.size() || estimated.empty())
    throw std::invalid_argument("scaling_stats needs matched nonempty lists");
  ScalingStats s;
  for (size_t e = 0; e < estimated.size(); ++e) {
    s.delta += true_lengths[e] / estimated[e];
    s.kappa += std::abs(estimated[e] - true_lengths[e]) / true_lengths[e];
  }
  s.delta /= static_cast<double>(estimated.size());
  s.kappa /= static_cast<double>(estimated.size());
  return s;
}

/// Scaling stats of a graph's measured lengths against ground truth.
inline ScalingStats scaling_stats(const MeasurementGraph& g,
                                  const GroundTruth& truth) {
  std::vector<double> est, len;
  est.reserve(g.m());
  len.reserve(g.m());
  for (const auto& e : g.edges()) {
    est.push_back(e.d);
    len.push_back(distance(truth.coords[e.i], truth.coords[e.j]));
  }
  return scaling_stats(est, len);
}

}  // namespace stitch3d
