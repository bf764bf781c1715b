#pragma once

#include <cassert>
#include <vector>

#include <Eigen/Dense>

#include "stitch3d/common.hpp"

namespace stitch3d {

struct DistanceTarget {
  int i = 0, j = 0;
  double d = 0.0;
  double weight = 1.0;
};

struct RefineInfo {
  int iterations = 0;
  double stress = 0.0;
  double gradient_norm = 0.0;
};

namespace detail {

inline double stress_value(const Eigen::Matrix3Xd& x,
                           const std::vector<DistanceTarget>& targets) {
  double s = 0;
  for (const auto& t : targets) {
    const double r = (x.col(t.i) - x.col(t.j)).norm() - t.d;
    s += t.weight * r * r;
  }
  return s;
}

inline Eigen::Matrix3Xd stress_gradient(
    const Eigen::Matrix3Xd& x, const std::vector<DistanceTarget>& targets) {
  Eigen::Matrix3Xd g = Eigen::Matrix3Xd::Zero(3, x.cols());
  for (const auto& t : targets) {
    const Eigen::Vector3d diff = x.col(t.i) - x.col(t.j);
    const double r = diff.norm();
    if (r < 1e-14) continue;  // coincident points contribute no direction
    const Eigen::Vector3d gi = 2.0 * t.weight * (r - t.d) / r * diff;
    g.col(t.i) += gi;
    g.col(t.j) -= gi;
  }
  return g;
}

}  // namespace detail

/// Steepest descent with Armijo backtracking on the weighted stress
/// sum w_ij (||p_i - p_j|| - d_ij)^2. The objective never increases; stops
/// at max_iter or when the gradient norm drops below grad_tol.
inline RefineInfo refine_gradient(Eigen::Matrix3Xd& coords,
                                  const std::vector<DistanceTarget>& targets,
                                  int max_iter = 500,
                                  double grad_tol = 1e-9) {
  RefineInfo info;
  if (targets.empty() || coords.cols() == 0) return info;
  double f = detail::stress_value(coords, targets);
  double step = 1.0;
  // Scale the first trial step so a unit gradient moves points a fraction of
  // the mean target length.
  {
    double mean_d = 0;
    for (const auto& t : targets) mean_d += t.d;
    mean_d /= static_cast<double>(targets.size());
    if (mean_d > 0) step = 0.1 * mean_d;
  }
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::Matrix3Xd g = detail::stress_gradient(coords, targets);
    const double gnorm = g.norm();
    info.gradient_norm = gnorm;
    if (gnorm < grad_tol) break;
    const double g2 = gnorm * gnorm;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Eigen::Matrix3Xd trial = coords - step * g;
      const double ft = detail::stress_value(trial, targets);
      if (ft <= f - 1e-4 * step * g2) {
        assert(ft <= f);
        coords = trial;
        f = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++info.iterations;
    if (!accepted) break;  // no decrease representable at this scale
    step *= 2.0;
  }
  info.stress = f;
  return info;
}

}  // namespace stitch3d
