#pragma once

#include <vector>

#include <Eigen/Dense>

#include "stitch3d/common.hpp"
#include "stitch3d/sdp.hpp"

namespace stitch3d {

/// Sign synchronization data in block form: sensor-sensor measurements S,
/// sensor-anchor measurements U (entries in {-1, 0, +1}), and the known
/// anchor signs a. The anchor-anchor block is implied (a a').
struct Z2Problem {
  Eigen::MatrixXd S;  // l x l, symmetric, zero diagonal
  Eigen::MatrixXd U;  // l x k
  Eigen::VectorXd a;  // k anchor signs, +-1

  int sensors() const { return static_cast<int>(S.rows()); }
  int anchor_count() const { return static_cast<int>(a.size()); }

  /// Degree of each sensor counting sensor-sensor and sensor-anchor edges.
  Eigen::VectorXd sensor_degrees() const {
    return S.cwiseAbs().rowwise().sum() + U.cwiseAbs().rowwise().sum();
  }
};

enum class QcqpConstraint { UnitSphere, DegreeWeighted };
enum class Z2SdpForm { Y, XY };

struct Z2EigenResult {
  std::vector<int> signs;
  int ambiguous = 0;  // entries with magnitude below the sign threshold
};

/// Anchor-free sign synchronization: signs of the top eigenvector of the
/// degree-normalized measurement matrix, gauge-fixed so the first sign is
/// positive. Near-zero entries are reported and resolved to +1.
inline Z2EigenResult sync_z2_eigen(const Eigen::MatrixXd& Z) {
  const int n = static_cast<int>(Z.rows());
  if (Z.cols() != n || n < 1)
    throw std::invalid_argument("measurement matrix must be square");
  Eigen::VectorXd deg = Z.cwiseAbs().rowwise().sum();
  // connectivity of the measurement support
  {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int cnt = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w = 0; w < n; ++w)
        if (!seen[w] && Z(v, w) != 0) {
          seen[w] = 1;
          ++cnt;
          stack.push_back(w);
        }
    }
    if (cnt != n)
      throw GraphDisconnected("sign synchronization needs a connected graph");
  }
  Eigen::VectorXd dsi = deg.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd B = dsi.asDiagonal() * Z * dsi.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (B + B.transpose()));
  Eigen::VectorXd v = dsi.asDiagonal() * eig.eigenvectors().col(n - 1);

  Z2EigenResult out;
  out.signs.assign(n, 1);
  const double flip = v(0) < 0 ? -1.0 : 1.0;  // gauge: first sign positive
  for (int i = 0; i < n; ++i) {
    const double x = flip * v(i);
    if (std::abs(x) < 1e-12) {
      ++out.ambiguous;
      out.signs[i] = 1;
    } else {
      out.signs[i] = x > 0 ? 1 : -1;
    }
  }
  return out;
}

namespace detail {

struct QcqpSolution {
  Eigen::VectorXd z;
  double lambda = 0.0;
};

/// Minimizes z'Az - 2 z'f subject to z'z = target, A symmetric positive
/// semidefinite, via the secular equation on A's eigenbasis. The global
/// minimizer has multiplier lambda >= -lambda_min(A); the squared-norm
/// profile g is strictly decreasing there, so bisection brackets the root.
inline QcqpSolution constrained_quadratic(const Eigen::MatrixXd& A,
                                          const Eigen::VectorXd& f,
                                          double target) {
  const int n = static_cast<int>(A.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  const Eigen::VectorXd lam = eig.eigenvalues();  // ascending
  const Eigen::VectorXd beta = eig.eigenvectors().transpose() * f;

  auto norm2_at = [&](double lambda) {
    double s = 0;
    for (int i = 0; i < n; ++i) {
      const double d = lambda + lam(i);
      s += (beta(i) * beta(i)) / (d * d);
    }
    return s;
  };

  const double lam0 = lam(0);
  const double scale = std::max(1.0, lam(n - 1) - lam0);
  double lo = -lam0 + 1e-12 * scale;
  if (norm2_at(lo) < target) {
    // Hard case: the anchor load has (numerically) no component on the
    // bottom eigenspace; pad the solution inside it to reach the sphere.
    QcqpSolution out;
    out.lambda = -lam0;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    double used = 0;
    for (int i = 0; i < n; ++i) {
      const double d = out.lambda + lam(i);
      if (std::abs(d) > 1e-10 * scale) {
        alpha(i) = beta(i) / d;
        used += alpha(i) * alpha(i);
      }
    }
    const double pad = std::sqrt(std::max(0.0, target - used));
    alpha(0) += pad;
    out.z = eig.eigenvectors() * alpha;
    return out;
  }

  double hi = lo + scale;
  while (norm2_at(hi) > target) {
    lo = hi;
    hi = 2 * hi + scale;
    if (!std::isfinite(hi)) throw SolverFailure("multiplier search diverged");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (norm2_at(mid) > target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(hi))) break;
  }
  double lambda = 0.5 * (lo + hi);
  // Newton polish on g(lambda) - target
  for (int it = 0; it < 8; ++it) {
    double g = 0, dg = 0;
    for (int i = 0; i < n; ++i) {
      const double d = lambda + lam(i);
      g += (beta(i) * beta(i)) / (d * d);
      dg += -2.0 * (beta(i) * beta(i)) / (d * d * d);
    }
    const double step = (g - target) / dg;
    const double next = lambda - step;
    if (next <= -lam0 || !std::isfinite(next)) break;
    lambda = next;
  }

  QcqpSolution out;
  out.lambda = lambda;
  Eigen::VectorXd alpha(n);
  for (int i = 0; i < n; ++i) alpha(i) = beta(i) / (lambda + lam(i));
  out.z = eig.eigenvectors() * alpha;
  return out;
}

}  // namespace detail

struct Z2QcqpResult {
  std::vector<int> signs;
  Eigen::VectorXd z;     // relaxed solution (for stationarity checks)
  double lambda = 0.0;
};

/// Anchored sign synchronization as a quadratically constrained quadratic
/// program: minimize z'(D_S - S)z - 2 gamma z'Ua over the sphere z'z = l
/// (UnitSphere) or the degree-weighted ellipsoid z'D_S z = sum(deg)
/// (DegreeWeighted, solved through the change of variable D_S^1/2 z).
inline Z2QcqpResult sync_z2_anchors_qcqp(const Z2Problem& p,
                                         QcqpConstraint constraint,
                                         double gamma = 1.0) {
  if (p.anchor_count() < 1) throw std::invalid_argument("need >= 1 anchor");
  const int l = p.sensors();
  const Eigen::VectorXd deg = p.sensor_degrees();
  if (l > 0 && deg.minCoeff() < 1)
    throw std::invalid_argument("every sensor needs at least one measurement");
  const Eigen::MatrixXd A = Eigen::MatrixXd(deg.asDiagonal()) - p.S;
  const Eigen::VectorXd f = gamma * (p.U * p.a);

  Z2QcqpResult out;
  if (constraint == QcqpConstraint::UnitSphere) {
    auto sol = detail::constrained_quadratic(A, f, static_cast<double>(l));
    out.z = sol.z;
    out.lambda = sol.lambda;
  } else {
    const Eigen::VectorXd dh = deg.cwiseSqrt();
    const Eigen::VectorXd dhi = dh.cwiseInverse();
    const Eigen::MatrixXd At =
        dhi.asDiagonal() * A * dhi.asDiagonal();
    const Eigen::VectorXd ft = dhi.asDiagonal() * f;
    auto sol = detail::constrained_quadratic(At, ft, deg.sum());
    out.z = dhi.asDiagonal() * sol.z;
    out.lambda = sol.lambda;
  }
  out.signs.assign(l, 1);
  for (int i = 0; i < l; ++i) out.signs[i] = out.z(i) >= 0 ? 1 : -1;
  return out;
}

/// Anchored sign synchronization by semidefinite relaxation.
/// Form Y: maximize tr(Z Yps) over correlation matrices with the
/// anchor-anchor block pinned; signs come from the top eigenvector,
/// calibrated against the anchors. Form XY: collapse the anchor block into
/// a linear term and a Schur-complement cone on (Yps, x).
inline std::vector<int> sync_z2_anchors_sdp(const Z2Problem& p, Z2SdpForm form,
                                            const SdpOptions& opts = {}) {
  if (p.anchor_count() < 1) throw std::invalid_argument("need >= 1 anchor");
  const int l = p.sensors();
  const int k = p.anchor_count();

  if (form == Z2SdpForm::Y) {
    const int N = l + k;
    SdpProblem prob;
    prob.init(N);
    prob.sense = SdpSense::Maximize;
    prob.C = Eigen::MatrixXd::Zero(N, N);
    prob.C.topLeftCorner(l, l) = p.S;
    prob.C.topRightCorner(l, k) = p.U;
    prob.C.bottomLeftCorner(k, l) = p.U.transpose();
    prob.C.bottomRightCorner(k, k) = p.a * p.a.transpose();
    for (int i = 0; i < N; ++i) {
      SdpConstraint c;
      c.entries.push_back({i, i, 1.0});
      c.b = 1.0;
      prob.constraints.push_back(c);
    }
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        SdpConstraint c;
        c.entries.push_back({l + i, l + j, 1.0});
        c.b = p.a(i) * p.a(j);
        prob.constraints.push_back(c);
      }
    SdpOptions so = opts;
    so.dim_cap = std::max(opts.dim_cap, N);
    const SdpSolution sol = solve_sdp(prob, so);
    if (sol.status != SdpStatus::Optimal)
      throw SolverFailure("Z2 SDP (form Y) failed");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sol.X);
    Eigen::VectorXd v = eig.eigenvectors().col(N - 1);
    // orient the eigenvector by the anchors
    double dot = 0;
    for (int j = 0; j < k; ++j) dot += v(l + j) * p.a(j);
    if (dot < 0) v = -v;
    std::vector<int> signs(l, 1);
    for (int i = 0; i < l; ++i) signs[i] = v(i) >= 0 ? 1 : -1;
    return signs;
  }

  // Form XY on the (l+1)-dimensional block [[Yps, x], [x', 1]].
  const int N = l + 1;
  SdpProblem prob;
  prob.init(N);
  prob.sense = SdpSense::Maximize;
  prob.C = Eigen::MatrixXd::Zero(N, N);
  prob.C.topLeftCorner(l, l) = p.S;
  const Eigen::VectorXd ua = p.U * p.a;
  // 2 x'Ua splits across the two symmetric off-diagonal blocks
  prob.C.topRightCorner(l, 1) = ua;
  prob.C.bottomLeftCorner(1, l) = ua.transpose();
  for (int i = 0; i < N; ++i) {
    SdpConstraint c;
    c.entries.push_back({i, i, 1.0});
    c.b = 1.0;
    prob.constraints.push_back(c);
  }
  SdpOptions so = opts;
  so.dim_cap = std::max(opts.dim_cap, N);
  const SdpSolution sol = solve_sdp(prob, so);
  if (sol.status != SdpStatus::Optimal)
    throw SolverFailure("Z2 SDP (form XY) failed");
  std::vector<int> signs(l, 1);
  for (int i = 0; i < l; ++i) signs[i] = sol.X(i, l) >= 0 ? 1 : -1;
  return signs;
}

}  // namespace stitch3d
