#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "stitch3d/common.hpp"

namespace stitch3d {

enum class SdpStatus { Optimal, Infeasible, MaxIter, NumericalFailure };
enum class SdpSense { Minimize, Maximize };

/// One linear equality A.X + a'w = b. The symmetric matrix A is stored as
/// upper-triangle entries; off-diagonal entries count twice in the inner
/// product. `lp` holds coefficients on the nonnegative scalar block.
struct SdpConstraint {
  struct Entry {
    int r = 0, c = 0;
    double v = 0.0;
  };
  std::vector<Entry> entries;
  std::vector<std::pair<int, double>> lp;
  double b = 0.0;
};

/// Standard-form semidefinite program over X >= 0 (dim x dim) plus an
/// optional nonnegative scalar block w >= 0 used for slack splitting:
///   optimize  C.X + lp_c'w   subject to  A_i.X + a_i'w = b_i.
struct SdpProblem {
  int dim = 0;
  int lp_dim = 0;
  SdpSense sense = SdpSense::Minimize;
  Eigen::MatrixXd C;       // dim x dim symmetric; zero for feasibility runs
  Eigen::VectorXd lp_c;    // lp_dim
  std::vector<SdpConstraint> constraints;

  void init(int sdp_dim, int lp_block = 0) {
    dim = sdp_dim;
    lp_dim = lp_block;
    C = Eigen::MatrixXd::Zero(dim, dim);
    lp_c = Eigen::VectorXd::Zero(lp_dim);
  }
};

struct SdpSolution {
  Eigen::MatrixXd X;
  Eigen::VectorXd lp_x;
  Eigen::VectorXd y;       // dual multipliers
  double objective_value = 0.0;
  SdpStatus status = SdpStatus::NumericalFailure;
  int iterations = 0;
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  double gap = 0.0;
};

struct SdpOptions {
  double tol = 1e-8;
  int max_iter = 120;
  int dim_cap = 120;
};

namespace detail {

inline double constraint_dot(const SdpConstraint& a, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& w) {
  double s = 0;
  for (const auto& e : a.entries)
    s += e.v * X(e.r, e.c) * (e.r == e.c ? 1.0 : 2.0);
  for (const auto& [k, v] : a.lp) s += v * w(k);
  return s;
}

inline void add_scaled(const SdpConstraint& a, double y, Eigen::MatrixXd& M,
                       Eigen::VectorXd& lp) {
  for (const auto& e : a.entries) {
    M(e.r, e.c) += y * e.v;
    if (e.r != e.c) M(e.c, e.r) += y * e.v;
  }
  for (const auto& [k, v] : a.lp) lp(k) += y * v;
}

inline double frob_norm(const SdpConstraint& a) {
  double s = 0;
  for (const auto& e : a.entries) s += e.v * e.v * (e.r == e.c ? 1.0 : 2.0);
  for (const auto& [k, v] : a.lp) s += v * v;
  return std::sqrt(s);
}

/// tr(sym(r1,c1) W sym(r2,c2) W) where sym(r,c) expands to
/// e_r e_c' + e_c e_r' off the diagonal and e_r e_r' on it. Each ordered
/// pair (a,b) from one side meets (c,d) from the other as W(b,c)*W(d,a).
inline double pair_trace(int r1, int c1, int r2, int c2,
                         const Eigen::MatrixXd& W) {
  const int a1[2] = {r1, c1}, b1[2] = {c1, r1};
  const int a2[2] = {r2, c2}, b2[2] = {c2, r2};
  const int k1 = (r1 == c1) ? 1 : 2;
  const int k2 = (r2 == c2) ? 1 : 2;
  double t = 0;
  for (int u = 0; u < k1; ++u)
    for (int v = 0; v < k2; ++v)
      t += W(b1[u], a2[v]) * W(b2[v], a1[u]);
  return t;
}

/// Largest step alpha with X + alpha*D staying positive semidefinite,
/// computed in the metric of X's Cholesky factor.
inline double step_to_boundary(const Eigen::LLT<Eigen::MatrixXd>& lltX,
                               const Eigen::MatrixXd& D) {
  const Eigen::MatrixXd Li = lltX.matrixL().solve(
      Eigen::MatrixXd::Identity(D.rows(), D.cols()));
  const Eigen::MatrixXd Y = Li * D * Li.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (Y + Y.transpose()), Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin >= 0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

}  // namespace detail

/// Primal-dual path-following interior-point solver with Nesterov-Todd
/// scaling, a Mehrotra-style adaptive centering parameter, and Cholesky on
/// the Schur complement. Dense linear algebra throughout: problems here stay
/// small (patch-sized), so robustness beats asymptotics.
inline SdpSolution solve_sdp(const SdpProblem& prob,
                             const SdpOptions& opts = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  const int n = prob.dim;
  const int p = prob.lp_dim;
  const int m = static_cast<int>(prob.constraints.size());
  if (n < 1) throw std::invalid_argument("sdp block must be nonempty");
  if (n > opts.dim_cap)
    throw std::invalid_argument("sdp dimension exceeds configured cap");

  // Internally minimize.
  const double sign = prob.sense == SdpSense::Minimize ? 1.0 : -1.0;
  const MatrixXd C = sign * 0.5 * (prob.C + prob.C.transpose());
  const VectorXd lp_c = sign * prob.lp_c;

  SdpSolution sol;
  sol.y = VectorXd::Zero(m);

  VectorXd b(m), normA(m);
  for (int i = 0; i < m; ++i) {
    b(i) = prob.constraints[i].b;
    normA(i) = detail::frob_norm(prob.constraints[i]);
  }
  const double bnorm = b.size() ? b.norm() : 0.0;
  const double cnorm = std::sqrt(C.squaredNorm() + lp_c.squaredNorm());

  double xi = 1.0;
  for (int i = 0; i < m; ++i)
    xi = std::max(xi, std::abs(b(i)) / (1.0 + normA(i)));
  xi *= std::sqrt(static_cast<double>(n + p));
  double eta = 1.0 + cnorm;
  for (int i = 0; i < m; ++i) eta = std::max(eta, normA(i));

  MatrixXd X = xi * MatrixXd::Identity(n, n);
  MatrixXd S = eta * MatrixXd::Identity(n, n);
  VectorXd w = VectorXd::Constant(p, xi);
  VectorXd s = VectorXd::Constant(p, eta);
  VectorXd y = VectorXd::Zero(m);

  auto finish = [&](SdpStatus status) {
    // Feasibility SDPs lack a primal interior, so the endgame can break down
    // a hair above the requested tolerance with the duality gap long closed.
    // Such iterates are optimal for every practical purpose here.
    if ((status == SdpStatus::NumericalFailure || status == SdpStatus::MaxIter) &&
        sol.primal_infeas <= 50 * opts.tol && sol.dual_infeas <= 50 * opts.tol &&
        sol.gap <= 50 * opts.tol)
      status = SdpStatus::Optimal;
    sol.status = status;
    sol.X = X;
    sol.lp_x = w;
    sol.y = y;
    const double pobj = (C.cwiseProduct(X)).sum() + lp_c.dot(w);
    sol.objective_value = sign * pobj;
    return sol;
  };

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    sol.iterations = iter;

    // Residuals.
    VectorXd rp(m);
    for (int i = 0; i < m; ++i)
      rp(i) = b(i) - detail::constraint_dot(prob.constraints[i], X, w);
    MatrixXd Rd = C - S;
    VectorXd rd_lp = lp_c - s;
    for (int i = 0; i < m; ++i)
      detail::add_scaled(prob.constraints[i], -y(i), Rd, rd_lp);

    const double gap = (X.cwiseProduct(S)).sum() + w.dot(s);
    const double mu = gap / static_cast<double>(n + p);
    const double pobj = (C.cwiseProduct(X)).sum() + lp_c.dot(w);
    const double dobj = b.dot(y);
    const double pinf = (m ? rp.norm() : 0.0) / (1.0 + bnorm);
    const double dinf =
        std::sqrt(Rd.squaredNorm() + rd_lp.squaredNorm()) / (1.0 + cnorm);
    const double rel_gap =
        std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double rel_mu = gap / (1.0 + std::abs(pobj) + std::abs(dobj));

    sol.primal_infeas = pinf;
    sol.dual_infeas = dinf;
    sol.gap = rel_gap;
    if (!std::isfinite(pinf) || !std::isfinite(dinf) || !std::isfinite(gap))
      return finish(SdpStatus::NumericalFailure);
    if (pinf <= opts.tol && dinf <= opts.tol &&
        (rel_gap <= opts.tol || rel_mu <= opts.tol))
      return finish(SdpStatus::Optimal);

    // Farkas certificate: y with b'y = 1 and sum y_i A_i <= 0 proves primal
    // infeasibility. A diverging dual objective signals such a ray; the
    // normalized test against the constraint norms rules out false alarms
    // (a feasible X would force lmax * tr(X) >= 1).
    if (dobj > 100.0 * (1.0 + std::abs(pobj))) {
      MatrixXd Zc = MatrixXd::Zero(n, n);
      VectorXd zc = VectorXd::Zero(p);
      double weight = 0;
      for (int i = 0; i < m; ++i) {
        detail::add_scaled(prob.constraints[i], y(i) / dobj, Zc, zc);
        weight += std::abs(y(i) / dobj) * normA(i);
      }
      Eigen::SelfAdjointEigenSolver<MatrixXd> ec(Zc, Eigen::EigenvaluesOnly);
      const double lmax =
          std::max(ec.eigenvalues().maxCoeff(), p ? zc.maxCoeff() : -1.0);
      if (lmax <= 1e-9 * (1.0 + weight))
        return finish(SdpStatus::Infeasible);
    }

    // Nesterov-Todd scaling point: W S W = X.
    Eigen::SelfAdjointEigenSolver<MatrixXd> ex(X);
    if (ex.info() != Eigen::Success || ex.eigenvalues().minCoeff() <= 0)
      return finish(SdpStatus::NumericalFailure);
    const MatrixXd Xh = ex.operatorSqrt();
    Eigen::SelfAdjointEigenSolver<MatrixXd> et(Xh * S * Xh);
    if (et.info() != Eigen::Success || et.eigenvalues().minCoeff() <= 0)
      return finish(SdpStatus::NumericalFailure);
    const MatrixXd Tmh = et.operatorInverseSqrt();
    MatrixXd W = Xh * Tmh * Xh;
    W = 0.5 * (W + W.transpose());
    const VectorXd d_lp = w.cwiseQuotient(s);

    // Schur complement M_ij = A_i.(W A_j W) + sum_k a_ik d_k a_jk.
    MatrixXd M = MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = i; j < m; ++j) {
        double acc = 0;
        for (const auto& ei : prob.constraints[i].entries)
          for (const auto& ej : prob.constraints[j].entries)
            acc += ei.v * ej.v * detail::pair_trace(ei.r, ei.c, ej.r, ej.c, W);
        for (const auto& [ki, vi] : prob.constraints[i].lp)
          for (const auto& [kj, vj] : prob.constraints[j].lp)
            if (ki == kj) acc += vi * vj * d_lp(ki);
        M(i, j) = acc;
        M(j, i) = acc;
      }
    }

    Eigen::LLT<MatrixXd> lltM;
    double ridge = 1e-13 * (m ? M.trace() / m : 1.0);
    for (int attempt = 0;; ++attempt) {
      lltM.compute(M + ridge * MatrixXd::Identity(m, m));
      if (lltM.info() == Eigen::Success) break;
      ridge = std::max(ridge * 100.0, 1e-12);
      if (attempt >= 6) return finish(SdpStatus::NumericalFailure);
    }

    const MatrixXd WRdW = W * Rd * W;
    Eigen::LLT<MatrixXd> lltS(S);
    Eigen::LLT<MatrixXd> lltX(X);
    if (lltS.info() != Eigen::Success || lltX.info() != Eigen::Success)
      return finish(SdpStatus::NumericalFailure);
    const MatrixXd Sinv = lltS.solve(MatrixXd::Identity(n, n));

    // Direction for a given centering target sigma*mu.
    auto compute_direction = [&](double sigma_mu, MatrixXd& dX, MatrixXd& dS,
                                 VectorXd& dw, VectorXd& ds, VectorXd& dy) {
      const MatrixXd Rc = sigma_mu * Sinv - X;
      const VectorXd rc_lp =
          p ? VectorXd(sigma_mu * s.cwiseInverse() - w) : VectorXd();
      const MatrixXd K = Rc - WRdW;
      const VectorXd k_lp =
          p ? VectorXd(rc_lp - d_lp.cwiseProduct(rd_lp)) : VectorXd();
      VectorXd rhs(m);
      for (int i = 0; i < m; ++i)
        rhs(i) = rp(i) - detail::constraint_dot(prob.constraints[i], K, k_lp);
      dy = lltM.solve(rhs);
      dS = Rd;
      ds = rd_lp;
      for (int i = 0; i < m; ++i) detail::add_scaled(prob.constraints[i], -dy(i), dS, ds);
      MatrixXd Ady = MatrixXd::Zero(n, n);
      VectorXd ady = VectorXd::Zero(p);
      for (int i = 0; i < m; ++i) detail::add_scaled(prob.constraints[i], dy(i), Ady, ady);
      dX = Rc - WRdW + W * Ady * W;
      dX = 0.5 * (dX + dX.transpose());
      if (p)
        dw = rc_lp - d_lp.cwiseProduct(rd_lp) + d_lp.cwiseProduct(ady);
      else
        dw = VectorXd();
    };

    auto lp_step = [&](const VectorXd& v, const VectorXd& dv) {
      double a = std::numeric_limits<double>::infinity();
      for (int k = 0; k < v.size(); ++k)
        if (dv(k) < 0) a = std::min(a, -v(k) / dv(k));
      return a;
    };

    // Predictor (affine direction) fixes the centering parameter.
    MatrixXd dXa, dSa;
    VectorXd dwa, dsa, dya;
    compute_direction(0.0, dXa, dSa, dwa, dsa, dya);
    double apa = std::min({1.0, 0.99 * detail::step_to_boundary(lltX, dXa),
                           p ? 0.99 * lp_step(w, dwa) : 1.0});
    double ada = std::min({1.0, 0.99 * detail::step_to_boundary(lltS, dSa),
                           p ? 0.99 * lp_step(s, dsa) : 1.0});
    const double gap_aff =
        ((X + apa * dXa).cwiseProduct(S + ada * dSa)).sum() +
        (p ? (w + apa * dwa).dot(s + ada * dsa) : 0.0);
    double sigma = std::pow(std::max(0.0, gap_aff) / gap, 3.0);
    sigma = std::clamp(sigma, 1e-5, 0.9);

    MatrixXd dX, dS;
    VectorXd dw, ds, dy;
    compute_direction(sigma * mu, dX, dS, dw, ds, dy);

    const double tau = 0.98;
    double ap = std::min({1.0, tau * detail::step_to_boundary(lltX, dX),
                          p ? tau * lp_step(w, dw) : 1.0});
    double ad = std::min({1.0, tau * detail::step_to_boundary(lltS, dS),
                          p ? tau * lp_step(s, ds) : 1.0});
    if (!std::isfinite(ap) || !std::isfinite(ad) || ap <= 1e-14 || ad <= 1e-14)
      return finish(SdpStatus::NumericalFailure);

    X += ap * dX;
    w += ap * dw;
    y += ad * dy;
    S += ad * dS;
    s += ad * ds;
    X = 0.5 * (X + X.transpose());
    S = 0.5 * (S + S.transpose());
  }
  sol.iterations = opts.max_iter;
  return finish(SdpStatus::MaxIter);
}

}  // namespace stitch3d
