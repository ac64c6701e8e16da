#include "ttsa/hypergradient.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "ttsa/errors.hpp"

namespace ttsa {

namespace {

Eigen::LLT<Mat> factor_inner_hessian(const Mat& hyy) {
  Eigen::LLT<Mat> llt(hyy);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (hyy + hyy.transpose()));
    const double lmin = es.eigenvalues().minCoeff();
    std::ostringstream os;
    os << "inner Hessian is not positive definite (smallest eigenvalue " << lmin << ")";
    throw SingularityError(os.str(), lmin);
  }
  return llt;
}

// Power iteration for the largest eigenvalue of an SPD matrix.
double largest_eigenvalue_estimate(const Mat& A) {
  const int n = static_cast<int>(A.rows());
  Vec v = Vec::Ones(n);
  v(0) += 0.5;  // break symmetry for alternating-sign eigenvectors
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vec w = A * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    w /= nw;
    const double next = w.dot(A * w);
    if (std::abs(next - lambda) <= 1e-6 * std::abs(next)) return next;
    lambda = next;
    v = w;
  }
  return lambda;
}

}  // namespace

HypergradResult hypergrad(const BilevelProblem& prob, const Vec& x, const Vec& y) {
  Mat hyy = prob.eval_hess_yy_g(x, y);
  auto llt = factor_inner_hessian(hyy);
  Vec gyf = prob.eval_grad_y_f(x, y);
  Vec v = llt.solve(gyf);

  HypergradResult res;
  res.linear_solve_residual = (hyy * v - gyf).norm();
  res.value = prob.eval_grad_x_f(x, y);
  res.value.noalias() -= prob.eval_hess_xy_g(x, y) * v;
  return res;
}

Vec solve_inner(const BilevelProblem& prob, const Vec& x, double tol, int max_iters) {
  if (!(tol > 0.0)) throw ArgumentError("solve_inner: tol must be positive");
  if (prob.inner_solution) return prob.inner_solution(x);

  Vec y = Vec::Zero(prob.d2);
  Vec grad(prob.d2);
  Mat hyy(prob.d2, prob.d2);
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    prob.grad_y_g(x, y, grad);
    residual = grad.norm();
    if (residual <= tol) return y;
    prob.hess_yy_g(x, y, hyy);
    const double L = largest_eigenvalue_estimate(hyy);
    if (!(L > 0.0)) throw SingularityError("solve_inner: inner Hessian has no positive curvature", L);
    y.noalias() -= grad / L;
  }
  std::ostringstream os;
  os << "solve_inner: no convergence after " << max_iters << " iterations (residual " << residual
     << ", tol " << tol << ")";
  throw NonConvergenceError(os.str(), residual);
}

Vec phi_grad_fd(const BilevelProblem& prob, const Vec& x, double h, double tol) {
  if (!(h > 0.0)) throw ArgumentError("phi_grad_fd: h must be positive");
  if (!(tol > 0.0)) throw ArgumentError("phi_grad_fd: tol must be positive");
  const double h_eff = h * (1.0 + x.norm());
  const double inner_tol = std::min(tol, h_eff * h_eff);

  auto phi = [&](const Vec& xq) {
    Vec yq = solve_inner(prob, xq, inner_tol);
    return prob.f(xq, yq);
  };

  Vec g(prob.d1);
  Vec xp = x;
  for (int i = 0; i < prob.d1; ++i) {
    xp(i) = x(i) + h_eff;
    const double fp = phi(xp);
    xp(i) = x(i) - h_eff;
    const double fm = phi(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h_eff);
  }
  return g;
}

namespace {

constexpr double kJacFallbackStep = 1e-5;

Mat fd_jac_x_of_hypergrad(const BilevelProblem& prob, const Vec& x, const Vec& y) {
  const double h = kJacFallbackStep * (1.0 + std::sqrt(x.squaredNorm() + y.squaredNorm()));
  Mat J(prob.d1, prob.d1);
  Vec xp = x;
  for (int i = 0; i < prob.d1; ++i) {
    xp(i) = x(i) + h;
    Vec gp = hypergrad(prob, xp, y).value;
    xp(i) = x(i) - h;
    Vec gm = hypergrad(prob, xp, y).value;
    xp(i) = x(i);
    J.col(i) = (gp - gm) / (2.0 * h);
  }
  return J;
}

Mat fd_jac_y_of_hypergrad(const BilevelProblem& prob, const Vec& x, const Vec& y) {
  const double h = kJacFallbackStep * (1.0 + std::sqrt(x.squaredNorm() + y.squaredNorm()));
  Mat J(prob.d1, prob.d2);
  Vec yp = y;
  for (int j = 0; j < prob.d2; ++j) {
    yp(j) = y(j) + h;
    Vec gp = hypergrad(prob, x, yp).value;
    yp(j) = y(j) - h;
    Vec gm = hypergrad(prob, x, yp).value;
    yp(j) = y(j);
    J.col(j) = (gp - gm) / (2.0 * h);
  }
  return J;
}

}  // namespace

Mat corrected_grad_jac_x(const BilevelProblem& prob, const Vec& x, const Vec& y) {
  if (prob.jac_x_corrected_grad) {
    Mat J(prob.d1, prob.d1);
    prob.jac_x_corrected_grad(x, y, J);
    return J;
  }
  return fd_jac_x_of_hypergrad(prob, x, y);
}

Mat corrected_grad_jac_y(const BilevelProblem& prob, const Vec& x, const Vec& y) {
  if (prob.jac_y_corrected_grad) {
    Mat J(prob.d1, prob.d2);
    prob.jac_y_corrected_grad(x, y, J);
    return J;
  }
  return fd_jac_y_of_hypergrad(prob, x, y);
}

HyperHessianResult hyper_hessian(const BilevelProblem& prob, const Vec& x, const Vec& y) {
  Mat hyy = prob.eval_hess_yy_g(x, y);
  auto llt = factor_inner_hessian(hyy);
  Mat jx = corrected_grad_jac_x(prob, x, y);
  Mat jy = corrected_grad_jac_y(prob, x, y);  // d1 x d2

  HyperHessianResult res;
  res.value = jx;
  res.value.noalias() -= prob.eval_hess_xy_g(x, y) * llt.solve(jy.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (res.value + res.value.transpose()));
  res.min_sym_eig = es.eigenvalues().minCoeff();
  return res;
}

std::pair<Vec, Vec> solve_stationary(const BilevelProblem& prob, const Vec& x0, double tol,
                                     int max_iters) {
  Vec x = x0;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    Vec y = solve_inner(prob, x, std::max(tol * 1e-2, 1e-14));
    Vec g = hypergrad(prob, x, y).value;
    residual = g.norm();
    if (residual <= tol) return {x, y};
    Mat Hh = hyper_hessian(prob, x, y).value;
    x -= Hh.partialPivLu().solve(g);
  }
  throw NonConvergenceError("solve_stationary: Newton iteration did not reach tolerance",
                            residual);
}

}  // namespace ttsa
