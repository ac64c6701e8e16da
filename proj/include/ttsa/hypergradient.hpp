#pragma once

#include "ttsa/problem.hpp"

namespace ttsa {

struct HypergradResult {
  Vec value;                         // d1
  double linear_solve_residual = 0;  // ||hess_yy_g * v - grad_y_f||
};

// Corrected outer gradient
//   grad_x_f - hess_xy_g * hess_yy_g^{-1} * grad_y_f,
// with the inner system solved by Cholesky factorization (never an explicit
// inverse). Throws SingularityError, carrying the smallest eigenvalue, when
// the inner Hessian is not positive definite.
HypergradResult hypergrad(const BilevelProblem& prob, const Vec& x, const Vec& y);

// Minimizes y -> g(x, y). Returns the closed form when the problem carries
// one; otherwise gradient descent with step 1/L where L is a power-iteration
// estimate of the largest inner-Hessian eigenvalue at the current iterate.
// Throws NonConvergenceError (with the final residual) past max_iters.
Vec solve_inner(const BilevelProblem& prob, const Vec& x, double tol, int max_iters = 100000);

// Central-difference oracle for the gradient of Phi(x) = f(x, y*(x)).
// Each objective evaluation resolves the inner problem to tolerance
// min(tol, h_eff^2) where h_eff = h * (1 + ||x||).
Vec phi_grad_fd(const BilevelProblem& prob, const Vec& x, double h, double tol);

struct HyperHessianResult {
  Mat value;                 // d1 x d1
  double min_sym_eig = 0.0;  // smallest eigenvalue of the symmetric part
};

// Outer curvature
//   jac_x(cg) - hess_xy_g * hess_yy_g^{-1} * jac_y(cg)^T
// where cg is the corrected outer gradient; Jacobians come from the
// problem's analytic oracles or the finite-difference fallback.
HyperHessianResult hyper_hessian(const BilevelProblem& prob, const Vec& x, const Vec& y);

// Jacobians of the corrected gradient, using analytic oracles when present
// and central differences on hypergrad otherwise.
Mat corrected_grad_jac_x(const BilevelProblem& prob, const Vec& x, const Vec& y);
Mat corrected_grad_jac_y(const BilevelProblem& prob, const Vec& x, const Vec& y);

// Newton iteration on x -> hypergrad(x, y*(x)); used when a problem carries
// no known optimum. Returns (x*, y*) with ||hypergrad|| <= tol.
std::pair<Vec, Vec> solve_stationary(const BilevelProblem& prob, const Vec& x0, double tol = 1e-10,
                                     int max_iters = 200);

}  // namespace ttsa
