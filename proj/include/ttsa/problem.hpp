#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ttsa {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using ScalarFn = std::function<double(const Vec&, const Vec&)>;
// Derivative callbacks write into a caller-owned buffer so the integrator's
// hot loop allocates nothing.
using VecFn = std::function<void(const Vec& x, const Vec& y, Vec& out)>;
using MatFn = std::function<void(const Vec& x, const Vec& y, Mat& out)>;

// A bilevel problem
//
//   min_x f(x, y*(x))   subject to   y*(x) in argmin_y g(x, y)
//
// described through analytic derivative oracles. The inner Hessian
// hess_yy_g must be symmetric positive definite wherever it is evaluated,
// with eigenvalues bounded below by mu_g.
struct BilevelProblem {
  std::string name;
  int d1 = 0;  // outer dimension
  int d2 = 0;  // inner dimension

  ScalarFn f;
  ScalarFn g;
  VecFn grad_x_f;   // d1
  VecFn grad_y_f;   // d2
  VecFn grad_y_g;   // d2
  MatFn hess_yy_g;  // d2 x d2
  MatFn hess_xy_g;  // d1 x d2, entries d^2 g / dx_i dy_j

  // Optional analytic Jacobians of the corrected outer gradient
  //   cg(x,y) = grad_x_f - hess_xy_g * hess_yy_g^{-1} * grad_y_f.
  // When absent, a central-difference fallback on cg is used
  // (step 1e-5 * (1 + ||point||)).
  MatFn jac_x_corrected_grad;  // d1 x d1
  MatFn jac_y_corrected_grad;  // d1 x d2

  std::optional<std::pair<Vec, Vec>> known_optimum;
  std::function<Vec(const Vec&)> inner_solution;  // closed-form y*(x), may be empty

  double mu_g = 0.0;  // claimed strong-convexity constant of g in y

  // True when hess_yy_g and hess_xy_g do not depend on (x, y); lets the
  // integrator factor the inner Hessian once per trajectory.
  bool constant_inner_hessians = false;

  // Allocating convenience wrappers (tests, bindings, cold paths).
  Vec eval_grad_x_f(const Vec& x, const Vec& y) const;
  Vec eval_grad_y_f(const Vec& x, const Vec& y) const;
  Vec eval_grad_y_g(const Vec& x, const Vec& y) const;
  Mat eval_hess_yy_g(const Vec& x, const Vec& y) const;
  Mat eval_hess_xy_g(const Vec& x, const Vec& y) const;
};

// Evidence gathered by check_assumptions. Lipschitz numbers are sampled
// difference quotients: evidence, not proof.
struct AssumptionReport {
  double min_eig_hess_yy = 0.0;     // min over samples of lambda_min(hess_yy_g)
  bool strong_convexity_ok = true;  // min_eig_hess_yy >= mu_g
  double mu_g_claimed = 0.0;
  double max_symmetry_residual = 0.0;  // ||A - A^T||_F / ||A||_F, worst sample
  bool symmetry_ok = true;
  double lip_grad_y_g = 0.0;
  double lip_grad_x_f = 0.0;
  double lip_grad_y_f = 0.0;
  int samples = 0;
};

// Spot-checks the smoothness/convexity assumptions at the given points plus
// seeded random perturbations around them. Throws ArgumentError on an empty
// sample list.
AssumptionReport check_assumptions(const BilevelProblem& prob,
                                   const std::vector<std::pair<Vec, Vec>>& sample_points,
                                   std::uint64_t seed);

}  // namespace ttsa
