#pragma once

#include <cstdint>

#include "ttsa/problem.hpp"

namespace ttsa {

// Canonical scalar instance: f = (x^2 + y^2)/2, g = (y - x)^2 / 2.
// Optimum (0, 0), inner solution y*(x) = x, Phi(x) = x^2.
BilevelProblem make_quadratic_1d();

// General coupled quadratic:
//   f = x'P_f x / 2 + y'R_f y / 2
//   g = (y - C'x - c0)' P_g (y - C'x - c0) / 2
// P_f, R_f, P_g symmetric positive definite; C is d1 x d2.
// Inner solution y*(x) = C'x + c0 is exact.
struct QuadraticParams {
  Mat P_f;
  Mat R_f;
  Mat P_g;
  Mat C;
  Vec c0;
};
BilevelProblem make_quadratic(const QuadraticParams& params);

// Meta-learning surrogate with `tasks` quadratic task losses in dimension
// `dim`: outer variable is the shared parameter, inner variable the stack of
// per-task adaptations, coupled by the proximity weight lambda:
//   L_i(v)    = (v - mu_i)' C_i (v - mu_i) / 2
//   J_i(t, v) = L_i(v) + lambda ||v - t||^2 / 2.
// Task matrices C_i are seeded SPD draws with eigenvalues in [0.5, 2], task
// optima mu_i have entries in [-1, 1]. Per-task inner solution
//   v_i*(t) = (C_i + lambda I)^{-1} (C_i mu_i + lambda t)
// is closed form, as is the outer minimizer.
BilevelProblem make_maml(int tasks, int dim, std::uint64_t seed, double lambda);

// Same surrogate with explicit task data (C_i SPD, mu_i) instead of seeded
// draws.
BilevelProblem make_maml_from_tasks(const std::vector<Mat>& C, const std::vector<Vec>& mu,
                                    double lambda);

// Decoupled toy: inner objective V(z) = z'Pz / 2 does not depend on the
// outer variable, outer objective U(t, z) = ||t - (Mz + m)||^2 / 2.
// The corrected gradient reduces to grad_t U and the coupling block of the
// linearization is exactly zero. Optimum (m, 0).
struct LangevinToyParams {
  Mat P;  // inner curvature, SPD
  Mat M;  // d1 x d2 affine map
  Vec m;  // d1 offset
};
BilevelProblem make_langevin_toy(const LangevinToyParams& params);

// Test fixture: returns a copy of `prob` whose grad_x_f is perturbed by
// `amount` in coordinate `coord`. Used as the negative control for the
// gradient audit; every audit must flag the offending coordinate.
BilevelProblem with_broken_gradient(const BilevelProblem& prob, int coord, double amount = 1e-3);

}  // namespace ttsa
