#include <doctest.h>

#include "ttsa/errors.hpp"
#include "ttsa/problem.hpp"
#include "ttsa/problems.hpp"

using namespace ttsa;

namespace {

// fixture with prescribed inner-Hessian spectrum diag(0.1, 1)
BilevelProblem weak_convexity_fixture() {
  QuadraticParams q;
  q.P_f = Mat::Identity(2, 2);
  q.R_f = Mat::Identity(2, 2);
  q.P_g = Mat::Zero(2, 2);
  q.P_g(0, 0) = 0.1;
  q.P_g(1, 1) = 1.0;
  q.C = Mat::Zero(2, 2);
  q.c0 = Vec::Zero(2);
  BilevelProblem p = make_quadratic(q);
  p.mu_g = 0.5;  // deliberately over-claimed
  return p;
}

}  // namespace

TEST_CASE("check_assumptions confirms the identity-Hessian quadratic") {
  BilevelProblem p = make_quadratic_1d();
  std::vector<std::pair<Vec, Vec>> pts = {{Vec::Zero(1), Vec::Zero(1)},
                                          {Vec::Ones(1), Vec::Ones(1)}};
  auto rep = check_assumptions(p, pts, 42);
  CHECK(rep.min_eig_hess_yy == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.strong_convexity_ok);
  CHECK(rep.symmetry_ok);
  CHECK(rep.samples == 2);
}

TEST_CASE("check_assumptions flags an over-claimed strong-convexity constant") {
  BilevelProblem p = weak_convexity_fixture();
  std::vector<std::pair<Vec, Vec>> pts = {{Vec::Zero(2), Vec::Zero(2)}};
  auto rep = check_assumptions(p, pts, 1);
  CHECK(rep.min_eig_hess_yy == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_FALSE(rep.strong_convexity_ok);
}

TEST_CASE("check_assumptions requires at least one sample point") {
  BilevelProblem p = make_quadratic_1d();
  CHECK_THROWS_AS(check_assumptions(p, {}, 0), ArgumentError);
}

TEST_CASE("lipschitz evidence is finite and positive for smooth problems") {
  BilevelProblem p = make_quadratic_1d();
  std::vector<std::pair<Vec, Vec>> pts = {{Vec::Ones(1), Vec::Ones(1)}};
  auto rep = check_assumptions(p, pts, 3);
  // grad_y_g = y - x has Lipschitz constant sqrt(2) over joint perturbations
  CHECK(rep.lip_grad_y_g > 0.5);
  CHECK(rep.lip_grad_y_g < 2.0);
}
