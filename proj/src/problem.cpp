#include "ttsa/problem.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "ttsa/errors.hpp"
#include "ttsa/rng.hpp"

namespace ttsa {

Vec BilevelProblem::eval_grad_x_f(const Vec& x, const Vec& y) const {
  Vec out(d1);
  grad_x_f(x, y, out);
  return out;
}
Vec BilevelProblem::eval_grad_y_f(const Vec& x, const Vec& y) const {
  Vec out(d2);
  grad_y_f(x, y, out);
  return out;
}
Vec BilevelProblem::eval_grad_y_g(const Vec& x, const Vec& y) const {
  Vec out(d2);
  grad_y_g(x, y, out);
  return out;
}
Mat BilevelProblem::eval_hess_yy_g(const Vec& x, const Vec& y) const {
  Mat out(d2, d2);
  hess_yy_g(x, y, out);
  return out;
}
Mat BilevelProblem::eval_hess_xy_g(const Vec& x, const Vec& y) const {
  Mat out(d1, d2);
  hess_xy_g(x, y, out);
  return out;
}

namespace {

// Max sampled quotient ||grad(p + dp) - grad(p)|| / ||dp|| over random
// directions in both arguments.
double lipschitz_estimate(const BilevelProblem& prob, const VecFn& grad, int dim,
                          const std::vector<std::pair<Vec, Vec>>& pts, GaussianStream& rng) {
  constexpr int kDirections = 4;
  constexpr double kStep = 1e-3;
  double worst = 0.0;
  Vec g0(dim), g1(dim);
  for (const auto& [x, y] : pts) {
    grad(x, y, g0);
    for (int k = 0; k < kDirections; ++k) {
      Vec dx(x.size()), dy(y.size());
      rng.fill_standard_normal(dx);
      rng.fill_standard_normal(dy);
      const double norm = std::sqrt(dx.squaredNorm() + dy.squaredNorm());
      if (norm == 0.0) continue;
      dx *= kStep / norm;
      dy *= kStep / norm;
      grad(x + dx, y + dy, g1);
      worst = std::max(worst, (g1 - g0).norm() / kStep);
    }
  }
  return worst;
}

}  // namespace

AssumptionReport check_assumptions(const BilevelProblem& prob,
                                   const std::vector<std::pair<Vec, Vec>>& sample_points,
                                   std::uint64_t seed) {
  if (sample_points.empty())
    throw ArgumentError("check_assumptions: sample_points must be non-empty");

  AssumptionReport rep;
  rep.mu_g_claimed = prob.mu_g;
  rep.samples = static_cast<int>(sample_points.size());
  rep.min_eig_hess_yy = std::numeric_limits<double>::infinity();

  Mat H(prob.d2, prob.d2);
  for (const auto& [x, y] : sample_points) {
    prob.hess_yy_g(x, y, H);
    const double hn = H.norm();
    const double sym = hn > 0.0 ? (H - H.transpose()).norm() / hn : 0.0;
    rep.max_symmetry_residual = std::max(rep.max_symmetry_residual, sym);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.transpose()));
    rep.min_eig_hess_yy = std::min(rep.min_eig_hess_yy, es.eigenvalues().minCoeff());
  }
  rep.symmetry_ok = rep.max_symmetry_residual <= 1e-10;
  rep.strong_convexity_ok = rep.min_eig_hess_yy >= prob.mu_g && prob.mu_g > 0.0;

  GaussianStream rng(seed);
  rep.lip_grad_y_g = lipschitz_estimate(prob, prob.grad_y_g, prob.d2, sample_points, rng);
  rep.lip_grad_x_f = lipschitz_estimate(prob, prob.grad_x_f, prob.d1, sample_points, rng);
  rep.lip_grad_y_f = lipschitz_estimate(prob, prob.grad_y_f, prob.d2, sample_points, rng);
  return rep;
}

}  // namespace ttsa
