#include "ttsa/problems.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <memory>

#include "ttsa/errors.hpp"
#include "ttsa/rng.hpp"

namespace ttsa {

namespace {

void require_spd(const Mat& A, const char* what) {
  if (A.rows() != A.cols()) throw ArgumentError(std::string(what) + " must be square");
  if ((A - A.transpose()).norm() > 1e-12 * (1.0 + A.norm()))
    throw ArgumentError(std::string(what) + " must be symmetric");
  Eigen::LLT<Mat> llt(A);
  if (llt.info() != Eigen::Success)
    throw ArgumentError(std::string(what) + " must be positive definite");
}

double min_eigenvalue(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  return es.eigenvalues().minCoeff();
}

}  // namespace

BilevelProblem make_quadratic(const QuadraticParams& params) {
  require_spd(params.P_f, "P_f");
  require_spd(params.R_f, "R_f");
  require_spd(params.P_g, "P_g");
  const int d1 = static_cast<int>(params.P_f.rows());
  const int d2 = static_cast<int>(params.P_g.rows());
  if (params.R_f.rows() != d2 || params.C.rows() != d1 || params.C.cols() != d2 ||
      params.c0.size() != d2)
    throw ArgumentError("make_quadratic: inconsistent dimensions");

  struct Data {
    Mat P_f, R_f, P_g, C, hess_xy, CRf;
    Vec c0;
  };
  auto d = std::make_shared<Data>();
  d->P_f = params.P_f;
  d->R_f = params.R_f;
  d->P_g = params.P_g;
  d->C = params.C;
  d->c0 = params.c0;
  d->hess_xy = -params.C * params.P_g;  // d^2 g / dx dy
  d->CRf = params.C * params.R_f;

  BilevelProblem p;
  p.name = "quadratic";
  p.d1 = d1;
  p.d2 = d2;
  p.mu_g = min_eigenvalue(params.P_g);
  p.constant_inner_hessians = true;

  p.f = [d](const Vec& x, const Vec& y) {
    return 0.5 * x.dot(d->P_f * x) + 0.5 * y.dot(d->R_f * y);
  };
  p.g = [d](const Vec& x, const Vec& y) {
    Vec r = y - d->C.transpose() * x - d->c0;
    return 0.5 * r.dot(d->P_g * r);
  };
  p.grad_x_f = [d](const Vec& x, const Vec&, Vec& out) { out.noalias() = d->P_f * x; };
  p.grad_y_f = [d](const Vec&, const Vec& y, Vec& out) { out.noalias() = d->R_f * y; };
  p.grad_y_g = [d](const Vec& x, const Vec& y, Vec& out) {
    out.noalias() = d->P_g * y;
    out.noalias() -= d->P_g * (d->C.transpose() * x + d->c0);
  };
  p.hess_yy_g = [d](const Vec&, const Vec&, Mat& out) { out = d->P_g; };
  p.hess_xy_g = [d](const Vec&, const Vec&, Mat& out) { out = d->hess_xy; };
  // corrected gradient is P_f x + C R_f y
  p.jac_x_corrected_grad = [d](const Vec&, const Vec&, Mat& out) { out = d->P_f; };
  p.jac_y_corrected_grad = [d](const Vec&, const Vec&, Mat& out) { out = d->CRf; };
  p.inner_solution = [d](const Vec& x) -> Vec { return d->C.transpose() * x + d->c0; };

  // Phi(x) = x'P_f x/2 + (C'x + c0)' R_f (C'x + c0)/2, minimized where
  // (P_f + C R_f C') x = -C R_f c0.
  Mat A = params.P_f + d->CRf * params.C.transpose();
  Vec xstar = Eigen::LLT<Mat>(A).solve(-(d->CRf * params.c0));
  Vec ystar = params.C.transpose() * xstar + params.c0;
  p.known_optimum = std::make_pair(xstar, ystar);
  return p;
}

BilevelProblem make_quadratic_1d() {
  QuadraticParams q;
  q.P_f = Mat::Identity(1, 1);
  q.R_f = Mat::Identity(1, 1);
  q.P_g = Mat::Identity(1, 1);
  q.C = Mat::Identity(1, 1);
  q.c0 = Vec::Zero(1);
  BilevelProblem p = make_quadratic(q);
  p.name = "quadratic1d";
  p.known_optimum = std::make_pair(Vec::Zero(1), Vec::Zero(1));
  return p;
}

BilevelProblem make_maml(int tasks, int dim, std::uint64_t seed, double lambda) {
  if (tasks < 1) throw ArgumentError("make_maml: tasks must be >= 1");
  if (dim < 1) throw ArgumentError("make_maml: dim must be >= 1");
  if (!(lambda > 0.0)) throw ArgumentError("make_maml: lambda must be positive");

  GaussianStream rng(seed);
  auto uniform = [&rng]() { return static_cast<double>(rng.raw() >> 11) * 0x1.0p-53; };

  std::vector<Mat> C(tasks);
  std::vector<Vec> mu(tasks);
  for (int i = 0; i < tasks; ++i) {
    Mat G(dim, dim);
    for (int c = 0; c < dim; ++c)
      for (int r = 0; r < dim; ++r) G(r, c) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(G);
    Mat Q = qr.householderQ();
    Vec evals(dim);
    for (int k = 0; k < dim; ++k) evals(k) = 0.5 + 1.5 * uniform();
    C[i] = Q * evals.asDiagonal() * Q.transpose();
    C[i] = 0.5 * (C[i] + C[i].transpose());
    mu[i] = Vec(dim);
    for (int k = 0; k < dim; ++k) mu[i](k) = -1.0 + 2.0 * uniform();
  }
  return make_maml_from_tasks(C, mu, lambda);
}

BilevelProblem make_maml_from_tasks(const std::vector<Mat>& C_in, const std::vector<Vec>& mu_in,
                                    double lambda) {
  if (C_in.empty() || C_in.size() != mu_in.size())
    throw ArgumentError("make_maml_from_tasks: need matching non-empty task lists");
  if (!(lambda > 0.0)) throw ArgumentError("make_maml_from_tasks: lambda must be positive");
  const int tasks = static_cast<int>(C_in.size());
  const int dim = static_cast<int>(C_in[0].rows());
  for (int i = 0; i < tasks; ++i) {
    require_spd(C_in[i], "task curvature");
    if (C_in[i].rows() != dim || mu_in[i].size() != dim)
      throw ArgumentError("make_maml_from_tasks: inconsistent task dimensions");
  }

  struct Data {
    int N, p;
    double lambda;
    std::vector<Mat> C;       // task curvatures
    std::vector<Vec> mu;      // task optima
    std::vector<Mat> S;       // lambda (C_i + lambda I)^{-1}
    std::vector<Mat> SC;      // S_i C_i
    std::vector<Vec> q;       // (C_i + lambda I)^{-1} C_i mu_i
    Mat hess_yy;              // blockdiag(C_i + lambda I)
    Mat hess_xy;              // [-lambda I, ..., -lambda I]
    Mat jac_y_cg;             // [S_1 C_1, ..., S_N C_N]
  };
  auto d = std::make_shared<Data>();
  d->N = tasks;
  d->p = dim;
  d->lambda = lambda;

  double mu_g = std::numeric_limits<double>::infinity();
  const int D2 = tasks * dim;
  d->hess_yy = Mat::Zero(D2, D2);
  d->hess_xy = Mat::Zero(dim, D2);
  d->jac_y_cg = Mat::Zero(dim, D2);
  const Mat I = Mat::Identity(dim, dim);

  for (int i = 0; i < tasks; ++i) {
    const Mat& C = C_in[i];
    const Vec& mu = mu_in[i];
    Mat reg = C + lambda * I;
    Eigen::LLT<Mat> llt(reg);
    d->C.push_back(C);
    d->mu.push_back(mu);
    d->S.push_back(lambda * llt.solve(I));
    d->SC.push_back(d->S.back() * C);
    d->q.push_back(llt.solve(C * mu));
    d->hess_yy.block(i * dim, i * dim, dim, dim) = reg;
    d->hess_xy.block(0, i * dim, dim, dim) = -lambda * I;
    d->jac_y_cg.block(0, i * dim, dim, dim) = d->SC.back();
    mu_g = std::min(mu_g, min_eigenvalue(C) + lambda);
  }

  BilevelProblem p;
  p.name = "maml";
  p.d1 = dim;
  p.d2 = D2;
  p.mu_g = mu_g;
  p.constant_inner_hessians = true;

  p.f = [d](const Vec&, const Vec& y) {
    double s = 0.0;
    for (int i = 0; i < d->N; ++i) {
      Vec r = y.segment(i * d->p, d->p) - d->mu[i];
      s += 0.5 * r.dot(d->C[i] * r);
    }
    return s;
  };
  p.g = [d, f = p.f](const Vec& x, const Vec& y) {
    double s = f(x, y);
    for (int i = 0; i < d->N; ++i)
      s += 0.5 * d->lambda * (y.segment(i * d->p, d->p) - x).squaredNorm();
    return s;
  };
  p.grad_x_f = [d](const Vec&, const Vec&, Vec& out) { out.setZero(); };
  p.grad_y_f = [d](const Vec&, const Vec& y, Vec& out) {
    for (int i = 0; i < d->N; ++i)
      out.segment(i * d->p, d->p).noalias() =
          d->C[i] * (y.segment(i * d->p, d->p) - d->mu[i]);
  };
  p.grad_y_g = [d](const Vec& x, const Vec& y, Vec& out) {
    for (int i = 0; i < d->N; ++i) {
      auto yi = y.segment(i * d->p, d->p);
      out.segment(i * d->p, d->p).noalias() = d->C[i] * (yi - d->mu[i]);
      out.segment(i * d->p, d->p).noalias() += d->lambda * (yi - x);
    }
  };
  p.hess_yy_g = [d](const Vec&, const Vec&, Mat& out) { out = d->hess_yy; };
  p.hess_xy_g = [d](const Vec&, const Vec&, Mat& out) { out = d->hess_xy; };
  p.jac_x_corrected_grad = [d](const Vec&, const Vec&, Mat& out) { out.setZero(); };
  p.jac_y_corrected_grad = [d](const Vec&, const Vec&, Mat& out) { out = d->jac_y_cg; };
  p.inner_solution = [d](const Vec& x) -> Vec {
    Vec y(d->N * d->p);
    for (int i = 0; i < d->N; ++i)
      y.segment(i * d->p, d->p) = d->q[i] + d->S[i] * x;
    return y;
  };

  // Outer objective along the inner solution is quadratic with curvature
  // sum_i M_i, M_i = S_i C_i S_i; its minimizer is closed form.
  Mat Msum = Mat::Zero(dim, dim);
  Vec rhs = Vec::Zero(dim);
  for (int i = 0; i < tasks; ++i) {
    Mat Mi = d->SC[i] * d->S[i];
    Mi = 0.5 * (Mi + Mi.transpose());
    Msum += Mi;
    rhs += Mi * d->mu[i];
  }
  Vec xstar = Eigen::LLT<Mat>(Msum).solve(rhs);
  p.known_optimum = std::make_pair(xstar, p.inner_solution(xstar));
  return p;
}

BilevelProblem make_langevin_toy(const LangevinToyParams& params) {
  require_spd(params.P, "P");
  const int d1 = static_cast<int>(params.M.rows());
  const int d2 = static_cast<int>(params.P.rows());
  if (params.M.cols() != d2 || params.m.size() != d1)
    throw ArgumentError("make_langevin_toy: inconsistent dimensions");

  struct Data {
    Mat P, M;
    Vec m;
  };
  auto d = std::make_shared<Data>();
  d->P = params.P;
  d->M = params.M;
  d->m = params.m;

  BilevelProblem p;
  p.name = "langevin_toy";
  p.d1 = d1;
  p.d2 = d2;
  p.mu_g = min_eigenvalue(params.P);
  p.constant_inner_hessians = true;

  p.f = [d](const Vec& x, const Vec& z) { return 0.5 * (x - d->M * z - d->m).squaredNorm(); };
  p.g = [d](const Vec&, const Vec& z) { return 0.5 * z.dot(d->P * z); };
  p.grad_x_f = [d](const Vec& x, const Vec& z, Vec& out) {
    out = x - d->m;
    out.noalias() -= d->M * z;
  };
  p.grad_y_f = [d](const Vec& x, const Vec& z, Vec& out) {
    out.noalias() = -d->M.transpose() * (x - d->M * z - d->m);
  };
  p.grad_y_g = [d](const Vec&, const Vec& z, Vec& out) { out.noalias() = d->P * z; };
  p.hess_yy_g = [d](const Vec&, const Vec&, Mat& out) { out = d->P; };
  p.hess_xy_g = [d](const Vec&, const Vec&, Mat& out) { out.setZero(); };
  // decoupled: the corrected gradient is grad_x f itself
  p.jac_x_corrected_grad = [d](const Vec&, const Vec&, Mat& out) {
    out.setIdentity();
  };
  p.jac_y_corrected_grad = [d](const Vec&, const Vec&, Mat& out) { out = -d->M; };
  p.inner_solution = [d](const Vec&) -> Vec { return Vec::Zero(d->P.rows()); };
  p.known_optimum = std::make_pair(params.m, Vec::Zero(d2));
  return p;
}

BilevelProblem with_broken_gradient(const BilevelProblem& prob, int coord, double amount) {
  if (coord < 0 || coord >= prob.d1)
    throw ArgumentError("with_broken_gradient: coordinate out of range");
  BilevelProblem p = prob;
  p.name = prob.name + "(broken)";
  VecFn base = prob.grad_x_f;
  p.grad_x_f = [base, coord, amount](const Vec& x, const Vec& y, Vec& out) {
    base(x, y, out);
    out(coord) += amount;
  };
  // analytic corrected-gradient Jacobians no longer match; drop them so the
  // audit picks the perturbation up through hypergrad itself
  p.jac_x_corrected_grad = nullptr;
  p.jac_y_corrected_grad = nullptr;
  return p;
}

}  // namespace ttsa
