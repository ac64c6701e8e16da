#include "ttsa/clt.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <sstream>

#include "ttsa/errors.hpp"
#include "ttsa/hypergradient.hpp"

namespace ttsa {

namespace {

constexpr double kHurwitzGate = -1e-8;

void require_hurwitz(const Mat& M, const char* what) {
  const double margin = hurwitz_margin(M);
  if (!(margin < kHurwitzGate)) {
    std::ostringstream os;
    os << what << " is not Hurwitz (max eigenvalue real part " << margin << ")";
    throw StabilityError(os.str());
  }
}

Mat kron(const Mat& A, const Mat& B) {
  Mat K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

}  // namespace

double hurwitz_margin(const Mat& M) {
  if (M.rows() != M.cols()) throw ArgumentError("hurwitz_margin: matrix must be square");
  Eigen::EigenSolver<Mat> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalError("hurwitz_margin: eigenvalue solver did not converge");
  return es.eigenvalues().real().maxCoeff();
}

Mat matrix_exp(const Mat& M) {
  if (M.rows() != M.cols()) throw ArgumentError("matrix_exp: matrix must be square");
  const Eigen::Index n = M.rows();
  if (!M.allFinite()) throw NumericalError("matrix_exp: non-finite entries");

  if ((M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + M.cwiseAbs().maxCoeff())) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
    return es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
           es.eigenvectors().transpose();
  }

  // Scaling and squaring with the [13/13] Pade approximant.
  const double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
  if (norm1 > 1e8) throw NumericalError("matrix_exp: norm too large");
  constexpr double theta13 = 5.371920351148152;
  int squarings = 0;
  if (norm1 > theta13)
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  const Mat A = M / std::ldexp(1.0, squarings);

  static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                             1187353796428800.0,  129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,       1323241920.0,
                             40840800.0,          960960.0,            16380.0,
                             182.0,               1.0};
  const Mat I = Mat::Identity(n, n);
  const Mat A2 = A * A;
  const Mat A4 = A2 * A2;
  const Mat A6 = A2 * A4;
  Mat U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 +
               b[3] * A2 + b[1] * I);
  Mat V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 +
          b[0] * I;
  Mat P = V + U;
  Mat Q = V - U;
  Mat R = Q.partialPivLu().solve(P);
  for (int s = 0; s < squarings; ++s) R = R * R;
  return R;
}

LinearizationMatrices linearize(const BilevelProblem& prob, const Vec& x, const Vec& y) {
  const double res_outer = hypergrad(prob, x, y).value.norm();
  const double res_inner = prob.eval_grad_y_g(x, y).norm();
  if (res_outer > 1e-6 || res_inner > 1e-6) {
    std::ostringstream os;
    os << "linearize: point is not stationary (corrected-gradient residual " << res_outer
       << ", inner residual " << res_inner << ")";
    throw ArgumentError(os.str());
  }

  LinearizationMatrices lin;
  lin.A11 = -corrected_grad_jac_x(prob, x, y);
  lin.A12 = -corrected_grad_jac_y(prob, x, y);
  lin.A21 = -prob.eval_hess_xy_g(x, y).transpose();
  lin.A22 = -prob.eval_hess_yy_g(x, y);

  Eigen::PartialPivLU<Mat> lu(lin.A22);
  // PartialPivLU has no rank query; check the solve quality instead.
  Mat A22inv_A21 = lu.solve(lin.A21);
  const double check = (lin.A22 * A22inv_A21 - lin.A21).norm();
  if (!A22inv_A21.allFinite() || check > 1e-8 * (1.0 + lin.A21.norm()))
    throw SingularityError("linearize: A22 is singular", 0.0);
  lin.H = lin.A11 - lin.A12 * A22inv_A21;
  return lin;
}

Mat assemble_qx(const LinearizationMatrices& lin, const NoiseLimits& gam) {
  Eigen::PartialPivLU<Mat> lu(lin.A22);
  Mat Binv_check = lu.solve(Mat::Identity(lin.A22.rows(), lin.A22.cols()));
  if (!Binv_check.allFinite()) throw SingularityError("assemble_qx: A22 is singular", 0.0);
  Mat B = lin.A12 * Binv_check;  // A12 A22^{-1}
  Mat Q = gam.G11 + B * gam.G22 * B.transpose() - gam.G12 * B.transpose() -
          B * gam.G12.transpose();
  return 0.5 * (Q + Q.transpose());
}

Mat lyapunov_solve(const Mat& A, const Mat& Q) {
  if (A.rows() != A.cols() || Q.rows() != Q.cols() || A.rows() != Q.rows())
    throw ArgumentError("lyapunov_solve: dimension mismatch");
  if ((Q - Q.transpose()).norm() > 1e-10 * (1.0 + Q.norm()))
    throw ArgumentError("lyapunov_solve: Q must be symmetric");
  require_hurwitz(A, "lyapunov_solve: A");

  const Eigen::Index d = A.rows();
  const Mat I = Mat::Identity(d, d);
  // vec(A S + S A') = (I (x) A + A (x) I) vec(S)
  Mat K = kron(I, A) + kron(A, I);
  Vec rhs = Eigen::Map<const Vec>(Q.data(), d * d);
  Vec s = K.partialPivLu().solve(-rhs);
  Mat S = Eigen::Map<Mat>(s.data(), d, d);
  S = 0.5 * (S + S.transpose());

  const double qn = Q.norm();
  const double res = (A * S + S * A.transpose() + Q).norm();
  if (res > 1e-10 * (qn > 0.0 ? qn : 1.0))
    throw NumericalError("lyapunov_solve: residual exceeds tolerance");
  return S;
}

Mat lyapunov_quadrature_oracle(const Mat& A, const Mat& Q, double t_max, int n_nodes) {
  if (!(t_max > 0.0)) throw ArgumentError("lyapunov_quadrature_oracle: t_max must be positive");
  if (n_nodes < 2) throw ArgumentError("lyapunov_quadrature_oracle: need at least 2 nodes");
  require_hurwitz(A, "lyapunov_quadrature_oracle: A");
  if (matrix_exp(A * t_max).norm() > 1e-12)
    throw AccuracyError("lyapunov_quadrature_oracle: t_max too small, tail bound violated");

  // 8-point Gauss-Legendre nodes/weights on [-1, 1].
  static const double gl_x[8] = {-0.9602898564975362, -0.7966664774136267,
                                 -0.5255324099163290, -0.1834346424956498,
                                 0.1834346424956498,  0.5255324099163290,
                                 0.7966664774136267,  0.9602898564975362};
  static const double gl_w[8] = {0.1012285362903763, 0.2223810344533745,
                                 0.3137066458778873, 0.3626837833783620,
                                 0.3626837833783620, 0.3137066458778873,
                                 0.2223810344533745, 0.1012285362903763};

  const int panels = std::max(1, n_nodes / 8);
  const double hw = t_max / (2.0 * panels);  // panel half-width
  Mat S = Mat::Zero(A.rows(), A.cols());
  for (int p = 0; p < panels; ++p) {
    const double mid = (2 * p + 1) * hw;
    for (int k = 0; k < 8; ++k) {
      const double t = mid + hw * gl_x[k];
      Mat E = matrix_exp(A * t);
      S.noalias() += (gl_w[k] * hw) * (E * Q * E.transpose());
    }
  }
  return 0.5 * (S + S.transpose());
}

NoiseLimits noise_limits(const NoiseModel& noise) {
  NoiseLimits g;
  g.G11 = noise.sigma_x_inf * noise.sigma_x_inf.transpose();
  g.G22 = noise.sigma_y_inf * noise.sigma_y_inf.transpose();
  g.G12 = noise.sigma_x_inf * noise.cross_corr * noise.sigma_y_inf.transpose();
  return g;
}

CLTPrediction predict(const BilevelProblem& prob, const NoiseModel& noise, const Vec& x,
                      const Vec& y) {
  CLTPrediction pred;
  try {
    pred.lin = linearize(prob, x, y);
  } catch (const ArgumentError& e) {
    throw ArgumentError(std::string("predict[linearize]: ") + e.what());
  } catch (const SingularityError& e) {
    throw SingularityError(std::string("predict[linearize]: ") + e.what(), e.min_eigenvalue);
  }
  pred.hurwitz_H = hurwitz_margin(pred.lin.H);
  pred.hurwitz_A22 = hurwitz_margin(pred.lin.A22);
  require_hurwitz(pred.lin.H, "predict[stability]: H");
  require_hurwitz(pred.lin.A22, "predict[stability]: A22");

  validate_noise(noise, prob.d1, prob.d2);
  pred.gamma = noise_limits(noise);
  pred.Qx = assemble_qx(pred.lin, pred.gamma);

  pred.Sigma_x = lyapunov_solve(pred.lin.H, pred.Qx);
  pred.Sigma_y = lyapunov_solve(pred.lin.A22, pred.gamma.G22);

  const double qxn = pred.Qx.norm();
  const double qyn = pred.gamma.G22.norm();
  pred.residual_x =
      (pred.lin.H * pred.Sigma_x + pred.Sigma_x * pred.lin.H.transpose() + pred.Qx).norm() /
      (qxn > 0.0 ? qxn : 1.0);
  pred.residual_y = (pred.lin.A22 * pred.Sigma_y + pred.Sigma_y * pred.lin.A22.transpose() +
                     pred.gamma.G22)
                        .norm() /
                    (qyn > 0.0 ? qyn : 1.0);
  return pred;
}

}  // namespace ttsa
