#include "ttsa/noise.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "ttsa/errors.hpp"

namespace ttsa {

NoiseModel NoiseModel::zero(int d1, int d2) {
  NoiseModel n;
  n.bias_x = Vec::Zero(d1);
  n.bias_y = Vec::Zero(d2);
  n.sigma_x_inf = Mat::Zero(d1, d1);
  n.sigma_y_inf = Mat::Zero(d2, d2);
  n.cross_corr = Mat::Zero(d1, d2);
  return n;
}

NoiseModel NoiseModel::iid(int d1, int d2, double sigma_x, double sigma_y, double rho) {
  NoiseModel n = zero(d1, d2);
  n.sigma_x_inf = sigma_x * Mat::Identity(d1, d1);
  n.sigma_y_inf = sigma_y * Mat::Identity(d2, d2);
  if (rho != 0.0) {
    const int k = std::min(d1, d2);
    n.cross_corr.block(0, 0, k, k) = rho * Mat::Identity(k, k);
  }
  return n;
}

void validate_noise(const NoiseModel& noise, int d1, int d2) {
  auto fail = [](const std::string& msg) { throw ConfigError("noise model: " + msg); };
  if (noise.bias_x.size() != d1 || noise.bias_y.size() != d2)
    fail("bias vectors must have the problem dimensions");
  if (noise.bias_rho < 0.0) fail("bias decay exponent rho must be >= 0");
  if (noise.sigma_x_inf.rows() != d1 || noise.sigma_x_inf.cols() != d1)
    fail("sigma_x must be d1 x d1");
  if (noise.sigma_y_inf.rows() != d2 || noise.sigma_y_inf.cols() != d2)
    fail("sigma_y must be d2 x d2");
  if (noise.cross_corr.rows() != d1 || noise.cross_corr.cols() != d2)
    fail("cross_corr must be d1 x d2");
  if (noise.transient) {
    if (noise.transient->D_x.rows() != d1 || noise.transient->D_x.cols() != d1 ||
        noise.transient->D_y.rows() != d2 || noise.transient->D_y.cols() != d2)
      fail("transient blocks must match the diffusion dimensions");
    if (!(noise.transient->kappa > 0.0)) fail("transient decay kappa must be positive");
  }
  if ((noise.cross_corr.array().abs() > 1.0 + 1e-12).any())
    fail("cross_corr entries must lie in [-1, 1]");
  // PSD of [[I, rho], [rho', I]] is equivalent to I - rho' rho PSD.
  Eigen::SelfAdjointEigenSolver<Mat> es(
      Mat::Identity(d2, d2) - noise.cross_corr.transpose() * noise.cross_corr);
  if (es.eigenvalues().minCoeff() < -1e-10)
    fail("joint correlation block matrix is not positive semi-definite");
}

void validate_bias_gate(const NoiseModel& noise, const SchedulePair& schedules) {
  if (!noise.has_bias()) return;
  const double eta1 = schedules.outer.eta();
  if (noise.bias_rho <= 0.5 * eta1) {
    std::ostringstream os;
    os << "Assumption 6 violated: non-zero bias requires decay exponent rho > eta1/2 "
       << "(got rho=" << noise.bias_rho << ", eta1/2=" << 0.5 * eta1 << ")";
    throw ConfigError(os.str());
  }
}

NoisePlan prepare_noise(const NoiseModel& noise, int d1, int d2) {
  validate_noise(noise, d1, d2);
  NoisePlan plan;
  plan.has_cross = noise.cross_corr.any();
  if (plan.has_cross) {
    plan.cross_T = noise.cross_corr.transpose();
    Mat S = Mat::Identity(d2, d2) - plan.cross_T * noise.cross_corr;
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    Vec lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    plan.L_y = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  }
  return plan;
}

}  // namespace ttsa
