#pragma once

#include <Eigen/Core>
#include <optional>

#include "ttsa/problem.hpp"
#include "ttsa/schedule.hpp"

namespace ttsa {

// Additive decaying transient on top of the limiting diffusion coefficient:
//   sigma_i(t) = sigma_i_inf + D_i (1 + t)^(-kappa), kappa > 0.
struct DiffusionTransient {
  Mat D_x;
  Mat D_y;
  double kappa = 1.0;
};

// Observation-noise model for the coupled recursions.
//
//   bias      eta_i(t) = b_i (1 + t)^(-rho)
//   diffusion sigma_i(t), converging to sigma_i_inf
//   coupling  cross_corr gives the correlation between the two driving
//             Brownian motions, realized through shared Gaussian components.
struct NoiseModel {
  Vec bias_x;  // d1
  Vec bias_y;  // d2
  double bias_rho = 0.0;

  Mat sigma_x_inf;  // d1 x d1
  Mat sigma_y_inf;  // d2 x d2
  std::optional<DiffusionTransient> transient;

  Mat cross_corr;  // d1 x d2, entries in [-1, 1]

  bool has_bias() const {
    return (bias_x.size() > 0 && bias_x.any()) || (bias_y.size() > 0 && bias_y.any());
  }
  bool has_transient() const { return transient.has_value(); }

  static NoiseModel zero(int d1, int d2);
  // Independent driving noises with constant scalar intensities.
  static NoiseModel iid(int d1, int d2, double sigma_x = 1.0, double sigma_y = 1.0,
                        double rho = 0.0);
};

// Shape checks, entry bounds, and positive semi-definiteness of the joint
// correlation block matrix [[I, rho], [rho', I]]. Throws ConfigError.
void validate_noise(const NoiseModel& noise, int d1, int d2);

// Assumption 6 gate: a non-zero bias must decay strictly faster than the
// square root of the outer learning rate, i.e. rho > eta1 / 2.
// Throws ConfigError naming the assumption.
void validate_bias_gate(const NoiseModel& noise, const SchedulePair& schedules);

// Per-trajectory sampling plan: the cross-correlated pair (xi1, xi2) is
// realized as xi1 = z1, xi2 = cross_corr' z1 + L z2 with L a symmetric
// square root of I - cross_corr' cross_corr, computed once.
struct NoisePlan {
  bool has_cross = false;
  Mat cross_T;  // d2 x d1
  Mat L_y;      // d2 x d2
};
NoisePlan prepare_noise(const NoiseModel& noise, int d1, int d2);

}  // namespace ttsa
