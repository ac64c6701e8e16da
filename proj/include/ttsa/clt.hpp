#pragma once

#include "ttsa/noise.hpp"
#include "ttsa/problem.hpp"

namespace ttsa {

// Negated Jacobians of (corrected outer gradient, inner gradient) at a
// stationary point, plus the effective slow-timescale matrix
// H = A11 - A12 A22^{-1} A21.
struct LinearizationMatrices {
  Mat A11;  // d1 x d1
  Mat A12;  // d1 x d2
  Mat A21;  // d2 x d1
  Mat A22;  // d2 x d2
  Mat H;    // d1 x d1
};

// Limits of the diffusion products: G11 = sx sx', G22 = sy sy',
// G12 = sx cross_corr sy'. G21 is G12 transposed.
struct NoiseLimits {
  Mat G11;
  Mat G22;
  Mat G12;
};

// Limit covariances of the rescaled errors, with the residuals of the
// Lyapunov equations they solve.
struct CLTPrediction {
  Mat Sigma_x;
  Mat Sigma_y;
  double residual_x = 0.0;  // ||H Sx + Sx H' + Qx||_F / ||Qx||_F
  double residual_y = 0.0;
  double hurwitz_H = 0.0;    // max real part of spec(H)
  double hurwitz_A22 = 0.0;  // max real part of spec(A22)
  LinearizationMatrices lin;
  NoiseLimits gamma;
  Mat Qx;  // assembled slow-timescale noise intensity
};

// Requires ||corrected grad|| and ||grad_y g|| <= 1e-6 at (x, y);
// throws ArgumentError otherwise, SingularityError when A22 is singular.
LinearizationMatrices linearize(const BilevelProblem& prob, const Vec& x, const Vec& y);

// Max real part of the spectrum; callers gate on < 0.
double hurwitz_margin(const Mat& M);

// Matrix exponential: diagonalization for (numerically) symmetric input,
// scaling-and-squaring with a degree-13 Pade approximant otherwise.
Mat matrix_exp(const Mat& M);

// Slow-timescale noise intensity
//   Qx = G11 + B G22 B' - G12 B' - B G12',  B = A12 A22^{-1},
// symmetrized after assembly.
Mat assemble_qx(const LinearizationMatrices& lin, const NoiseLimits& gam);

// Unique symmetric solution of A S + S A' + Q = 0 for Hurwitz A, via the
// dense Kronecker-structured linear system (desk-scale dimensions).
Mat lyapunov_solve(const Mat& A, const Mat& Q);

// Independent oracle: composite Gauss-Legendre quadrature of
// int_0^tmax exp(At) Q exp(A't) dt. Requires ||exp(A tmax)||_F <= 1e-12
// (tail bound), else throws AccuracyError.
Mat lyapunov_quadrature_oracle(const Mat& A, const Mat& Q, double t_max, int n_nodes);

NoiseLimits noise_limits(const NoiseModel& noise);

// Full pipeline: linearize, Hurwitz gates, noise limits, Qx, two Lyapunov
// solves. Errors from any stage are annotated with the stage name.
CLTPrediction predict(const BilevelProblem& prob, const NoiseModel& noise, const Vec& x,
                      const Vec& y);

}  // namespace ttsa
