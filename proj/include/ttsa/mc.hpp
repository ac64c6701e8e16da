#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ttsa/clt.hpp"
#include "ttsa/sde.hpp"

namespace ttsa {

struct MCConfig {
  int replicates = 0;
  TTSAConfig base;
  int workers = 0;  // 0: hardware concurrency; always capped by TTSA_THREADS
};

struct ReplicateFinal {
  Vec x;
  Vec y;
  bool blown = false;
};

struct KSResult {
  double statistic = 0.0;
  double p_value = 0.0;
};

struct MCReport {
  int replicates = 0;
  int excluded_blowups = 0;

  Mat emp_sigma_x;   // d1 x d1
  Mat emp_sigma_y;   // d2 x d2
  Mat emp_sigma_xy;  // d1 x d2 cross block
  Mat theory_sigma_x;
  Mat theory_sigma_y;

  double rel_err_x = 0.0;  // ||emp - theory||_F / ||theory||_F
  double rel_err_y = 0.0;
  double cross_norm_ratio = 0.0;  // ||emp_xy||_F / sqrt(||Sx||_F ||Sy||_F)

  Vec mean_rescaled_x;  // bias indicator
  Vec mean_rescaled_y;

  std::vector<KSResult> ks_x;  // per coordinate
  std::vector<KSResult> ks_y;
  std::optional<KSResult> ks_projection;  // one fixed seeded projection of the x block
  bool ks_skipped = false;
  std::string ks_skip_reason;

  bool degenerate_noise = false;  // zero theory covariance; comparisons skipped

  std::vector<double> curve_times;         // logged times
  std::vector<double> curve_median_x_err;  // median ||x_t - x*|| over replicates

  Vec xstar;
  Vec ystar;
};

// R independent trajectories with per-replicate streams derived from
// (base.seed, replicate index); the result is a pure function of the config,
// independent of worker count and scheduling. Replicates that hit the
// boundedness guard are returned flagged; more than 1% of them voids the
// experiment (ExperimentInvalidError).
std::vector<ReplicateFinal> run_replicates(const MCConfig& mc, const BilevelProblem& prob,
                                           const NoiseModel& noise);

// Terminal errors scaled by the CLT normalization 1/sqrt(gamma_i(T)).
void rescale_errors(const std::vector<ReplicateFinal>& finals, const SchedulePair& schedules,
                    double T, const Vec& xstar, const Vec& ystar, Mat& samples_x, Mat& samples_y);

// Sample covariance about the sample mean, denominator R - 1 (rows are
// observations). Requires R >= 2.
Mat empirical_cov(const Mat& samples);

// Relative Frobenius error; infinity when theory == 0 but emp != 0.
double compare_cov(const Mat& emp, const Mat& theory);

// One-sample Kolmogorov-Smirnov statistic of `samples` against the centered
// Gaussian CDF with the given variance, and the asymptotic p-value
// (Kolmogorov series truncated below 1e-10). Requires variance > 0 and
// at least 20 samples.
KSResult ks_normality(const Vec& samples, double variance);

// Full Monte Carlo check of the limit law: covariance comparison, KS
// normality per coordinate, cross-block norm, bias indicator, and the median
// convergence curve. Uses the problem's known optimum, or finds one by
// deterministic Newton descent when absent.
MCReport verify_clt(const MCConfig& mc, const BilevelProblem& prob, const NoiseModel& noise);

// Worker resolution used by the Monte Carlo driver: the smaller of the
// config hint (0 = hardware) and the TTSA_THREADS environment cap.
int resolve_worker_count(int hint);

}  // namespace ttsa
