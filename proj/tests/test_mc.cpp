#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "ttsa/errors.hpp"
#include "ttsa/mc.hpp"
#include "ttsa/problems.hpp"
#include "ttsa/rng.hpp"

using namespace ttsa;

namespace {

Vec scalar(double v) {
  Vec x(1);
  x(0) = v;
  return x;
}

TTSAConfig engine(double dt, double T, std::uint64_t seed, long stride = 1000000) {
  TTSAConfig c;
  c.dt = dt;
  c.T = T;
  c.schedules = {LearningRateSchedule(1, 1, 0.9), LearningRateSchedule(1, 1, 0.6)};
  c.x0 = scalar(1.0);
  c.y0 = scalar(1.0);
  c.seed = seed;
  c.log_stride = stride;
  return c;
}

// inverse standard normal CDF by bisection on erfc
double probit(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Exact second-moment recursion for the linearized scalar scheme: the
// covariance of (x, y) deviations obeys V <- M V M' + dt G S G with
// M = I + G A dt. Independent of the simulation path; used as the oracle
// for the Monte Carlo pipeline.
struct MomentOracle {
  double vxx = 0.0, vxy = 0.0, vyy = 0.0;
  void run(double dt, long n, const SchedulePair& s, double rho) {
    Eigen::Matrix2d A;
    A << -1, -1, 1, -1;
    Eigen::Matrix2d S;
    S << 1, rho, rho, 1;
    Eigen::Matrix2d V = Eigen::Matrix2d::Zero();
    for (long k = 0; k < n; ++k) {
      const double t = k * dt;
      Eigen::Matrix2d G = Eigen::Vector2d(s.outer.eval(t), s.inner.eval(t)).asDiagonal();
      Eigen::Matrix2d M = Eigen::Matrix2d::Identity() + G * A * dt;
      V = M * V * M.transpose() + dt * (G * S * G);
    }
    vxx = V(0, 0);
    vxy = V(0, 1);
    vyy = V(1, 1);
  }
};

}  // namespace

TEST_CASE("empirical covariance textbook values") {
  Mat s(3, 1);
  s << -1, 0, 1;
  CHECK(empirical_cov(s)(0, 0) == doctest::Approx(1.0));
  Mat same = Mat::Constant(5, 2, 3.25);
  CHECK(empirical_cov(same).norm() == 0.0);
  Mat one(1, 1);
  one << 1.0;
  CHECK_THROWS_AS(empirical_cov(one), ArgumentError);
}

TEST_CASE("empirical covariance of seeded normal draws is near unit") {
  const int n = 100000;
  GaussianStream rng(2718);
  Mat s(n, 1);
  for (int i = 0; i < n; ++i) s(i, 0) = rng.normal();
  const double se = std::sqrt(2.0 / (n - 1));
  CHECK(std::abs(empirical_cov(s)(0, 0) - 1.0) <= 3.0 * se);
}

TEST_CASE("covariance comparison is a relative Frobenius error") {
  CHECK(compare_cov(Mat::Identity(2, 2), Mat::Identity(2, 2)) == 0.0);
  Mat a(1, 1), b(1, 1);
  a << 1.1;
  b << 1.0;
  CHECK(compare_cov(a, b) == doctest::Approx(0.1));
  a << 0.55;
  b << 0.5;
  CHECK(compare_cov(a, b) == doctest::Approx(0.1));
  b << 0.0;
  CHECK(std::isinf(compare_cov(a, b)));
  a << 0.0;
  CHECK(compare_cov(a, b) == 0.0);
}

TEST_CASE("rescaling maps terminal errors throughated power of the learning rate") {
  std::vector<ReplicateFinal> finals(2);
  finals[0].x = scalar(0.01);
  finals[0].y = scalar(0.0);
  finals[1].x = scalar(0.0);
  finals[1].y = scalar(2.0);
  // schedules with gamma1(T) = 1e-4, gamma2(T) = 1 at T = 9999
  SchedulePair s{LearningRateSchedule(1, 1, 1.0), LearningRateSchedule(1, 10000, 0.0)};
  Mat sx, sy;
  rescale_errors(finals, s, 9999.0, scalar(0.0), scalar(0.0), sx, sy);
  CHECK(sx(0, 0) == doctest::Approx(1.0));  // 0.01 / sqrt(1e-4)
  CHECK(sy(1, 0) == doctest::Approx(2.0));  // identity rescaling
  CHECK(sx(1, 0) == 0.0);
}

TEST_CASE("KS statistic on the quantile construction is small") {
  const int R = 99;
  Vec samples(R);
  for (int i = 1; i <= R; ++i) samples(i - 1) = probit(i / 100.0);
  auto ks = ks_normality(samples, 1.0);
  CHECK(ks.statistic <= 0.01 + 1e-12);
  CHECK(ks.p_value > 0.99);
}

TEST_CASE("KS on a point mass at zero has statistic 1/2 and vanishing p") {
  Vec samples = Vec::Zero(50);
  auto ks = ks_normality(samples, 1.0);
  CHECK(ks.statistic == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ks.p_value <= 1e-5);
}

TEST_CASE("KS preconditions") {
  Vec five = Vec::Zero(5);
  CHECK_THROWS_AS(ks_normality(five, 1.0), ArgumentError);
  Vec ok = Vec::Zero(25);
  CHECK_THROWS_AS(ks_normality(ok, 0.0), ArgumentError);
  CHECK_THROWS_AS(ks_normality(ok, -1.0), ArgumentError);
}

TEST_CASE("replicates: determinism and the R >= 2 gate") {
  BilevelProblem p = make_quadratic_1d();
  NoiseModel zero = NoiseModel::zero(1, 1);

  MCConfig mc;
  mc.replicates = 2;
  mc.base = engine(0.01, 2.0, 5);
  auto finals = run_replicates(mc, p, zero);
  REQUIRE(finals.size() == 2);
  CHECK(finals[0].x(0) == finals[1].x(0));  // deterministic dynamics

  mc.replicates = 1;
  CHECK_THROWS_AS(run_replicates(mc, p, zero), ConfigError);

  mc.replicates = 40;
  NoiseModel noisy = NoiseModel::iid(1, 1);
  auto a = run_replicates(mc, p, noisy);
  auto b = run_replicates(mc, p, noisy);
  for (int i = 0; i < 40; ++i) CHECK(a[i].x(0) == b[i].x(0));
}

TEST_CASE("replicates are independent of the worker count") {
  BilevelProblem p = make_quadratic_1d();
  NoiseModel noisy = NoiseModel::iid(1, 1);
  MCConfig mc;
  mc.replicates = 30;
  mc.base = engine(0.01, 2.0, 17);

  setenv("TTSA_THREADS", "1", 1);
  auto a = run_replicates(mc, p, noisy);
  setenv("TTSA_THREADS", "3", 1);
  mc.workers = 3;
  auto b = run_replicates(mc, p, noisy);
  unsetenv("TTSA_THREADS");
  for (int i = 0; i < 30; ++i) {
    CHECK(a[i].x(0) == b[i].x(0));
    CHECK(a[i].y(0) == b[i].y(0));
  }
}

TEST_CASE("TTSA_THREADS must be a positive integer") {
  setenv("TTSA_THREADS", "zero", 1);
  CHECK_THROWS_AS(resolve_worker_count(0), ConfigError);
  setenv("TTSA_THREADS", "4", 1);
  CHECK(resolve_worker_count(0) <= 4);
  CHECK(resolve_worker_count(2) <= 2);
  unsetenv("TTSA_THREADS");
}

TEST_CASE("an experiment with pervasive blowups is invalid") {
  BilevelProblem p = make_quadratic_1d();
  MCConfig mc;
  mc.replicates = 10;
  mc.base = engine(0.01, 1.0, 3);
  mc.base.blowup_bound = 1e-9;
  CHECK_THROWS_AS(run_replicates(mc, p, NoiseModel::zero(1, 1)), ExperimentInvalidError);
}

TEST_CASE("monte carlo covariances match the exact moment recursion") {
  BilevelProblem p = make_quadratic_1d();
  const double dt = 0.02;
  const double T = 50.0;
  const double rho = 0.4;
  NoiseModel noise = NoiseModel::iid(1, 1, 1.0, 1.0, rho);

  MCConfig mc;
  mc.replicates = 3000;
  mc.base = engine(dt, T, 20260809, 500);

  MCReport rep = verify_clt(mc, p, noise);

  MomentOracle oracle;
  oracle.run(dt, std::lround(T / dt), mc.base.schedules, rho);
  const double g1 = mc.base.schedules.outer.eval(T);
  const double g2 = mc.base.schedules.inner.eval(T);
  const double ex = oracle.vxx / g1;
  const double ey = oracle.vyy / g2;
  const double exy = oracle.vxy / std::sqrt(g1 * g2);

  const double R = mc.replicates;
  CHECK(std::abs(rep.emp_sigma_x(0, 0) - ex) <= 5.0 * ex * std::sqrt(2.0 / (R - 1)));
  CHECK(std::abs(rep.emp_sigma_y(0, 0) - ey) <= 5.0 * ey * std::sqrt(2.0 / (R - 1)));
  const double se_xy = std::sqrt((ex * ey + exy * exy) / (R - 1));
  CHECK(std::abs(rep.emp_sigma_xy(0, 0) - exy) <= 5.0 * se_xy);

  // the report is reproducible bit for bit
  MCReport rep2 = verify_clt(mc, p, noise);
  CHECK(rep.emp_sigma_x(0, 0) == rep2.emp_sigma_x(0, 0));
  CHECK(rep.emp_sigma_xy(0, 0) == rep2.emp_sigma_xy(0, 0));
  CHECK(rep.curve_median_x_err == rep2.curve_median_x_err);
}

TEST_CASE("verify_clt handles degenerate noise") {
  BilevelProblem p = make_quadratic_1d();
  MCConfig mc;
  mc.replicates = 25;
  mc.base = engine(0.01, 2.0, 9);
  MCReport rep = verify_clt(mc, p, NoiseModel::zero(1, 1));
  CHECK(rep.degenerate_noise);
  CHECK(rep.emp_sigma_x.norm() <= 1e-20);
  CHECK(rep.ks_skipped);
  CHECK(rep.ks_skip_reason.find("degenerate") != std::string::npos);
}

TEST_CASE("verify_clt gates KS on the replicate count") {
  BilevelProblem p = make_quadratic_1d();
  MCConfig mc;
  mc.replicates = 2;
  mc.base = engine(0.01, 2.0, 9);
  MCReport rep = verify_clt(mc, p, NoiseModel::iid(1, 1));
  CHECK(rep.ks_skipped);
  CHECK(rep.ks_skip_reason.find("20") != std::string::npos);
  CHECK(rep.ks_x.empty());
}

TEST_CASE("verify_clt produces a decreasing convergence curve under noise") {
  BilevelProblem p = make_quadratic_1d();
  MCConfig mc;
  mc.replicates = 200;
  mc.base = engine(0.01, 400.0, 31, 10000);  // curve points every t = 100
  MCReport rep = verify_clt(mc, p, NoiseModel::iid(1, 1, 0.3, 0.3));
  REQUIRE(rep.curve_median_x_err.size() >= 4);
  CHECK(rep.curve_median_x_err.front() > rep.curve_median_x_err.back());
  // bias indicator within the centered-limit band
  const double tr = rep.theory_sigma_x(0, 0);
  CHECK(rep.mean_rescaled_x.norm() <= 3.0 * std::sqrt(tr / mc.replicates) + 1e-12);
}
