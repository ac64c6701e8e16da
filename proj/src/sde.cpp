#include "ttsa/sde.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "ttsa/errors.hpp"

namespace ttsa {

namespace detail {

RateTable tabulate_rates(const SchedulePair& schedules, double dt, long n_steps) {
  RateTable table;
  table.g1.resize(n_steps);
  table.g2.resize(n_steps);
  for (long k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    table.g1[k] = schedules.outer.eval(t);
    table.g2[k] = schedules.inner.eval(t);
  }
  return table;
}

Stepper::Stepper(const BilevelProblem& prob, const NoiseModel& noise)
    : prob_(prob), noise_(noise), plan_(prepare_noise(noise, prob.d1, prob.d2)) {
  const int d1 = prob.d1;
  const int d2 = prob.d2;
  hyy_.resize(d2, d2);
  hxy_.resize(d1, d2);
  sig_x_t_.resize(d1, d1);
  sig_y_t_.resize(d2, d2);
  gxf_.resize(d1);
  gyf_.resize(d2);
  gyg_.resize(d2);
  v_.resize(d2);
  zeta_.resize(d1 + d2);
  xi1_.resize(d1);
  xi2_.resize(d2);
  sigma_x_zero_ = !noise.sigma_x_inf.any() && !noise.has_transient();
  sigma_y_zero_ = !noise.sigma_y_inf.any() && !noise.has_transient();
}

void Stepper::increments(const Vec& x, const Vec& y, double t, double dt, GaussianStream& rng,
                         Vec& dh1, Vec& dh2) {
  // inner Hessian factor; constant-Hessian problems are factored once
  if (!factored_ || !prob_.constant_inner_hessians) {
    prob_.hess_yy_g(x, y, hyy_);
    prob_.hess_xy_g(x, y, hxy_);
    llt_.compute(hyy_);
    if (llt_.info() != Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (hyy_ + hyy_.transpose()));
      const double lmin = es.eigenvalues().minCoeff();
      throw SingularityError("em_step: inner Hessian is not positive definite", lmin);
    }
    factored_ = true;
  }

  // descent drifts
  prob_.grad_y_f(x, y, gyf_);
  v_ = gyf_;
  llt_.solveInPlace(v_);
  prob_.grad_x_f(x, y, dh1);
  dh1.noalias() -= hxy_ * v_;
  dh1 *= -dt;
  prob_.grad_y_g(x, y, dh2);
  dh2 *= -dt;

  // decaying bias
  if (noise_.has_bias()) {
    const double decay = std::pow(1.0 + t, -noise_.bias_rho) * dt;
    dh1.noalias() += decay * noise_.bias_x;
    dh2.noalias() += decay * noise_.bias_y;
  }

  // one joint Gaussian block per step, drawn unconditionally
  rng.fill_standard_normal(zeta_);
  xi1_ = zeta_.head(prob_.d1);
  if (plan_.has_cross) {
    xi2_.noalias() = plan_.cross_T * xi1_;
    xi2_.noalias() += plan_.L_y * zeta_.tail(prob_.d2);
  } else {
    xi2_ = zeta_.tail(prob_.d2);
  }

  const double sqdt = std::sqrt(dt);
  if (noise_.has_transient()) {
    const double decay = std::pow(1.0 + t, -noise_.transient->kappa);
    sig_x_t_ = noise_.sigma_x_inf + decay * noise_.transient->D_x;
    sig_y_t_ = noise_.sigma_y_inf + decay * noise_.transient->D_y;
    dh1.noalias() += sqdt * (sig_x_t_ * xi1_);
    dh2.noalias() += sqdt * (sig_y_t_ * xi2_);
  } else {
    if (!sigma_x_zero_) dh1.noalias() += sqdt * (noise_.sigma_x_inf * xi1_);
    if (!sigma_y_zero_) dh2.noalias() += sqdt * (noise_.sigma_y_inf * xi2_);
  }
}

void validate_engine_config(const TTSAConfig& config, const BilevelProblem& prob,
                            const NoiseModel& noise) {
  if (!(config.dt > 0.0)) throw ConfigError("engine: dt must be positive");
  if (!(config.T > 0.0)) throw ConfigError("engine: T must be positive");
  if (config.dt > config.T) throw ConfigError("engine: dt must not exceed T");
  if (config.log_stride < 1) throw ConfigError("engine: log_stride must be >= 1");
  if (!(config.blowup_bound > 0.0)) throw ConfigError("engine: blowup_bound must be positive");
  if (config.x0.size() != prob.d1 || config.y0.size() != prob.d2)
    throw ConfigError("engine: initial state does not match the problem dimensions");
  const auto sched = validate_schedules(config.schedules);
  if (!sched.ok) throw ConfigError(sched.message);
  validate_noise(noise, prob.d1, prob.d2);
  validate_bias_gate(noise, config.schedules);
}

Trajectory integrate_impl(const TTSAConfig& config, const BilevelProblem& prob,
                          const NoiseModel& noise, Stepper& stepper,
                          const IntegrateOptions& opts) {
  const double dt = config.dt;
  const long n_steps = std::max<long>(1, std::llround(config.T / dt));
  GaussianStream rng = GaussianStream::replicate_stream(config.seed, opts.stream_index);

  Trajectory traj;
  Vec x = config.x0;
  Vec y = config.y0;
  Vec dh1(prob.d1), dh2(prob.d2);

  auto log_point = [&](long k, double t) {
    if (opts.store_states) {
      traj.times.push_back(t);
      traj.xs.push_back(x);
      traj.ys.push_back(y);
      traj.gamma1.push_back(k < n_steps && opts.rates ? opts.rates->g1[k]
                                                      : config.schedules.outer.eval(t));
      traj.gamma2.push_back(k < n_steps && opts.rates ? opts.rates->g2[k]
                                                      : config.schedules.inner.eval(t));
    }
    if (opts.x_err_curve && opts.xstar) opts.x_err_curve->push_back((x - *opts.xstar).norm());
  };

  long k = 0;
  for (; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k % config.log_stride == 0) log_point(k, t);
    if (x.lpNorm<2>() + y.lpNorm<2>() > config.blowup_bound) {
      traj.terminated_early = true;
      traj.reason = "blowup_bound_exceeded";
      break;
    }
    const double g1 = opts.rates ? opts.rates->g1[k] : config.schedules.outer.eval(t);
    const double g2 = opts.rates ? opts.rates->g2[k] : config.schedules.inner.eval(t);
    stepper.increments(x, y, t, dt, rng, dh1, dh2);
    x.noalias() += g1 * dh1;
    y.noalias() += g2 * dh2;
    if (!x.allFinite() || !y.allFinite()) {
      traj.terminated_early = true;
      traj.reason = "non_finite_state";
      ++k;
      break;
    }
  }
  const double t_end = static_cast<double>(k) * dt;
  if (!traj.terminated_early && k % config.log_stride == 0) log_point(k, t_end);

  traj.steps_taken = k;
  traj.final_time = t_end;
  traj.final_x = x;
  traj.final_y = y;
  return traj;
}

}  // namespace detail

std::pair<Vec, Vec> observation_increment(const BilevelProblem& prob, const NoiseModel& noise,
                                          const Vec& x, const Vec& y, double t, double dt,
                                          GaussianStream& rng) {
  if (!(dt > 0.0)) throw ArgumentError("observation_increment: dt must be positive");
  if (t < 0.0) throw ArgumentError("observation_increment: t must be non-negative");
  detail::Stepper stepper(prob, noise);
  Vec dh1(prob.d1), dh2(prob.d2);
  stepper.increments(x, y, t, dt, rng, dh1, dh2);
  return {dh1, dh2};
}

std::pair<Vec, Vec> em_step(const BilevelProblem& prob, const NoiseModel& noise,
                            const SchedulePair& schedules, const Vec& x, const Vec& y, double t,
                            double dt, GaussianStream& rng) {
  if (!(dt > 0.0)) throw ArgumentError("em_step: dt must be positive");
  if (t < 0.0) throw ArgumentError("em_step: t must be non-negative");
  detail::Stepper stepper(prob, noise);
  Vec dh1(prob.d1), dh2(prob.d2);
  stepper.increments(x, y, t, dt, rng, dh1, dh2);
  Vec xn = x + schedules.outer.eval(t) * dh1;
  Vec yn = y + schedules.inner.eval(t) * dh2;
  if (!xn.allFinite() || !yn.allFinite())
    throw BlowupError("em_step: state became non-finite");
  return {xn, yn};
}

Trajectory integrate(const TTSAConfig& config, const BilevelProblem& prob,
                     const NoiseModel& noise) {
  detail::validate_engine_config(config, prob, noise);
  const long n_steps = std::max<long>(1, std::llround(config.T / config.dt));
  detail::Stepper stepper(prob, noise);
  detail::IntegrateOptions opts;
  detail::RateTable table;
  // tabulating pays off for long runs; both paths evaluate the same schedule
  if (n_steps <= (1L << 24)) {
    table = detail::tabulate_rates(config.schedules, config.dt, n_steps);
    opts.rates = &table;
  }
  return detail::integrate_impl(config, prob, noise, stepper, opts);
}

}  // namespace ttsa
