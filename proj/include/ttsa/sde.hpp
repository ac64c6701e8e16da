#pragma once

#include <Eigen/Cholesky>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ttsa/noise.hpp"
#include "ttsa/problem.hpp"
#include "ttsa/rng.hpp"
#include "ttsa/schedule.hpp"

namespace ttsa {

struct TTSAConfig {
  double dt = 0.0;
  double T = 0.0;
  SchedulePair schedules;
  Vec x0;
  Vec y0;
  std::uint64_t seed = 0;
  long log_stride = 1;
  double blowup_bound = 1e6;  // operational boundedness guard (Assumption 4)
};

struct Trajectory {
  std::vector<double> times;    // logged times, spacing dt * log_stride
  std::vector<Vec> xs;          // logged outer iterates
  std::vector<Vec> ys;          // logged inner iterates
  std::vector<double> gamma1;   // learning rates at logged times
  std::vector<double> gamma2;
  bool terminated_early = false;
  std::string reason;           // "blowup_bound_exceeded" or "non_finite_state"
  long steps_taken = 0;
  double final_time = 0.0;      // time of the last executed step
  Vec final_x;
  Vec final_y;
};

// One noisy-gradient increment pair (dh1, dh2): drift + bias + diffusion,
// before multiplication by the learning rates. The Euler-Maruyama step is
// state + gamma(t) * increment. Always consumes one joint Gaussian block of
// d1 + d2 standard normals so configurations stay comparable under a shared
// seed even when amplitudes are zero.
std::pair<Vec, Vec> observation_increment(const BilevelProblem& prob, const NoiseModel& noise,
                                          const Vec& x, const Vec& y, double t, double dt,
                                          GaussianStream& rng);

// One descent step of the coupled recursions:
//   x' = x + gamma1(t) (-cg(x,y) dt + eta1(t) dt + sigma1(t) sqrt(dt) xi1)
//   y' = y + gamma2(t) (-grad_y g(x,y) dt + eta2(t) dt + sigma2(t) sqrt(dt) xi2)
// with cg the corrected outer gradient and (xi1, xi2) jointly Gaussian per
// the noise model. Throws BlowupError when the updated state is non-finite.
std::pair<Vec, Vec> em_step(const BilevelProblem& prob, const NoiseModel& noise,
                            const SchedulePair& schedules, const Vec& x, const Vec& y, double t,
                            double dt, GaussianStream& rng);

// Integrates from t = 0 to T = round(T/dt) * dt, logging every log_stride
// steps starting at t = 0. A pure function of (config, prob, noise): the
// trajectory stream is derived from (config.seed, replicate index 0).
// Configuration problems (schedule gate, noise gate, shape mismatches)
// throw ConfigError before any stepping; state growth past blowup_bound
// stops the trajectory and flags it instead of throwing.
Trajectory integrate(const TTSAConfig& config, const BilevelProblem& prob,
                     const NoiseModel& noise);

namespace detail {

// Learning rates tabulated at the left endpoints t_k = k dt, shared across
// replicates so the per-step cost stays free of pow() calls. Entries are
// computed through LearningRateSchedule::eval so tabulated and direct paths
// agree bitwise.
struct RateTable {
  std::vector<double> g1;
  std::vector<double> g2;
};
RateTable tabulate_rates(const SchedulePair& schedules, double dt, long n_steps);

// Reusable per-trajectory workspace (gradient buffers, factored inner
// Hessian, correlated-noise factors). Not thread-safe; one per worker.
class Stepper {
 public:
  Stepper(const BilevelProblem& prob, const NoiseModel& noise);

  // Writes the bracketed increments for one step into dh1 / dh2.
  void increments(const Vec& x, const Vec& y, double t, double dt, GaussianStream& rng, Vec& dh1,
                  Vec& dh2);

 private:
  const BilevelProblem& prob_;
  const NoiseModel& noise_;
  NoisePlan plan_;
  bool sigma_x_zero_ = false;
  bool sigma_y_zero_ = false;
  bool factored_ = false;
  Eigen::LLT<Mat> llt_;
  Mat hyy_, hxy_, sig_x_t_, sig_y_t_;
  Vec gxf_, gyf_, gyg_, v_, zeta_, xi1_, xi2_;
};

struct IntegrateOptions {
  const RateTable* rates = nullptr;  // optional shared table
  const Vec* xstar = nullptr;        // when set, collect ||x_t - x*|| at logged times
  std::vector<double>* x_err_curve = nullptr;
  bool store_states = true;          // false: keep only finals (Monte Carlo path)
  std::uint64_t stream_index = 0;    // replicate index for the RNG stream
};

Trajectory integrate_impl(const TTSAConfig& config, const BilevelProblem& prob,
                          const NoiseModel& noise, Stepper& stepper,
                          const IntegrateOptions& opts);

// All pre-flight checks shared by integrate and the Monte Carlo driver.
void validate_engine_config(const TTSAConfig& config, const BilevelProblem& prob,
                            const NoiseModel& noise);

}  // namespace detail

}  // namespace ttsa
