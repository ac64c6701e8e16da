#include "ttsa/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "ttsa/errors.hpp"
#include "ttsa/hypergradient.hpp"

namespace ttsa {

namespace {

struct ReplicateRecord {
  ReplicateFinal fin;
  std::vector<double> x_err_curve;
};

double median_inplace(std::vector<double>& v) {
  const size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Kolmogorov survival function Q(lambda) = 2 sum_k (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda) {
  if (lambda <= 1e-6) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100000; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    if (term < 1e-10) break;
    sum += sign * term;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

std::vector<ReplicateRecord> run_replicates_ex(const MCConfig& mc, const BilevelProblem& prob,
                                               const NoiseModel& noise, const Vec* xstar) {
  if (mc.replicates < 2) throw ConfigError("monte carlo: replicates must be >= 2");
  detail::validate_engine_config(mc.base, prob, noise);

  const long n_steps = std::max<long>(1, std::llround(mc.base.T / mc.base.dt));
  detail::RateTable table;
  const bool use_table = n_steps <= (1L << 24);
  if (use_table) table = detail::tabulate_rates(mc.base.schedules, mc.base.dt, n_steps);

  const int R = mc.replicates;
  std::vector<ReplicateRecord> out(R);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    detail::Stepper stepper(prob, noise);
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= R || failed.load()) break;
      try {
        detail::IntegrateOptions opts;
        if (use_table) opts.rates = &table;
        opts.store_states = false;
        opts.stream_index = static_cast<std::uint64_t>(i);
        opts.xstar = xstar;
        opts.x_err_curve = xstar ? &out[i].x_err_curve : nullptr;
        Trajectory traj = detail::integrate_impl(mc.base, prob, noise, stepper, opts);
        out[i].fin.x = traj.final_x;
        out[i].fin.y = traj.final_y;
        out[i].fin.blown = traj.terminated_early;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        break;
      }
    }
  };

  const int w = std::min(resolve_worker_count(mc.workers), R);
  if (w <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(w);
    for (int i = 0; i < w; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  const int blown = static_cast<int>(
      std::count_if(out.begin(), out.end(), [](const auto& r) { return r.fin.blown; }));
  if (blown > 0.01 * R) {
    std::ostringstream os;
    os << "monte carlo: " << blown << " of " << R
       << " replicates hit the boundedness guard; experiment invalid";
    throw ExperimentInvalidError(os.str());
  }
  return out;
}

}  // namespace

int resolve_worker_count(int hint) {
  int w = hint > 0 ? hint : static_cast<int>(std::thread::hardware_concurrency());
  if (w < 1) w = 1;
  if (const char* env = std::getenv("TTSA_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1)
      throw ConfigError("TTSA_THREADS must be a positive integer");
    w = std::min<long>(w, cap);
  }
  return w;
}

std::vector<ReplicateFinal> run_replicates(const MCConfig& mc, const BilevelProblem& prob,
                                           const NoiseModel& noise) {
  auto records = run_replicates_ex(mc, prob, noise, nullptr);
  std::vector<ReplicateFinal> finals(records.size());
  for (size_t i = 0; i < records.size(); ++i) finals[i] = std::move(records[i].fin);
  return finals;
}

void rescale_errors(const std::vector<ReplicateFinal>& finals, const SchedulePair& schedules,
                    double T, const Vec& xstar, const Vec& ystar, Mat& samples_x,
                    Mat& samples_y) {
  const double s1 = 1.0 / std::sqrt(schedules.outer.eval(T));
  const double s2 = 1.0 / std::sqrt(schedules.inner.eval(T));
  // blown replicates are excluded
  long R = std::count_if(finals.begin(), finals.end(),
                         [](const ReplicateFinal& f) { return !f.blown; });
  samples_x.resize(R, xstar.size());
  samples_y.resize(R, ystar.size());
  long r = 0;
  for (const auto& f : finals) {
    if (f.blown) continue;
    samples_x.row(r) = (s1 * (f.x - xstar)).transpose();
    samples_y.row(r) = (s2 * (f.y - ystar)).transpose();
    ++r;
  }
}

Mat empirical_cov(const Mat& samples) {
  const long R = samples.rows();
  if (R < 2) throw ArgumentError("empirical_cov: need at least 2 samples");
  Eigen::RowVectorXd mean = samples.colwise().mean();
  Mat centered = samples.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(R - 1);
}

double compare_cov(const Mat& emp, const Mat& theory) {
  if (emp.rows() != theory.rows() || emp.cols() != theory.cols())
    throw ArgumentError("compare_cov: shape mismatch");
  const double tn = theory.norm();
  if (tn == 0.0) return emp.norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (emp - theory).norm() / tn;
}

KSResult ks_normality(const Vec& samples, double variance) {
  if (!(variance > 0.0)) throw ArgumentError("ks_normality: variance must be positive");
  const long n = samples.size();
  if (n < 20) throw ArgumentError("ks_normality: need at least 20 samples");

  std::vector<double> s(samples.data(), samples.data() + n);
  std::sort(s.begin(), s.end());
  const double inv_sigma_sqrt2 = 1.0 / std::sqrt(2.0 * variance);
  double d = 0.0;
  for (long i = 0; i < n; ++i) {
    const double cdf = 0.5 * std::erfc(-s[i] * inv_sigma_sqrt2);
    d = std::max(d, cdf - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - cdf);
  }
  KSResult res;
  res.statistic = d;
  res.p_value = kolmogorov_survival(std::sqrt(static_cast<double>(n)) * d);
  return res;
}

MCReport verify_clt(const MCConfig& mc, const BilevelProblem& prob, const NoiseModel& noise) {
  Vec xstar, ystar;
  if (prob.known_optimum) {
    xstar = prob.known_optimum->first;
    ystar = prob.known_optimum->second;
  } else {
    std::tie(xstar, ystar) = solve_stationary(prob, Vec::Zero(prob.d1));
  }

  MCReport rep;
  rep.xstar = xstar;
  rep.ystar = ystar;
  rep.replicates = mc.replicates;

  CLTPrediction pred = predict(prob, noise, xstar, ystar);
  rep.theory_sigma_x = pred.Sigma_x;
  rep.theory_sigma_y = pred.Sigma_y;
  rep.degenerate_noise = pred.Sigma_x.norm() == 0.0 && pred.Sigma_y.norm() == 0.0;

  auto records = run_replicates_ex(mc, prob, noise, &xstar);
  std::vector<ReplicateFinal> finals(records.size());
  for (size_t i = 0; i < records.size(); ++i) finals[i] = records[i].fin;
  rep.excluded_blowups = static_cast<int>(
      std::count_if(finals.begin(), finals.end(), [](const auto& f) { return f.blown; }));

  Mat sx, sy;
  const double T_end = static_cast<double>(std::max<long>(1, std::llround(mc.base.T / mc.base.dt))) *
                       mc.base.dt;
  rescale_errors(finals, mc.base.schedules, T_end, xstar, ystar, sx, sy);

  rep.emp_sigma_x = empirical_cov(sx);
  rep.emp_sigma_y = empirical_cov(sy);
  Eigen::RowVectorXd mx = sx.colwise().mean();
  Eigen::RowVectorXd my = sy.colwise().mean();
  rep.mean_rescaled_x = mx.transpose();
  rep.mean_rescaled_y = my.transpose();
  rep.emp_sigma_xy = ((sx.rowwise() - mx).transpose() * (sy.rowwise() - my)) /
                     static_cast<double>(sx.rows() - 1);

  if (!rep.degenerate_noise) {
    rep.rel_err_x = compare_cov(rep.emp_sigma_x, rep.theory_sigma_x);
    rep.rel_err_y = compare_cov(rep.emp_sigma_y, rep.theory_sigma_y);
    const double denom = std::sqrt(rep.theory_sigma_x.norm() * rep.theory_sigma_y.norm());
    rep.cross_norm_ratio = denom > 0.0 ? rep.emp_sigma_xy.norm() / denom : 0.0;
  }

  const long R_kept = sx.rows();
  if (rep.degenerate_noise) {
    rep.ks_skipped = true;
    rep.ks_skip_reason = "degenerate: zero theory covariance";
  } else if (R_kept < 20) {
    rep.ks_skipped = true;
    rep.ks_skip_reason = "fewer than 20 replicates";
  } else {
    for (int j = 0; j < prob.d1; ++j) {
      const double var = rep.theory_sigma_x(j, j);
      if (var > 0.0) rep.ks_x.push_back(ks_normality(sx.col(j), var));
    }
    for (int j = 0; j < prob.d2; ++j) {
      const double var = rep.theory_sigma_y(j, j);
      if (var > 0.0) rep.ks_y.push_back(ks_normality(sy.col(j), var));
    }
    // one fixed random projection of the x block, seeded from the run seed
    GaussianStream proj_rng = GaussianStream::replicate_stream(mc.base.seed, 0x70726f6aULL);
    Vec u(prob.d1);
    proj_rng.fill_standard_normal(u);
    if (u.norm() > 0.0) {
      u.normalize();
      const double var = u.dot(rep.theory_sigma_x * u);
      if (var > 0.0) {
        Vec proj = sx * u;
        rep.ks_projection = ks_normality(proj, var);
      }
    }
  }

  // median convergence curve over surviving replicates
  if (!records.empty() && !records[0].x_err_curve.empty()) {
    const size_t n_pts = records[0].x_err_curve.size();
    rep.curve_median_x_err.resize(n_pts);
    std::vector<double> buf;
    for (size_t pt = 0; pt < n_pts; ++pt) {
      buf.clear();
      for (const auto& r : records)
        if (!r.fin.blown && pt < r.x_err_curve.size()) buf.push_back(r.x_err_curve[pt]);
      rep.curve_median_x_err[pt] = buf.empty() ? 0.0 : median_inplace(buf);
    }
    const double stride_t = mc.base.dt * static_cast<double>(mc.base.log_stride);
    rep.curve_times.resize(n_pts);
    for (size_t pt = 0; pt < n_pts; ++pt) rep.curve_times[pt] = static_cast<double>(pt) * stride_t;
  }
  return rep;
}

}  // namespace ttsa
