#include "ttsa/commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "ttsa/clt.hpp"
#include "ttsa/errors.hpp"
#include "ttsa/hypergradient.hpp"
#include "ttsa/mc.hpp"
#include "ttsa/problems.hpp"
#include "ttsa/rng.hpp"
#include "ttsa/version.hpp"

namespace ttsa {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016" PRIx64, v);
  return buf;
}

// %.17g: lossless decimal round-trip for doubles
std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

RunConfig load_with_overrides(const CliOptions& opts) {
  RunConfig cfg = load_run_config(opts.config_path);
  if (opts.out_dir) cfg.output_dir = *opts.out_dir;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.replicates) cfg.mc.replicates = *opts.replicates;
  return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("output_dir '" + cfg.output_dir + "': " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.close();
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

std::pair<Vec, Vec> problem_optimum(const BilevelProblem& prob) {
  if (prob.known_optimum) return *prob.known_optimum;
  return solve_stationary(prob, Vec::Zero(prob.d1));
}

int guarded(const char* name, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << name << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const ExperimentInvalidError& e) {
    std::cerr << name << ": " << e.what() << "\n";
    return kExitInvalidExperiment;
  } catch (const BlowupError& e) {
    std::cerr << name << ": " << e.what() << "\n";
    return kExitBlowup;
  } catch (const Error& e) {
    // singular / non-Hurwitz / non-convergence / accuracy / argument
    std::cerr << name << ": " << e.what() << "\n";
    return kExitMath;
  } catch (const std::exception& e) {
    std::cerr << name << ": unexpected error: " << e.what() << "\n";
    return kExitMath;
  }
}

json ks_to_json(const KSResult& ks) {
  return json{{"statistic", ks.statistic}, {"p_value", ks.p_value}};
}

}  // namespace

int cmd_predict(const CliOptions& opts) {
  return guarded("predict", [&]() {
    RunConfig cfg = load_with_overrides(opts);
    BilevelProblem prob = build_problem(cfg);
    auto [xstar, ystar] = problem_optimum(prob);
    CLTPrediction pred = predict(prob, cfg.noise, xstar, ystar);

    json j;
    j["problem"] = cfg.problem_name;
    j["optimum"] = {{"x", vec_to_json(xstar)}, {"y", vec_to_json(ystar)}};
    j["linearization"] = {{"A11", mat_to_json(pred.lin.A11)},
                          {"A12", mat_to_json(pred.lin.A12)},
                          {"A21", mat_to_json(pred.lin.A21)},
                          {"A22", mat_to_json(pred.lin.A22)},
                          {"H", mat_to_json(pred.lin.H)}};
    j["hurwitz_margins"] = {{"H", pred.hurwitz_H}, {"A22", pred.hurwitz_A22}};
    j["noise_limits"] = {{"Gamma11", mat_to_json(pred.gamma.G11)},
                         {"Gamma22", mat_to_json(pred.gamma.G22)},
                         {"Gamma12", mat_to_json(pred.gamma.G12)}};
    j["Qx"] = mat_to_json(pred.Qx);
    j["Sigma_x"] = mat_to_json(pred.Sigma_x);
    j["Sigma_y"] = mat_to_json(pred.Sigma_y);
    j["lyapunov_residuals"] = {{"x", pred.residual_x}, {"y", pred.residual_y}};

    fs::path dir = prepare_out_dir(cfg);
    write_file(dir / "predict.json", dump_json(j));
    std::cout << "predict: wrote " << (dir / "predict.json").string() << "\n";
    return kExitOk;
  });
}

int cmd_run(const CliOptions& opts) {
  return guarded("run", [&]() {
    RunConfig cfg = load_with_overrides(opts);
    BilevelProblem prob = build_problem(cfg);
    TTSAConfig ec = engine_config(cfg, prob);
    Trajectory traj = integrate(ec, prob, cfg.noise);

    std::ostringstream csv;
    csv << "t";
    for (int i = 0; i < prob.d1; ++i) csv << ",x_" << i;
    for (int i = 0; i < prob.d2; ++i) csv << ",y_" << i;
    csv << ",gamma1,gamma2\n";
    for (size_t k = 0; k < traj.times.size(); ++k) {
      csv << fmt17(traj.times[k]);
      for (int i = 0; i < prob.d1; ++i) csv << ',' << fmt17(traj.xs[k](i));
      for (int i = 0; i < prob.d2; ++i) csv << ',' << fmt17(traj.ys[k](i));
      csv << ',' << fmt17(traj.gamma1[k]) << ',' << fmt17(traj.gamma2[k]) << '\n';
    }
    const std::string csv_text = csv.str();

    fs::path dir = prepare_out_dir(cfg);
    write_file(dir / "trajectory.csv", csv_text);

    json manifest;
    manifest["tool"] = "ttsa";
    manifest["version"] = kVersion;
    manifest["command"] = "run";
    manifest["config"] = resolved_config_json(cfg, prob);
    manifest["outputs"] = {{"trajectory.csv",
                            {{"bytes", csv_text.size()},
                             {"fnv1a64", hex64(fnv1a64(csv_text))}}}};
    manifest["terminated_early"] = traj.terminated_early;
    manifest["reason"] = traj.reason;
    manifest["steps_taken"] = traj.steps_taken;
    manifest["final_time"] = traj.final_time;
    write_file(dir / "manifest.json", dump_json(manifest));

    std::cout << "run: wrote " << (dir / "trajectory.csv").string() << " ("
              << traj.times.size() << " rows)";
    if (traj.terminated_early) std::cout << " [terminated early: " << traj.reason << "]";
    std::cout << "\n";
    return traj.terminated_early ? kExitBlowup : kExitOk;
  });
}

int cmd_mc(const CliOptions& opts) {
  return guarded("mc", [&]() {
    RunConfig cfg = load_with_overrides(opts);
    BilevelProblem prob = build_problem(cfg);

    MCConfig mcc;
    mcc.replicates = cfg.mc.replicates;
    mcc.workers = cfg.mc.workers;
    mcc.base = engine_config(cfg, prob);
    MCReport rep = verify_clt(mcc, prob, cfg.noise);

    double min_ks_p = std::numeric_limits<double>::infinity();
    for (const auto& ks : rep.ks_x) min_ks_p = std::min(min_ks_p, ks.p_value);
    for (const auto& ks : rep.ks_y) min_ks_p = std::min(min_ks_p, ks.p_value);
    if (rep.ks_projection) min_ks_p = std::min(min_ks_p, rep.ks_projection->p_value);
    const bool have_ks = !rep.ks_skipped && (!rep.ks_x.empty() || !rep.ks_y.empty());

    const bool cov_x_ok = rep.degenerate_noise || rep.rel_err_x <= cfg.mc.rel_tol_cov;
    const bool cov_y_ok = rep.degenerate_noise || rep.rel_err_y <= cfg.mc.rel_tol_cov;
    const bool cross_ok = rep.degenerate_noise || rep.cross_norm_ratio <= cfg.mc.cross_tol;
    const bool ks_ok = !have_ks || min_ks_p >= cfg.mc.ks_p_min;
    const bool pass = cov_x_ok && cov_y_ok && cross_ok && ks_ok;

    json j;
    j["replicates"] = rep.replicates;
    j["excluded_blowups"] = rep.excluded_blowups;
    j["degenerate_noise"] = rep.degenerate_noise;
    j["optimum"] = {{"x", vec_to_json(rep.xstar)}, {"y", vec_to_json(rep.ystar)}};
    j["theory"] = {{"Sigma_x", mat_to_json(rep.theory_sigma_x)},
                   {"Sigma_y", mat_to_json(rep.theory_sigma_y)}};
    j["empirical"] = {{"Sigma_x", mat_to_json(rep.emp_sigma_x)},
                      {"Sigma_y", mat_to_json(rep.emp_sigma_y)},
                      {"Sigma_xy", mat_to_json(rep.emp_sigma_xy)}};
    j["rel_err_x"] = rep.rel_err_x;
    j["rel_err_y"] = rep.rel_err_y;
    j["cross_norm_ratio"] = rep.cross_norm_ratio;
    j["mean_rescaled_x"] = vec_to_json(rep.mean_rescaled_x);
    j["mean_rescaled_y"] = vec_to_json(rep.mean_rescaled_y);
    json ks;
    ks["skipped"] = rep.ks_skipped;
    ks["skip_reason"] = rep.ks_skip_reason;
    ks["x"] = json::array();
    for (const auto& k : rep.ks_x) ks["x"].push_back(ks_to_json(k));
    ks["y"] = json::array();
    for (const auto& k : rep.ks_y) ks["y"].push_back(ks_to_json(k));
    ks["projection"] = rep.ks_projection ? ks_to_json(*rep.ks_projection) : json(nullptr);
    j["ks"] = std::move(ks);
    j["convergence_curve"] = {{"t", rep.curve_times},
                              {"median_x_err", rep.curve_median_x_err}};
    j["tolerances"] = {{"rel_tol_cov", cfg.mc.rel_tol_cov},
                       {"cross_tol", cfg.mc.cross_tol},
                       {"ks_p_min", cfg.mc.ks_p_min}};
    j["checks"] = {{"cov_x", cov_x_ok}, {"cov_y", cov_y_ok}, {"cross", cross_ok}, {"ks", ks_ok}};
    j["pass"] = pass;

    std::ostringstream sum;
    sum << "monte carlo report: problem=" << cfg.problem_name << " R=" << rep.replicates
        << " excluded_blowups=" << rep.excluded_blowups << "\n";
    if (rep.degenerate_noise) {
      sum << "  degenerate noise: covariance comparison skipped\n";
    } else {
      sum << "  rel_err Sigma_x = " << fmt17(rep.rel_err_x) << " (tol "
          << cfg.mc.rel_tol_cov << ") " << (cov_x_ok ? "ok" : "FAIL") << "\n";
      sum << "  rel_err Sigma_y = " << fmt17(rep.rel_err_y) << " (tol "
          << cfg.mc.rel_tol_cov << ") " << (cov_y_ok ? "ok" : "FAIL") << "\n";
      sum << "  cross-block ratio = " << fmt17(rep.cross_norm_ratio) << " (tol "
          << cfg.mc.cross_tol << ") " << (cross_ok ? "ok" : "FAIL") << "\n";
    }
    if (rep.ks_skipped) {
      sum << "  KS skipped: " << rep.ks_skip_reason << "\n";
    } else {
      sum << "  KS min p-value = " << fmt17(have_ks ? min_ks_p : 1.0) << " (min "
          << cfg.mc.ks_p_min << ") " << (ks_ok ? "ok" : "FAIL") << "\n";
    }
    sum << "  pass = " << (pass ? "true" : "false") << "\n";

    fs::path dir = prepare_out_dir(cfg);
    write_file(dir / "mc_report.json", dump_json(j));
    write_file(dir / "summary.txt", sum.str());
    std::cout << sum.str();
    return kExitOk;
  });
}

int cmd_check_grad(const CliOptions& opts) {
  return guarded("check-grad", [&]() {
    RunConfig cfg = load_with_overrides(opts);
    BilevelProblem prob = build_problem(cfg);
    auto [xstar, ystar] = problem_optimum(prob);

    constexpr int kPoints = 20;
    constexpr double kTol = 1e-4;
    GaussianStream rng(cfg.seed);

    json points = json::array();
    double max_grad_err = 0.0, max_hess_err = 0.0;
    int worst_coord = -1;

    for (int k = 0; k < kPoints; ++k) {
      Vec dx(prob.d1);
      rng.fill_standard_normal(dx);
      Vec x = xstar + dx;
      Vec y = solve_inner(prob, x, 1e-12);

      Vec hg = hypergrad(prob, x, y).value;
      Vec fd = phi_grad_fd(prob, x, 1e-4, 1e-10);
      const double gerr = (hg - fd).norm() / (1.0 + fd.norm());
      int coord = 0;
      (hg - fd).cwiseAbs().maxCoeff(&coord);
      if (gerr > max_grad_err) {
        max_grad_err = gerr;
        worst_coord = coord;
      }

      // audit the curvature against differences of the corrected gradient
      // along the inner-solution path
      const double h = 1e-3 * (1.0 + x.norm());
      Mat fdh(prob.d1, prob.d1);
      Vec xp = x;
      for (int i = 0; i < prob.d1; ++i) {
        xp(i) = x(i) + h;
        Vec gp = hypergrad(prob, xp, solve_inner(prob, xp, 1e-12)).value;
        xp(i) = x(i) - h;
        Vec gm = hypergrad(prob, xp, solve_inner(prob, xp, 1e-12)).value;
        xp(i) = x(i);
        fdh.col(i) = (gp - gm) / (2.0 * h);
      }
      Mat hh = hyper_hessian(prob, x, y).value;
      const double herr = (hh - fdh).norm() / (1.0 + fdh.norm());
      max_hess_err = std::max(max_hess_err, herr);

      points.push_back({{"x", vec_to_json(x)},
                        {"grad_rel_err", gerr},
                        {"hess_rel_err", herr},
                        {"worst_coord", coord}});
    }

    const bool pass = max_grad_err <= kTol && max_hess_err <= kTol;
    json j;
    j["problem"] = cfg.problem_name;
    j["points"] = std::move(points);
    j["max_grad_rel_err"] = max_grad_err;
    j["max_hess_rel_err"] = max_hess_err;
    j["tolerance"] = kTol;
    j["pass"] = pass;
    j["worst_coord"] = worst_coord;

    fs::path dir = prepare_out_dir(cfg);
    write_file(dir / "check.json", dump_json(j));
    std::cout << "check-grad: max grad err " << fmt17(max_grad_err) << ", max hess err "
              << fmt17(max_hess_err) << " -> " << (pass ? "pass" : "FAIL (coordinate ")
              << (pass ? "" : std::to_string(worst_coord) + ")") << "\n";
    return kExitOk;
  });
}

int cmd_validate(const CliOptions& opts) {
  return guarded("validate", [&]() {
    // load_run_config re-runs every gate; reaching this point means the
    // configuration is admissible
    RunConfig cfg = load_with_overrides(opts);
    BilevelProblem prob = build_problem(cfg);

    json j;
    j["config_ok"] = true;
    j["schedules"] = {{"eta1", cfg.schedules.outer.eta()},
                      {"eta2", cfg.schedules.inner.eta()},
                      {"valid", true}};

    bool ok = true;
    if (prob.known_optimum) {
      const auto& [xs, ys] = *prob.known_optimum;
      const double inner_res = prob.eval_grad_y_g(xs, ys).norm();
      const double outer_res = hypergrad(prob, xs, ys).value.norm();
      const bool stationary = inner_res <= 1e-8 && outer_res <= 1e-8;
      ok = ok && stationary;
      j["stationarity"] = {{"inner_residual", inner_res},
                           {"outer_residual", outer_res},
                           {"ok", stationary}};
    }

    // assumption spot-check at the initial state, the optimum, and seeded
    // perturbations of both
    std::vector<std::pair<Vec, Vec>> pts;
    pts.emplace_back(cfg.x0, cfg.y0);
    if (prob.known_optimum) pts.emplace_back(prob.known_optimum->first, prob.known_optimum->second);
    GaussianStream rng(cfg.seed);
    const size_t base = pts.size();
    for (size_t b = 0; b < base; ++b) {
      for (int k = 0; k < 3; ++k) {
        Vec dx(prob.d1), dy(prob.d2);
        rng.fill_standard_normal(dx);
        rng.fill_standard_normal(dy);
        pts.emplace_back(pts[b].first + dx, pts[b].second + dy);
      }
    }
    AssumptionReport rep = check_assumptions(prob, pts, cfg.seed);
    ok = ok && rep.strong_convexity_ok && rep.symmetry_ok;
    j["assumptions"] = {{"min_eig_hess_yy", rep.min_eig_hess_yy},
                        {"mu_g_claimed", rep.mu_g_claimed},
                        {"strong_convexity_ok", rep.strong_convexity_ok},
                        {"max_symmetry_residual", rep.max_symmetry_residual},
                        {"symmetry_ok", rep.symmetry_ok},
                        {"lipschitz_estimates",
                         {{"grad_y_g", rep.lip_grad_y_g},
                          {"grad_x_f", rep.lip_grad_x_f},
                          {"grad_y_f", rep.lip_grad_y_f}}},
                        {"samples", rep.samples}};
    j["ok"] = ok;

    fs::path dir = prepare_out_dir(cfg);
    write_file(dir / "validate.json", dump_json(j));
    std::cout << "validate: " << (ok ? "ok" : "FAIL") << " (details in "
              << (dir / "validate.json").string() << ")\n";
    return ok ? kExitOk : kExitConfig;
  });
}

}  // namespace ttsa
