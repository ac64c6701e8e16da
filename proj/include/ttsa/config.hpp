#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ttsa/mc.hpp"
#include "ttsa/noise.hpp"
#include "ttsa/problem.hpp"
#include "ttsa/schedule.hpp"
#include "ttsa/sde.hpp"

namespace ttsa {

// Monte Carlo block: replicate count plus the pass/fail tolerances the mc
// command reports against.
struct MCParams {
  int replicates = 0;
  int workers = 0;
  double rel_tol_cov = 0.20;
  double cross_tol = 0.15;
  double ks_p_min = 0.01;
};

// One fully-resolved run configuration. Parsing is strict: unknown problem
// names, malformed blocks, and assumption-gate violations (schedule ranges,
// bias decay) all throw ConfigError with a field-addressed message before
// anything runs.
struct RunConfig {
  std::string problem_name;
  nlohmann::ordered_json problem_params;  // raw block, echoed into manifests
  int break_grad_coord = -1;              // test fixture: perturb grad_x_f
  bool use_fd_second_derivatives = false;

  SchedulePair schedules;
  NoiseModel noise;

  double dt = 0.0;
  double T = 0.0;
  std::uint64_t seed = 0;
  long log_stride = 1;
  double blowup_bound = 1e6;
  Vec x0;  // defaults to ones
  Vec y0;

  MCParams mc;
  std::string output_dir = "out";
};

RunConfig parse_run_config(const nlohmann::ordered_json& j);
RunConfig load_run_config(const std::string& path);

// Instantiates the configured problem (including test fixtures).
BilevelProblem build_problem(const RunConfig& cfg);

// Engine slice of the config for the given problem (fills default x0/y0).
TTSAConfig engine_config(const RunConfig& cfg, const BilevelProblem& prob);

// Deterministic echo of the fully-resolved configuration, with every default
// materialized; embedded in manifests.
nlohmann::ordered_json resolved_config_json(const RunConfig& cfg, const BilevelProblem& prob);

// json <-> Eigen helpers (row-major nested arrays; scalars accepted for 1x1)
Mat json_to_mat(const nlohmann::ordered_json& j, const std::string& field);
Vec json_to_vec(const nlohmann::ordered_json& j, const std::string& field);
nlohmann::ordered_json mat_to_json(const Mat& m);
nlohmann::ordered_json vec_to_json(const Vec& v);

}  // namespace ttsa
