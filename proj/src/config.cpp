#include "ttsa/config.hpp"

#include <fstream>

#include "ttsa/errors.hpp"
#include "ttsa/problems.hpp"

namespace ttsa {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ConfigError("config: field '" + field + "': " + why);
}

const json& require(const json& j, const std::string& parent, const char* key) {
  if (!j.is_object()) fail(parent, "must be an object");
  auto it = j.find(key);
  if (it == j.end()) fail(parent.empty() ? key : parent + "." + key, "missing");
  return *it;
}

double as_double(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "must be a number");
  return j.get<double>();
}

long as_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) fail(field, "must be an integer");
  return j.get<long>();
}

std::uint64_t as_u64(const json& j, const std::string& field) {
  if (!j.is_number_unsigned() && !j.is_number_integer()) fail(field, "must be an integer");
  if (j.is_number_integer() && j.get<long long>() < 0) fail(field, "must be non-negative");
  return j.get<std::uint64_t>();
}

double get_double(const json& obj, const std::string& parent, const char* key, double dflt) {
  if (!obj.is_object() || !obj.contains(key)) return dflt;
  return as_double(obj.at(key), parent + "." + key);
}

}  // namespace

Mat json_to_mat(const json& j, const std::string& field) {
  if (j.is_number()) {
    Mat m(1, 1);
    m(0, 0) = j.get<double>();
    return m;
  }
  if (!j.is_array() || j.empty()) fail(field, "must be a non-empty nested array");
  const size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) fail(field, "must be a nested array of rows");
  const size_t cols = j[0].size();
  Mat m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) fail(field, "ragged rows");
    for (size_t c = 0; c < cols; ++c)
      m(r, c) = as_double(j[r][c], field);
  }
  return m;
}

Vec json_to_vec(const json& j, const std::string& field) {
  if (j.is_number()) {
    Vec v(1);
    v(0) = j.get<double>();
    return v;
  }
  if (!j.is_array() || j.empty()) fail(field, "must be a non-empty array");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = as_double(j[i], field);
  return v;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

namespace {

LearningRateSchedule parse_schedule(const json& j, const std::string& field) {
  const double gamma0 = as_double(require(j, field, "gamma0"), field + ".gamma0");
  const double delta = as_double(require(j, field, "delta"), field + ".delta");
  const double eta = as_double(require(j, field, "eta"), field + ".eta");
  try {
    return LearningRateSchedule(gamma0, delta, eta);
  } catch (const ArgumentError& e) {
    fail(field, e.what());
  }
}

std::pair<int, int> problem_dims(const RunConfig& cfg) {
  BilevelProblem p = build_problem(cfg);
  return {p.d1, p.d2};
}

}  // namespace

BilevelProblem build_problem(const RunConfig& cfg) {
  const json& pp = cfg.problem_params;
  BilevelProblem prob;
  if (cfg.problem_name == "quadratic1d") {
    prob = make_quadratic_1d();
  } else if (cfg.problem_name == "quadratic") {
    QuadraticParams q;
    q.P_f = json_to_mat(require(pp, "problem", "P_f"), "problem.P_f");
    q.R_f = json_to_mat(require(pp, "problem", "R_f"), "problem.R_f");
    q.P_g = json_to_mat(require(pp, "problem", "P_g"), "problem.P_g");
    q.C = json_to_mat(require(pp, "problem", "C"), "problem.C");
    q.c0 = json_to_vec(require(pp, "problem", "c0"), "problem.c0");
    try {
      prob = make_quadratic(q);
    } catch (const ArgumentError& e) {
      fail("problem", e.what());
    }
  } else if (cfg.problem_name == "maml") {
    const long tasks = as_int(require(pp, "problem", "tasks"), "problem.tasks");
    const long dim = as_int(require(pp, "problem", "dim"), "problem.dim");
    const std::uint64_t seed = as_u64(require(pp, "problem", "seed"), "problem.seed");
    const double lambda = as_double(require(pp, "problem", "lambda"), "problem.lambda");
    try {
      prob = make_maml(static_cast<int>(tasks), static_cast<int>(dim), seed, lambda);
    } catch (const ArgumentError& e) {
      fail("problem", e.what());
    }
  } else if (cfg.problem_name == "langevin_toy") {
    LangevinToyParams lt;
    lt.P = json_to_mat(require(pp, "problem", "P"), "problem.P");
    lt.M = json_to_mat(require(pp, "problem", "M"), "problem.M");
    lt.m = json_to_vec(require(pp, "problem", "m"), "problem.m");
    try {
      prob = make_langevin_toy(lt);
    } catch (const ArgumentError& e) {
      fail("problem", e.what());
    }
  } else {
    fail("problem.name", "unknown problem '" + cfg.problem_name +
                             "' (expected quadratic1d, quadratic, maml, langevin_toy)");
  }

  if (cfg.use_fd_second_derivatives) {
    prob.jac_x_corrected_grad = nullptr;
    prob.jac_y_corrected_grad = nullptr;
  }
  if (cfg.break_grad_coord >= 0) prob = with_broken_gradient(prob, cfg.break_grad_coord);
  return prob;
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  RunConfig cfg;

  const json& prob = require(j, "", "problem");
  const json& name = require(prob, "problem", "name");
  if (!name.is_string()) fail("problem.name", "must be a string");
  cfg.problem_name = name.get<std::string>();
  cfg.problem_params = prob;
  if (prob.contains("break_grad_coord"))
    cfg.break_grad_coord =
        static_cast<int>(as_int(prob.at("break_grad_coord"), "problem.break_grad_coord"));
  if (prob.contains("use_fd_second_derivatives")) {
    if (!prob.at("use_fd_second_derivatives").is_boolean())
      fail("problem.use_fd_second_derivatives", "must be a boolean");
    cfg.use_fd_second_derivatives = prob.at("use_fd_second_derivatives").get<bool>();
  }

  const json& sched = require(j, "", "schedules");
  cfg.schedules.outer = parse_schedule(require(sched, "schedules", "outer"), "schedules.outer");
  cfg.schedules.inner = parse_schedule(require(sched, "schedules", "inner"), "schedules.inner");

  // problem dimensions drive every shape default below
  const auto [d1, d2] = problem_dims(cfg);

  cfg.noise = NoiseModel::zero(d1, d2);
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    if (!n.is_object()) fail("noise", "must be an object");
    if (n.contains("bias_amp_x")) cfg.noise.bias_x = json_to_vec(n.at("bias_amp_x"), "noise.bias_amp_x");
    if (n.contains("bias_amp_y")) cfg.noise.bias_y = json_to_vec(n.at("bias_amp_y"), "noise.bias_amp_y");
    cfg.noise.bias_rho = get_double(n, "noise", "bias_rho", 1.0);
    if (n.contains("sigma_x")) cfg.noise.sigma_x_inf = json_to_mat(n.at("sigma_x"), "noise.sigma_x");
    if (n.contains("sigma_y")) cfg.noise.sigma_y_inf = json_to_mat(n.at("sigma_y"), "noise.sigma_y");
    if (n.contains("cross_corr")) cfg.noise.cross_corr = json_to_mat(n.at("cross_corr"), "noise.cross_corr");
    if (n.contains("transient")) {
      const json& tr = n.at("transient");
      DiffusionTransient t;
      t.D_x = json_to_mat(require(tr, "noise.transient", "D_x"), "noise.transient.D_x");
      t.D_y = json_to_mat(require(tr, "noise.transient", "D_y"), "noise.transient.D_y");
      t.kappa = as_double(require(tr, "noise.transient", "kappa"), "noise.transient.kappa");
      cfg.noise.transient = std::move(t);
    }
  }

  const json& eng = require(j, "", "engine");
  cfg.dt = as_double(require(eng, "engine", "dt"), "engine.dt");
  cfg.T = as_double(require(eng, "engine", "T"), "engine.T");
  cfg.seed = as_u64(require(eng, "engine", "seed"), "engine.seed");
  if (eng.contains("log_stride")) cfg.log_stride = as_int(eng.at("log_stride"), "engine.log_stride");
  cfg.blowup_bound = get_double(eng, "engine", "blowup_bound", 1e6);
  cfg.x0 = eng.contains("x0") ? json_to_vec(eng.at("x0"), "engine.x0") : Vec::Ones(d1);
  cfg.y0 = eng.contains("y0") ? json_to_vec(eng.at("y0"), "engine.y0") : Vec::Ones(d2);

  if (j.contains("mc")) {
    const json& mc = j.at("mc");
    if (!mc.is_object()) fail("mc", "must be an object");
    if (mc.contains("replicates"))
      cfg.mc.replicates = static_cast<int>(as_int(mc.at("replicates"), "mc.replicates"));
    if (mc.contains("workers"))
      cfg.mc.workers = static_cast<int>(as_int(mc.at("workers"), "mc.workers"));
    cfg.mc.rel_tol_cov = get_double(mc, "mc", "rel_tol_cov", 0.20);
    cfg.mc.cross_tol = get_double(mc, "mc", "cross_tol", 0.15);
    cfg.mc.ks_p_min = get_double(mc, "mc", "ks_p_min", 0.01);
  }

  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) fail("output_dir", "must be a string");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }

  // re-run every module-level gate now, so bad configs never reach a solver
  const auto sv = validate_schedules(cfg.schedules);
  if (!sv.ok) throw ConfigError("config: " + sv.message);
  validate_noise(cfg.noise, d1, d2);
  validate_bias_gate(cfg.noise, cfg.schedules);
  if (!(cfg.dt > 0.0)) fail("engine.dt", "must be positive");
  if (!(cfg.T > 0.0)) fail("engine.T", "must be positive");
  if (cfg.dt > cfg.T) fail("engine.dt", "must not exceed engine.T");
  if (cfg.log_stride < 1) fail("engine.log_stride", "must be >= 1");
  if (cfg.x0.size() != d1) fail("engine.x0", "wrong dimension");
  if (cfg.y0.size() != d2) fail("engine.y0", "wrong dimension");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

TTSAConfig engine_config(const RunConfig& cfg, const BilevelProblem& prob) {
  TTSAConfig ec;
  ec.dt = cfg.dt;
  ec.T = cfg.T;
  ec.schedules = cfg.schedules;
  ec.x0 = cfg.x0;
  ec.y0 = cfg.y0;
  ec.seed = cfg.seed;
  ec.log_stride = cfg.log_stride;
  ec.blowup_bound = cfg.blowup_bound;
  (void)prob;
  return ec;
}

json resolved_config_json(const RunConfig& cfg, const BilevelProblem& prob) {
  json j;
  j["problem"] = cfg.problem_params;
  j["schedules"] = {
      {"outer",
       {{"gamma0", cfg.schedules.outer.gamma0()},
        {"delta", cfg.schedules.outer.delta()},
        {"eta", cfg.schedules.outer.eta()}}},
      {"inner",
       {{"gamma0", cfg.schedules.inner.gamma0()},
        {"delta", cfg.schedules.inner.delta()},
        {"eta", cfg.schedules.inner.eta()}}}};
  json noise;
  noise["bias_amp_x"] = vec_to_json(cfg.noise.bias_x);
  noise["bias_amp_y"] = vec_to_json(cfg.noise.bias_y);
  noise["bias_rho"] = cfg.noise.bias_rho;
  noise["sigma_x"] = mat_to_json(cfg.noise.sigma_x_inf);
  noise["sigma_y"] = mat_to_json(cfg.noise.sigma_y_inf);
  noise["cross_corr"] = mat_to_json(cfg.noise.cross_corr);
  if (cfg.noise.transient) {
    noise["transient"] = {{"D_x", mat_to_json(cfg.noise.transient->D_x)},
                          {"D_y", mat_to_json(cfg.noise.transient->D_y)},
                          {"kappa", cfg.noise.transient->kappa}};
  }
  j["noise"] = std::move(noise);
  j["engine"] = {{"dt", cfg.dt},
                 {"T", cfg.T},
                 {"seed", cfg.seed},
                 {"log_stride", cfg.log_stride},
                 {"blowup_bound", cfg.blowup_bound},
                 {"x0", vec_to_json(cfg.x0)},
                 {"y0", vec_to_json(cfg.y0)}};
  j["mc"] = {{"replicates", cfg.mc.replicates},
             {"workers", cfg.mc.workers},
             {"rel_tol_cov", cfg.mc.rel_tol_cov},
             {"cross_tol", cfg.mc.cross_tol},
             {"ks_p_min", cfg.mc.ks_p_min}};
  j["output_dir"] = cfg.output_dir;
  j["dimensions"] = {{"d1", prob.d1}, {"d2", prob.d2}};
  return j;
}

}  // namespace ttsa
