#include <doctest.h>

#include <json.hpp>

#include "ttsa/config.hpp"
#include "ttsa/errors.hpp"

using namespace ttsa;
using json = nlohmann::ordered_json;

namespace {

json minimal_config() {
  return json{
      {"problem", {{"name", "quadratic1d"}}},
      {"schedules",
       {{"outer", {{"gamma0", 1.0}, {"delta", 1.0}, {"eta", 0.9}}},
        {"inner", {{"gamma0", 1.0}, {"delta", 1.0}, {"eta", 0.6}}}}},
      {"noise", {{"sigma_x", 1.0}, {"sigma_y", 1.0}}},
      {"engine", {{"dt", 0.01}, {"T", 10.0}, {"seed", 42}}},
      {"mc", {{"replicates", 8}}},
      {"output_dir", "out"},
  };
}

std::string thrown_message(const json& j) {
  try {
    parse_run_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("a minimal config parses with defaults materialized") {
  RunConfig cfg = parse_run_config(minimal_config());
  CHECK(cfg.problem_name == "quadratic1d");
  CHECK(cfg.dt == 0.01);
  CHECK(cfg.T == 10.0);
  CHECK(cfg.seed == 42);
  CHECK(cfg.log_stride == 1);
  CHECK(cfg.blowup_bound == 1e6);
  CHECK(cfg.x0.size() == 1);
  CHECK(cfg.x0(0) == 1.0);  // default initial state
  CHECK(cfg.mc.replicates == 8);
  CHECK(cfg.mc.rel_tol_cov == 0.20);
  CHECK(cfg.mc.cross_tol == 0.15);
  CHECK(cfg.mc.ks_p_min == 0.01);
  CHECK(cfg.noise.sigma_x_inf(0, 0) == 1.0);
  CHECK(cfg.noise.cross_corr(0, 0) == 0.0);

  BilevelProblem prob = build_problem(cfg);
  CHECK(prob.name == "quadratic1d");
  TTSAConfig ec = engine_config(cfg, prob);
  CHECK(ec.dt == 0.01);
}

TEST_CASE("missing fields are reported by path") {
  json j = minimal_config();
  j["engine"].erase("dt");
  const std::string msg = thrown_message(j);
  CHECK(msg.find("engine.dt") != std::string::npos);

  j = minimal_config();
  j.erase("schedules");
  CHECK(thrown_message(j).find("schedules") != std::string::npos);

  j = minimal_config();
  j["schedules"]["outer"].erase("eta");
  CHECK(thrown_message(j).find("schedules.outer.eta") != std::string::npos);
}

TEST_CASE("assumption gates run at load time") {
  json j = minimal_config();
  j["schedules"]["outer"]["eta"] = 0.6;
  j["schedules"]["inner"]["eta"] = 0.9;
  CHECK(thrown_message(j).find("Assumption 1") != std::string::npos);

  j = minimal_config();
  j["schedules"]["inner"]["eta"] = 0.4;
  CHECK(thrown_message(j).find("Assumption 1") != std::string::npos);

  j = minimal_config();
  j["noise"]["bias_amp_x"] = json::array({0.5});
  j["noise"]["bias_rho"] = 0.3;
  CHECK(thrown_message(j).find("Assumption 6") != std::string::npos);

  // the boundary rho = eta1/2 itself is rejected
  j["noise"]["bias_rho"] = 0.45;
  CHECK(thrown_message(j).find("Assumption 6") != std::string::npos);
}

TEST_CASE("bias decay strictly above half the outer exponent is accepted") {
  json j = minimal_config();
  j["noise"]["bias_amp_x"] = json::array({0.5});
  j["noise"]["bias_rho"] = 0.46;
  CHECK_NOTHROW(parse_run_config(j));
}

TEST_CASE("unknown problems and malformed blocks fail with addressed messages") {
  json j = minimal_config();
  j["problem"]["name"] = "unknown_thing";
  CHECK(thrown_message(j).find("problem.name") != std::string::npos);

  j = minimal_config();
  j["noise"]["sigma_x"] = json::array({json::array({1.0, 2.0}), json::array({3.0})});
  CHECK(thrown_message(j).find("noise.sigma_x") != std::string::npos);

  j = minimal_config();
  j["engine"]["dt"] = 20.0;  // dt > T
  CHECK(thrown_message(j).find("engine.dt") != std::string::npos);

  j = minimal_config();
  j["engine"]["x0"] = json::array({1.0, 2.0});
  CHECK(thrown_message(j).find("engine.x0") != std::string::npos);
}

TEST_CASE("noise shape mismatches are rejected") {
  json j = minimal_config();
  j["noise"]["cross_corr"] = json::array({json::array({0.5, 0.5})});
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);

  j = minimal_config();
  j["noise"]["cross_corr"] = 1.5;  // outside [-1, 1]
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);
}

TEST_CASE("every built-in problem is reachable from a config") {
  json j = minimal_config();

  j["problem"] = {{"name", "maml"}, {"tasks", 3}, {"dim", 2}, {"seed", 7}, {"lambda", 1.0}};
  j["noise"] = {{"sigma_x", mat_to_json(Mat::Identity(2, 2))},
                {"sigma_y", mat_to_json(Mat::Identity(6, 6))}};
  RunConfig cfg = parse_run_config(j);
  BilevelProblem prob = build_problem(cfg);
  CHECK(prob.d1 == 2);
  CHECK(prob.d2 == 6);
  CHECK(cfg.x0.size() == 2);
  CHECK(cfg.y0.size() == 6);

  j = minimal_config();
  j["problem"] = {{"name", "langevin_toy"},
                  {"P", mat_to_json(Mat::Identity(2, 2))},
                  {"M", mat_to_json(Mat::Zero(2, 2))},
                  {"m", json::array({1.0, 2.0})}};
  j["noise"] = {{"sigma_x", mat_to_json(Mat::Identity(2, 2))},
                {"sigma_y", mat_to_json(Mat::Identity(2, 2))}};
  prob = build_problem(parse_run_config(j));
  CHECK(prob.name == "langevin_toy");

  j = minimal_config();
  j["problem"] = {{"name", "quadratic"},
                  {"P_f", 1.0},
                  {"R_f", 1.0},
                  {"P_g", 1.0},
                  {"C", 1.0},
                  {"c0", json::array({0.0})}};
  prob = build_problem(parse_run_config(j));
  CHECK(prob.name == "quadratic");
}

TEST_CASE("test fixtures are reachable from the problem block") {
  json j = minimal_config();
  j["problem"]["break_grad_coord"] = 0;
  RunConfig cfg = parse_run_config(j);
  BilevelProblem prob = build_problem(cfg);
  Vec x = Vec::Ones(1), y = Vec::Ones(1);
  CHECK(prob.eval_grad_x_f(x, y)(0) == doctest::Approx(1.0 + 1e-3));

  j = minimal_config();
  j["problem"]["use_fd_second_derivatives"] = true;
  prob = build_problem(parse_run_config(j));
  CHECK_FALSE(static_cast<bool>(prob.jac_x_corrected_grad));
}

TEST_CASE("resolved config echo is complete and stable") {
  RunConfig cfg = parse_run_config(minimal_config());
  BilevelProblem prob = build_problem(cfg);
  json a = resolved_config_json(cfg, prob);
  json b = resolved_config_json(cfg, prob);
  CHECK(a.dump() == b.dump());
  CHECK(a.contains("engine"));
  CHECK(a["engine"].contains("blowup_bound"));
  CHECK(a["dimensions"]["d1"] == 1);
}
