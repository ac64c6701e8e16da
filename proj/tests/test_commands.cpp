#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "ttsa/commands.hpp"
#include "ttsa/errors.hpp"

using namespace ttsa;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ttsa_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

json quadratic1d_config(const fs::path& out) {
  return json{
      {"problem", {{"name", "quadratic1d"}}},
      {"schedules",
       {{"outer", {{"gamma0", 1.0}, {"delta", 1.0}, {"eta", 0.9}}},
        {"inner", {{"gamma0", 1.0}, {"delta", 1.0}, {"eta", 0.6}}}}},
      {"noise", {{"sigma_x", 1.0}, {"sigma_y", 1.0}}},
      {"engine",
       {{"dt", 0.01}, {"T", 10.0}, {"seed", 7}, {"log_stride", 100}}},
      {"mc", {{"replicates", 24}}},
      {"output_dir", out.string()},
  };
}

std::string write_config(const TempDir& dir, const json& j, const char* name = "config.json") {
  fs::path p = dir.path / name;
  std::ofstream out(p);
  out << j.dump(2);
  return p.string();
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  return json::parse(in);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliOptions opts_for(const std::string& config_path) {
  CliOptions o;
  o.config_path = config_path;
  return o;
}

}  // namespace

TEST_CASE("predict writes the scalar limit covariances") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_predict(o) == kExitOk);
  json out = read_json(dir.path / "out" / "predict.json");
  CHECK(out["Sigma_x"][0][0].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out["Sigma_y"][0][0].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out["linearization"]["H"][0][0].get<double>() == doctest::Approx(-2.0));
  CHECK(out["hurwitz_margins"]["H"].get<double>() < 0.0);

  // correlated noise exercises the cross terms
  cfg["noise"]["cross_corr"] = 0.5;
  o = opts_for(write_config(dir, cfg, "config_corr.json"));
  CHECK(cmd_predict(o) == kExitOk);
  out = read_json(dir.path / "out" / "predict.json");
  CHECK(out["Sigma_x"][0][0].get<double>() == doctest::Approx(0.25).epsilon(1e-12));

  // zero noise: all blocks vanish
  cfg["noise"] = {{"sigma_x", 0.0}, {"sigma_y", 0.0}};
  o = opts_for(write_config(dir, cfg, "config_zero.json"));
  CHECK(cmd_predict(o) == kExitOk);
  out = read_json(dir.path / "out" / "predict.json");
  CHECK(out["Sigma_x"][0][0].get<double>() == 0.0);
  CHECK(out["Sigma_y"][0][0].get<double>() == 0.0);
}

TEST_CASE("invalid schedule ordering exits with the configuration code") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  cfg["schedules"]["outer"]["eta"] = 0.6;
  cfg["schedules"]["inner"]["eta"] = 0.9;
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_predict(o) == kExitConfig);
  CHECK(cmd_run(o) == kExitConfig);
  CHECK(cmd_mc(o) == kExitConfig);
}

TEST_CASE("a non-stationary claimed optimum is a math error") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  cfg["problem"]["break_grad_coord"] = 0;  // corrupts the corrected gradient
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_predict(o) == kExitMath);
}

TEST_CASE("run writes a deterministic trajectory and manifest") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  cfg["engine"]["T"] = 200.0;
  cfg["engine"]["log_stride"] = 2000;
  cfg["noise"] = {{"sigma_x", 0.0}, {"sigma_y", 0.0}};
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_run(o) == kExitOk);

  const std::string csv1 = read_text(dir.path / "out" / "trajectory.csv");
  json man1 = read_json(dir.path / "out" / "manifest.json");
  CHECK(man1["terminated_early"] == false);
  CHECK(man1["outputs"]["trajectory.csv"]["bytes"].get<size_t>() == csv1.size());

  // header and terminal contraction
  std::istringstream lines(csv1);
  std::string header, row, last;
  std::getline(lines, header);
  CHECK(header == "t,x_0,y_0,gamma1,gamma2");
  while (std::getline(lines, row))
    if (!row.empty()) last = row;
  std::istringstream cells(last);
  std::string cell;
  std::getline(cells, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(200.0));
  std::getline(cells, cell, ',');
  CHECK(std::abs(std::stod(cell)) <= 1e-3);

  // rerun: byte-identical payload, equal hash
  CHECK(cmd_run(o) == kExitOk);
  CHECK(read_text(dir.path / "out" / "trajectory.csv") == csv1);
  json man2 = read_json(dir.path / "out" / "manifest.json");
  CHECK(man1["outputs"]["trajectory.csv"]["fnv1a64"] ==
        man2["outputs"]["trajectory.csv"]["fnv1a64"]);
  CHECK(man1.dump() == man2.dump());
}

TEST_CASE("run exits 4 on blowup but still writes the flagged outputs") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  cfg["engine"]["blowup_bound"] = 1e-9;
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_run(o) == kExitBlowup);
  CHECK(fs::exists(dir.path / "out" / "trajectory.csv"));
  json man = read_json(dir.path / "out" / "manifest.json");
  CHECK(man["terminated_early"] == true);
  CHECK(man["reason"] == "blowup_bound_exceeded");
}

TEST_CASE("dt greater than T is a configuration error") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  cfg["engine"]["dt"] = 20.0;
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_run(o) == kExitConfig);
}

TEST_CASE("mc writes a report and a summary with KS gating") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  cfg["engine"]["T"] = 50.0;
  cfg["engine"]["log_stride"] = 1000;
  cfg["mc"]["replicates"] = 50;
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_mc(o) == kExitOk);
  json rep = read_json(dir.path / "out" / "mc_report.json");
  CHECK(rep["replicates"] == 50);
  CHECK(rep["ks"]["skipped"] == false);
  CHECK(rep["ks"]["x"].size() == 1);
  CHECK(rep.contains("pass"));
  CHECK(fs::exists(dir.path / "out" / "summary.txt"));

  // two replicates: report produced, KS skipped with a reason
  cfg["mc"]["replicates"] = 2;
  o = opts_for(write_config(dir, cfg, "config_r2.json"));
  CHECK(cmd_mc(o) == kExitOk);
  rep = read_json(dir.path / "out" / "mc_report.json");
  CHECK(rep["ks"]["skipped"] == true);

  // replicate override from the CLI layer
  o = opts_for(write_config(dir, cfg, "config_r2b.json"));
  o.replicates = 1;
  CHECK(cmd_mc(o) == kExitConfig);
}

TEST_CASE("mc is byte-deterministic and thread-count independent") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  cfg["engine"]["T"] = 20.0;
  cfg["engine"]["log_stride"] = 500;
  cfg["mc"]["replicates"] = 16;
  CliOptions o = opts_for(write_config(dir, cfg));

  setenv("TTSA_THREADS", "1", 1);
  CHECK(cmd_mc(o) == kExitOk);
  const std::string rep1 = read_text(dir.path / "out" / "mc_report.json");
  const std::string sum1 = read_text(dir.path / "out" / "summary.txt");

  setenv("TTSA_THREADS", "3", 1);
  CHECK(cmd_mc(o) == kExitOk);
  unsetenv("TTSA_THREADS");
  CHECK(read_text(dir.path / "out" / "mc_report.json") == rep1);
  CHECK(read_text(dir.path / "out" / "summary.txt") == sum1);
}

TEST_CASE("mc exits 5 when the experiment is invalid") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  cfg["engine"]["blowup_bound"] = 1e-9;
  cfg["mc"]["replicates"] = 10;
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_mc(o) == kExitInvalidExperiment);
}

TEST_CASE("check-grad passes on built-ins and flags the broken fixture") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_check_grad(o) == kExitOk);
  json chk = read_json(dir.path / "out" / "check.json");
  CHECK(chk["pass"] == true);
  CHECK(chk["max_grad_rel_err"].get<double>() <= 1e-5);

  json maml = cfg;
  maml["problem"] = {{"name", "maml"}, {"tasks", 3}, {"dim", 2}, {"seed", 7}, {"lambda", 1.0}};
  maml["noise"] = {{"sigma_x", mat_to_json(Mat::Identity(2, 2))},
                   {"sigma_y", mat_to_json(Mat::Identity(6, 6))}};
  o = opts_for(write_config(dir, maml, "maml.json"));
  CHECK(cmd_check_grad(o) == kExitOk);
  chk = read_json(dir.path / "out" / "check.json");
  CHECK(chk["pass"] == true);
  CHECK(chk["max_grad_rel_err"].get<double>() <= 1e-5);

  json broken = cfg;
  broken["problem"]["break_grad_coord"] = 0;
  o = opts_for(write_config(dir, broken, "broken.json"));
  CHECK(cmd_check_grad(o) == kExitOk);
  chk = read_json(dir.path / "out" / "check.json");
  CHECK(chk["pass"] == false);
  CHECK(chk["worst_coord"] == 0);
}

TEST_CASE("validate accepts the canonical config and reports evidence") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "out");
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_validate(o) == kExitOk);
  json v = read_json(dir.path / "out" / "validate.json");
  CHECK(v["ok"] == true);
  CHECK(v["stationarity"]["ok"] == true);
  CHECK(v["assumptions"]["strong_convexity_ok"] == true);
}

TEST_CASE("outputs land in a freshly created nested directory") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "deep" / "nested" / "out");
  CliOptions o = opts_for(write_config(dir, cfg));
  CHECK(cmd_predict(o) == kExitOk);
  CHECK(fs::exists(dir.path / "deep" / "nested" / "out" / "predict.json"));
}

TEST_CASE("the out-dir override wins over the config") {
  TempDir dir;
  json cfg = quadratic1d_config(dir.path / "ignored");
  CliOptions o = opts_for(write_config(dir, cfg));
  o.out_dir = (dir.path / "chosen").string();
  CHECK(cmd_predict(o) == kExitOk);
  CHECK(fs::exists(dir.path / "chosen" / "predict.json"));
  CHECK_FALSE(fs::exists(dir.path / "ignored" / "predict.json"));
}

TEST_CASE("missing config file is a configuration error") {
  CliOptions o = opts_for("/nonexistent/definitely_missing.json");
  CHECK(cmd_predict(o) == kExitConfig);
}
