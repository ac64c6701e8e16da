#include <CLI11.hpp>

#include "ttsa/commands.hpp"
#include "ttsa/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ttsa: two-timescale stochastic approximation for bilevel problems"};
  app.set_version_flag("--version", ttsa::kVersion);
  app.require_subcommand(1);

  ttsa::CliOptions opts;
  std::string out_dir;
  std::uint64_t seed = 0;
  int replicates = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opts.config_path, "path to the JSON run configuration")
        ->required();
    cmd->add_option("--out", out_dir, "output directory (overrides output_dir)");
    cmd->add_option("--seed", seed, "seed override");
    cmd->add_option("--replicates", replicates, "replicate-count override");
  };

  CLI::App* predict = app.add_subcommand("predict", "limit covariances of the rescaled errors");
  CLI::App* run = app.add_subcommand("run", "integrate a single trajectory");
  CLI::App* mc = app.add_subcommand("mc", "replicated run with distribution checks");
  CLI::App* check_grad =
      app.add_subcommand("check-grad", "corrected gradient vs finite differences");
  CLI::App* validate = app.add_subcommand("validate", "configuration and assumption gates");
  for (CLI::App* cmd : {predict, run, mc, check_grad, validate}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // usage problems are configuration errors
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ttsa::kExitConfig;
  }

  for (CLI::App* cmd : {predict, run, mc, check_grad, validate}) {
    if (!cmd->parsed()) continue;
    if (cmd->count("--out")) opts.out_dir = out_dir;
    if (cmd->count("--seed")) opts.seed = seed;
    if (cmd->count("--replicates")) opts.replicates = replicates;
  }

  if (predict->parsed()) return ttsa::cmd_predict(opts);
  if (run->parsed()) return ttsa::cmd_run(opts);
  if (mc->parsed()) return ttsa::cmd_mc(opts);
  if (check_grad->parsed()) return ttsa::cmd_check_grad(opts);
  if (validate->parsed()) return ttsa::cmd_validate(opts);
  return ttsa::kExitConfig;
}
