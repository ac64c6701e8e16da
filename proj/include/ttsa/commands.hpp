#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ttsa/config.hpp"

namespace ttsa {

// CLI-level option overrides; every command reads the config file and applies
// these on top.
struct CliOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
};

// Exit codes: 0 success, 2 configuration, 3 math, 4 blowup termination,
// 5 invalid experiment. Commands never throw; failures are reported on
// stderr and encoded in the return value.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMath = 3;
inline constexpr int kExitBlowup = 4;
inline constexpr int kExitInvalidExperiment = 5;

int cmd_predict(const CliOptions& opts);     // writes predict.json
int cmd_run(const CliOptions& opts);         // writes trajectory.csv + manifest.json
int cmd_mc(const CliOptions& opts);          // writes mc_report.json + summary.txt
int cmd_check_grad(const CliOptions& opts);  // writes check.json
int cmd_validate(const CliOptions& opts);    // writes validate.json

// 64-bit FNV-1a, used for the manifest's content hashes.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace ttsa
