#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lpld/runconfig.hpp"

namespace lpld {

// Parsed command-line options shared by all subcommands. Empty strings mean
// "not given"; command handlers fill in defaults from the run config.
struct CliOptions {
  std::string config;
  std::string manifest;
  std::string checkpoint;
  std::string out;
  std::string dump;  // mine only: output file, defaulted to <out_dir>/mine_<id>.json
  std::string split = "target_eval";
  int64_t scene_id = -1;
  std::optional<uint64_t> seed;
  std::optional<bool> use_hpl;
  std::optional<bool> use_lpl;
  std::optional<bool> use_adaptive_weights;
  std::optional<std::string> lpl_loss_kind;
};

// Each command returns a process exit code:
//   0 success, 2 config error, 3 missing input, 4 internal invariant
//   violation. Diagnostics go to stderr.
int cmd_gen(const CliOptions& opts);
int cmd_pretrain(const CliOptions& opts);
int cmd_adapt(const CliOptions& opts);
int cmd_eval(const CliOptions& opts);
int cmd_mine(const CliOptions& opts);
int cmd_report(const CliOptions& opts);

// Config loading plus CLI overrides (seed, out dir, ablation toggles).
RunConfig effective_config(const CliOptions& opts);

}  // namespace lpld
