#pragma once

#include <cstdint>
#include <string>

#include "lpld/detector.hpp"
#include "lpld/distill.hpp"
#include "lpld/mining.hpp"
#include "lpld/simdata.hpp"

#include "json.hpp"

namespace lpld {

struct MetricsConfig {
  double fnr_score_threshold = 0.5;  // operating point for TP/FN counts
  int histogram_bins = 50;

  void validate() const;
};

// Everything a run needs, loadable from one JSON document. Every field has
// a default, so {} is a valid config.
struct RunConfig {
  uint64_t seed = 1;
  std::string out_dir = "runs/default";
  DatasetConfig dataset;
  DetectorConfig detector;
  MiningConfig mining;
  TrainConfig train;
  MetricsConfig metrics;

  void validate() const;
};

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

// Reads and validates a config file; an empty path yields the defaults.
// The LPLD_OUT_ROOT environment variable, when set, is prepended to
// relative out_dir values.
RunConfig load_run_config(const std::string& path);

}  // namespace lpld
