#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpld/detector.hpp"
#include "lpld/distill.hpp"
#include "lpld/mining.hpp"
#include "lpld/simdata.hpp"

#include "json.hpp"

namespace lpld {

struct TrainState {
  DetectorParams teacher;
  DetectorParams student;
  SgdState opt;
  int epoch = 0;
};

struct SceneLogRecord {
  int epoch = 0;
  int64_t scene_id = -1;
  int n_hpl = 0;
  int n_lpl = 0;
  double loss_mt = 0.0;
  double loss_lpld = 0.0;
  double mean_alpha = 0.0;

  nlohmann::ordered_json to_json() const;
};

// One adaptation epoch over the target-train scenes, per-sample order:
// weak/strong views of the scene, teacher forward on the weak view, HPL
// extraction, LPL mining over the full proposal set, mean-teacher loss on
// the strong view against the HPL, adaptive weights from both pooled
// features, distillation loss, one SGD step per scene. The teacher moves
// only by EMA — once after the scene loop by default, per iteration when
// cfg.ema_per_iteration is set. Scene visit order is a seeded shuffle.
std::vector<SceneLogRecord> adapt_epoch(TrainState& state, const std::vector<Scene>& scenes,
                                        const MiningConfig& mcfg, const TrainConfig& tcfg,
                                        const DetectorConfig& dcfg, const AugmentConfig& acfg,
                                        uint64_t seed);

// Supervised pass over source scenes with ground-truth boxes (weak view
// only). Returns per-scene log records with the detection loss in loss_mt.
std::vector<SceneLogRecord> pretrain_epoch(DetectorParams& params, SgdState& opt, int epoch,
                                           const std::vector<Scene>& scenes,
                                           const TrainConfig& tcfg, const DetectorConfig& dcfg,
                                           const AugmentConfig& acfg, uint64_t seed);

nlohmann::ordered_json checkpoint_to_json(const TrainState& state);
TrainState checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

}  // namespace lpld
