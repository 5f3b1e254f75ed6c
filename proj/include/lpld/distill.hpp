#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpld/detector.hpp"
#include "lpld/featmap.hpp"
#include "lpld/mining.hpp"

namespace lpld {

enum class LplLossKind { kl, ce, ce_reg };

LplLossKind lpl_loss_kind_from_string(const std::string& s);
std::string to_string(LplLossKind k);

struct TrainConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  double ema_rate = 0.75;
  int epochs = 10;
  int pretrain_epochs = 20;
  double init_scale = 0.01;
  bool use_hpl = true;
  bool use_lpl = true;
  bool use_adaptive_weights = true;
  bool ema_per_iteration = false;  // default: teacher updated once per epoch
  LplLossKind lpl_loss_kind = LplLossKind::kl;

  void validate() const;
};

// Per-label weight: cosine distance between the student's pooled feature on
// the strongly augmented map and the teacher's on the weakly augmented map.
std::vector<double> adaptive_weights(const FeatureMap& student_map, const FeatureMap& teacher_map,
                                     const std::vector<LowConfLabel>& lpl, int pooled_size);

// Distillation loss over the mined low-confidence labels, averaged over the
// label count. The student is scored on fm at each LPL box; the kl variant
// matches the student's amplified foreground distribution to the stored one,
// ce treats the stored argmax as a hard label over the full softmax, and
// ce_reg adds a box-regression term anchoring the prediction to the LPL box.
// weights, when non-empty, must have one entry per label.
LossResult lpld_loss(const DetectorParams& params, const FeatureMap& fm,
                     const std::vector<LowConfLabel>& lpl, const std::vector<double>& weights,
                     LplLossKind kind, const DetectorConfig& cfg);

struct TotalLoss {
  double loss = 0.0;
  double loss_mt = 0.0;
  double loss_lpld = 0.0;
  std::vector<double> grads;
};

// Combined objective on one scene: mean-teacher detection loss on the HPL
// plus the distillation loss, honoring the use_hpl / use_lpl toggles.
TotalLoss total_loss(const DetectorParams& params, const FeatureMap& fm,
                     const std::vector<BoxLabel>& hpl, const std::vector<LowConfLabel>& lpl,
                     const std::vector<double>& weights, const TrainConfig& tcfg,
                     const DetectorConfig& dcfg);

struct SgdState {
  std::vector<double> velocity;

  void reset(size_t n) { velocity.assign(n, 0.0); }
};

// Momentum SGD with decoupled-from-nothing classic L2: v <- m v + (g + wd p),
// p <- p - lr v.
void sgd_step(DetectorParams& params, const std::vector<double>& grads, SgdState& state,
              const TrainConfig& cfg);

// teacher <- m * teacher + (1 - m) * student.
void ema_update(DetectorParams& teacher, const DetectorParams& student, double m);

}  // namespace lpld
