#pragma once

#include <vector>

#include "lpld/box.hpp"
#include "lpld/detector.hpp"
#include "lpld/scores.hpp"

namespace lpld {

struct MiningConfig {
  double delta_hc = 0.7;       // HPL confidence threshold
  double delta_iou = 0.4;      // HPL overlap exclusion threshold
  double delta_bg = 0.99;      // background confidence cutoff
  double delta_lc = 0.9;       // LPL amplified-confidence threshold
  double nms_iou = 0.5;
  double pre_nms_score = 0.05;
  bool classwise_nms = true;

  void validate() const;
};

// Post-NMS detection above delta_hc, used as a hard label.
struct HighConfLabel {
  Box box;
  ScoreVector scores;  // original full score vector
  int class_id = 0;    // foreground argmax

  BoxLabel as_box_label() const { return {box, class_id}; }
};

// Pre-NMS proposal disjoint from HPL, background-filtered, with its
// amplified foreground distribution.
struct LowConfLabel {
  Box box;
  ForegroundDist amp;
  int source_index = -1;  // position in the originating proposal list
};

// Survivors of each mining stage, for diagnostics and for the LPL set
// itself. Indices refer to the originating proposal list.
struct MiningStages {
  std::vector<int> after_iou;  // stage 1: disjoint from every HPL
  std::vector<int> after_bg;   // stage 2: background score below delta_bg
  std::vector<LowConfLabel> lpl;
};

// HPL extraction: per-proposal foreground renormalized scoring, score
// filtering, NMS (class-wise by default), then the delta_hc threshold.
// Output keeps the original full score vector and is ordered by source
// proposal index.
std::vector<HighConfLabel> extract_hpl(const ProposalSet& props, const MiningConfig& cfg);

// Three-stage LPL mining over the full pre-NMS proposal set. Stage 1 keeps
// proposals whose IoU with every HPL box is below delta_iou (zero-overlap
// proposals always pass, so delta_iou = 0 selects the fully disjoint set).
// Stage 2 keeps raw background probability below delta_bg. Stage 3
// amplifies and keeps max above delta_lc. Original proposal order.
MiningStages mine_lpl_stages(const ProposalSet& props, const std::vector<HighConfLabel>& hpl,
                             const MiningConfig& cfg);

std::vector<LowConfLabel> mine_lpl(const ProposalSet& props, const std::vector<HighConfLabel>& hpl,
                                   const MiningConfig& cfg);

}  // namespace lpld
