#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lpld/detector.hpp"
#include "lpld/mining.hpp"
#include "lpld/simdata.hpp"

#include "json.hpp"

namespace lpld {

// One evaluated scene: what the detector produced and what was there.
struct SceneEval {
  std::vector<Detection> detections;
  std::vector<GroundTruthObject> objects;
};

struct ApResult {
  std::vector<double> per_class;   // AP50; classes without GT hold 0
  std::vector<int> gt_count;       // GT per class
  double map = 0.0;                // mean over classes with >= 1 GT
};

// All-point interpolated AP at IoU 0.5. Detections are matched greedily in
// descending score order to the unmatched same-class GT of highest IoU
// within their own scene.
ApResult ap50(const std::vector<SceneEval>& scenes, int classes, double iou_thresh = 0.5);

// Single-scene convenience overload.
ApResult ap50(const std::vector<Detection>& detections,
              const std::vector<GroundTruthObject>& gts, int classes, double iou_thresh = 0.5);

struct EvalRecord {
  std::vector<double> class_ap;   // AP50 per class
  std::vector<int> class_gt;      // GT count per class
  double map = 0.0;
  double score_threshold = 0.5;   // operating point for the counts below
  std::vector<int> class_tp, class_fp, class_fn;
  std::array<int, 3> bucket_tp{0, 0, 0};
  std::array<int, 3> bucket_fn{0, 0, 0};

  std::optional<double> class_fnr(int c) const;
  std::optional<double> bucket_fnr(int b) const;
  // Pooled FNR over a class subset (e.g. the minor classes).
  std::optional<double> group_fnr(const std::vector<int>& cls) const;
};

// Full evaluation: AP50 plus TP/FP/FN counts at the operating threshold,
// bucketed by class and by GT size bucket.
EvalRecord evaluate(const std::vector<SceneEval>& scenes, int classes,
                    double score_threshold = 0.5, double iou_thresh = 0.5);

struct HistogramGrid {
  int bins = 50;
  std::vector<int64_t> counts;  // counts[conf_bin * bins + iou_bin]

  explicit HistogramGrid(int bins = 50) : bins(bins), counts(static_cast<size_t>(bins) * bins, 0) {}

  int64_t& at(int conf_bin, int iou_bin) { return counts[static_cast<size_t>(conf_bin) * bins + iou_bin]; }
  int64_t at(int conf_bin, int iou_bin) const { return counts[static_cast<size_t>(conf_bin) * bins + iou_bin]; }
  int64_t total() const;

  // Mean confidence over proposals whose best-GT IoU landed at or above
  // the given bin edge (by bin content, so conservation holds exactly).
  std::optional<double> mean_confidence_min_iou(double min_iou) const;
};

// Bins every proposal by (foreground-renormalized max confidence, best IoU
// over all GT). One count per proposal.
void conf_iou_histogram(HistogramGrid& grid, const ProposalSet& props,
                        const std::vector<GroundTruthObject>& gts);

struct StageAlignment {
  int aligned = 0;
  int total = 0;

  std::optional<double> ratio() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(aligned) / total;
  }
};

struct AlignmentReport {
  StageAlignment after_iou;  // stage-1 survivors, raw foreground argmax
  StageAlignment after_bg;   // stage-2 survivors, raw foreground argmax
  StageAlignment lpl;        // final LPL, amplified argmax
};

// A mined box is class-aligned when its argmax equals the class of the GT
// with highest IoU, requiring IoU >= 0.5; boxes below that count as
// misaligned. Stage-1/2 survivors use the raw foreground argmax, the final
// LPL their amplified argmax.
AlignmentReport class_alignment_ratio(const ProposalSet& props, const MiningStages& stages,
                                      const std::vector<GroundTruthObject>& gts);
void accumulate_alignment(AlignmentReport& acc, const ProposalSet& props,
                          const MiningStages& stages, const std::vector<GroundTruthObject>& gts);

// Serialization. CSV columns are documented in the README.
nlohmann::ordered_json eval_record_to_json(const EvalRecord& r);
std::string eval_record_to_csv(const EvalRecord& r);
nlohmann::ordered_json histogram_to_json(const HistogramGrid& g);
std::string histogram_to_csv(const HistogramGrid& g);
std::string alignment_to_csv(const AlignmentReport& r);

}  // namespace lpld
