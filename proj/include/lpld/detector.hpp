#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lpld/box.hpp"
#include "lpld/featmap.hpp"
#include "lpld/rng.hpp"
#include "lpld/scores.hpp"

#include "json.hpp"

namespace lpld {

struct DetectorConfig {
  int classes = 3;       // C foreground classes
  int channels = 4;      // D feature channels
  int pooled_size = 3;   // P, RoI-align grid side
  std::vector<double> anchor_scales = {4.0};
  std::vector<double> anchor_ratios = {1.0};  // width / height
  int top_k = 128;
  double rpn_pos_iou = 0.5;
  double rpn_neg_iou = 0.3;
  double roi_match_iou = 0.5;
  double score_filter = 0.05;
  double nms_iou = 0.5;

  int feature_len() const { return channels * pooled_size * pooled_size; }
  void validate() const;
};

// All learnable weights of the two-stage head, stored flat so the
// optimizer and EMA updates are single loops. Layout, with F = D*P*P:
//   w_obj[F] | b_obj | W_cls[(C+1) x F] | b_cls[C+1] | W_reg[4C x F] | b_reg[4C]
struct DetectorParams {
  int classes = 0;
  int channels = 0;
  int pooled_size = 0;
  std::vector<double> data;

  static DetectorParams zeros(const DetectorConfig& cfg);
  static DetectorParams random_init(const DetectorConfig& cfg, Rng& rng, double scale);

  int feature_len() const { return channels * pooled_size * pooled_size; }
  size_t obj_w_off() const { return 0; }
  size_t obj_b_off() const { return feature_len(); }
  size_t cls_w_off() const { return obj_b_off() + 1; }
  size_t cls_b_off() const { return cls_w_off() + static_cast<size_t>(classes + 1) * feature_len(); }
  size_t reg_w_off() const { return cls_b_off() + classes + 1; }
  size_t reg_b_off() const { return reg_w_off() + static_cast<size_t>(4 * classes) * feature_len(); }
  size_t total_len() const { return reg_b_off() + 4 * classes; }

  std::span<const double> obj_w() const { return {data.data() + obj_w_off(), static_cast<size_t>(feature_len())}; }
  double obj_b() const { return data[obj_b_off()]; }
  std::span<const double> cls_row(int c) const {
    return {data.data() + cls_w_off() + static_cast<size_t>(c) * feature_len(), static_cast<size_t>(feature_len())};
  }
  double cls_b(int c) const { return data[cls_b_off() + c]; }
  std::span<const double> reg_row(int k) const {
    return {data.data() + reg_w_off() + static_cast<size_t>(k) * feature_len(), static_cast<size_t>(feature_len())};
  }
  double reg_b(int k) const { return data[reg_b_off() + k]; }

  bool shape_matches(const DetectorConfig& cfg) const {
    return classes == cfg.classes && channels == cfg.channels && pooled_size == cfg.pooled_size;
  }
  // Order-sensitive digest used to assert the teacher never takes gradients.
  double checksum() const;
};

struct Proposal {
  Box box;
  ScoreVector scores;
  double objectness = 0.0;
};

struct ProposalSet {
  std::vector<Proposal> proposals;
  int64_t scene_id = -1;
};

struct Detection {
  Box box;
  int class_id = 0;
  double score = 0.0;
};

// Box supervision consumed by mt_loss: a pseudo-label or ground-truth box
// with its hard class assignment.
struct BoxLabel {
  Box box;
  int class_id = 0;
};

struct LossResult {
  double loss = 0.0;
  double rpn = 0.0;
  double roi_cls = 0.0;
  double roi_reg = 0.0;
  std::vector<double> grads;  // same layout as DetectorParams::data
};

// Dense anchor grid: one group of |scales| x |ratios| boxes centered at
// every feature cell. Ordering is row-major cell (y outer, x inner), then
// scale, then ratio.
std::vector<Box> generate_anchors(const FeatureMap& fm, const DetectorConfig& cfg);

// Full proposal pass: RoI-align every anchor, score objectness, keep the
// top_k anchors (ties to the lower anchor index) and attach classification
// softmax scores. Proposal boxes equal anchor boxes.
ProposalSet forward(const DetectorParams& params, const FeatureMap& fm,
                    const DetectorConfig& cfg, int64_t scene_id = -1);

// Classification scores for one arbitrary box (used to re-score pseudo
// label boxes on the student view).
struct BoxScore {
  RoiFeature feature;
  std::vector<double> logits;  // length C+1
  ScoreVector scores;
};
BoxScore score_box(const DetectorParams& params, const FeatureMap& fm, const Box& b,
                   const DetectorConfig& cfg);

// Inference-grade detections: top_k proposals, boxes refined by the
// class-agnostic mean of the per-class regression deltas, per-class score
// filtering and class-wise NMS. Sorted by descending score.
std::vector<Detection> detect(const DetectorParams& params, const FeatureMap& fm,
                              const DetectorConfig& cfg);

// Mean-Teacher detection loss with analytic gradients.
//   L_rpn: mean BCE of anchor objectness over labeled anchors, positive at
//          IoU >= rpn_pos_iou with any label box, negative below
//          rpn_neg_iou, ignored between.
//   L_roi: mean cross-entropy of the top_k proposals' class scores
//          against the matched label class (IoU >= roi_match_iou, best
//          match, background otherwise) plus mean smooth-L1 on the matched
//          class's box deltas.
// Empty labels are valid: every anchor is negative and every proposal is
// background.
LossResult mt_loss(const DetectorParams& student, const FeatureMap& fm,
                   const std::vector<BoxLabel>& labels, const DetectorConfig& cfg);

// Standard (dx, dy, dw, dh) encoding with log-space sizes.
std::array<double, 4> encode_deltas(const Box& anchor, const Box& target);
Box apply_deltas(const Box& anchor, const std::array<double, 4>& deltas);

double smooth_l1(double x);       // beta = 1.0
double smooth_l1_grad(double x);

nlohmann::ordered_json detector_params_to_json(const DetectorParams& p);
DetectorParams detector_params_from_json(const nlohmann::json& j);

}  // namespace lpld
