#include "lpld/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lpld {

namespace {

struct FlatDetection {
  int scene = 0;
  double score = 0.0;
  int class_id = 0;
  Box box;
};

// Greedy matcher shared by AP and the operating-point counts: detections in
// descending score order claim the unmatched same-class GT of highest IoU
// (>= iou_thresh) within their scene.
struct MatchOutcome {
  std::vector<char> det_tp;                 // per flat detection
  std::vector<std::vector<char>> gt_hit;    // [scene][gt index]
};

MatchOutcome greedy_match(const std::vector<SceneEval>& scenes,
                          std::vector<FlatDetection>& dets, double iou_thresh) {
  std::stable_sort(dets.begin(), dets.end(), [](const FlatDetection& a, const FlatDetection& b) {
    return a.score > b.score;
  });
  MatchOutcome out;
  out.det_tp.assign(dets.size(), 0);
  out.gt_hit.resize(scenes.size());
  for (size_t s = 0; s < scenes.size(); ++s) out.gt_hit[s].assign(scenes[s].objects.size(), 0);

  for (size_t d = 0; d < dets.size(); ++d) {
    const auto& det = dets[d];
    const auto& gts = scenes[det.scene].objects;
    int best = -1;
    double best_v = 0.0;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].class_id != det.class_id || out.gt_hit[det.scene][g]) continue;
      double v = iou(det.box, gts[g].box);
      if (v >= iou_thresh && v > best_v) {
        best = static_cast<int>(g);
        best_v = v;
      }
    }
    if (best >= 0) {
      out.det_tp[d] = 1;
      out.gt_hit[det.scene][best] = 1;
    }
  }
  return out;
}

std::vector<FlatDetection> flatten(const std::vector<SceneEval>& scenes, int class_id,
                                   double min_score) {
  std::vector<FlatDetection> dets;
  for (size_t s = 0; s < scenes.size(); ++s)
    for (const auto& d : scenes[s].detections)
      if ((class_id < 0 || d.class_id == class_id) && d.score >= min_score)
        dets.push_back({static_cast<int>(s), d.score, d.class_id, d.box});
  return dets;
}

double all_point_ap(const std::vector<char>& tp_flags, int n_gt) {
  if (n_gt == 0) return 0.0;
  std::vector<double> precision, recall;
  int tp = 0, fp = 0;
  for (char f : tp_flags) {
    if (f) ++tp; else ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / n_gt);
  }
  // Precision envelope from the right, then sum rectangle areas at recall
  // steps (all-point interpolation).
  for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i)
    precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (size_t i = 0; i < recall.size(); ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

}  // namespace

ApResult ap50(const std::vector<SceneEval>& scenes, int classes, double iou_thresh) {
  ApResult res;
  res.per_class.assign(classes, 0.0);
  res.gt_count.assign(classes, 0);
  for (const auto& s : scenes)
    for (const auto& g : s.objects)
      if (g.class_id >= 0 && g.class_id < classes) ++res.gt_count[g.class_id];

  double sum = 0.0;
  int with_gt = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<FlatDetection> dets = flatten(scenes, c, 0.0);
    MatchOutcome m = greedy_match(scenes, dets, iou_thresh);
    res.per_class[c] = all_point_ap(m.det_tp, res.gt_count[c]);
    if (res.gt_count[c] > 0) {
      sum += res.per_class[c];
      ++with_gt;
    }
  }
  res.map = with_gt > 0 ? sum / with_gt : 0.0;
  return res;
}

ApResult ap50(const std::vector<Detection>& detections,
              const std::vector<GroundTruthObject>& gts, int classes, double iou_thresh) {
  std::vector<SceneEval> one(1);
  one[0].detections = detections;
  one[0].objects = gts;
  return ap50(one, classes, iou_thresh);
}

std::optional<double> EvalRecord::class_fnr(int c) const {
  int denom = class_tp[c] + class_fn[c];
  if (denom == 0) return std::nullopt;
  return static_cast<double>(class_fn[c]) / denom;
}

std::optional<double> EvalRecord::bucket_fnr(int b) const {
  int denom = bucket_tp[b] + bucket_fn[b];
  if (denom == 0) return std::nullopt;
  return static_cast<double>(bucket_fn[b]) / denom;
}

std::optional<double> EvalRecord::group_fnr(const std::vector<int>& cls) const {
  int tp = 0, fn = 0;
  for (int c : cls) {
    tp += class_tp[c];
    fn += class_fn[c];
  }
  if (tp + fn == 0) return std::nullopt;
  return static_cast<double>(fn) / (tp + fn);
}

EvalRecord evaluate(const std::vector<SceneEval>& scenes, int classes, double score_threshold,
                    double iou_thresh) {
  EvalRecord r;
  ApResult ap = ap50(scenes, classes, iou_thresh);
  r.class_ap = ap.per_class;
  r.class_gt = ap.gt_count;
  r.map = ap.map;
  r.score_threshold = score_threshold;
  r.class_tp.assign(classes, 0);
  r.class_fp.assign(classes, 0);
  r.class_fn.assign(classes, 0);

  std::vector<FlatDetection> dets = flatten(scenes, -1, score_threshold);
  MatchOutcome m = greedy_match(scenes, dets, iou_thresh);
  for (size_t d = 0; d < dets.size(); ++d) {
    if (m.det_tp[d]) ++r.class_tp[dets[d].class_id];
    else ++r.class_fp[dets[d].class_id];
  }
  for (size_t s = 0; s < scenes.size(); ++s) {
    for (size_t g = 0; g < scenes[s].objects.size(); ++g) {
      const auto& gt = scenes[s].objects[g];
      if (!m.gt_hit[s][g]) {
        ++r.class_fn[gt.class_id];
        ++r.bucket_fn[gt.size_bucket];
      } else {
        ++r.bucket_tp[gt.size_bucket];
      }
    }
  }
  return r;
}

int64_t HistogramGrid::total() const {
  int64_t t = 0;
  for (int64_t c : counts) t += c;
  return t;
}

std::optional<double> HistogramGrid::mean_confidence_min_iou(double min_iou) const {
  int first_bin = std::min(bins - 1, std::max(0, static_cast<int>(std::floor(min_iou * bins))));
  int64_t n = 0;
  double sum = 0.0;
  for (int ci = 0; ci < bins; ++ci) {
    double conf_mid = (ci + 0.5) / bins;
    for (int ii = first_bin; ii < bins; ++ii) {
      n += at(ci, ii);
      sum += conf_mid * at(ci, ii);
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

void conf_iou_histogram(HistogramGrid& grid, const ProposalSet& props,
                        const std::vector<GroundTruthObject>& gts) {
  auto bin_of = [&](double v) {
    int b = static_cast<int>(std::floor(v * grid.bins));
    return std::min(grid.bins - 1, std::max(0, b));
  };
  for (const auto& p : props.proposals) {
    double mass = p.scores.foreground_mass();
    double conf = mass > 0.0 ? p.scores.max_foreground() / mass : 0.0;
    double best = 0.0;
    for (const auto& g : gts) best = std::max(best, iou(p.box, g.box));
    ++grid.at(bin_of(conf), bin_of(best));
  }
}

namespace {

// Best-IoU GT class, or -1 when no GT reaches the alignment threshold.
int aligned_gt_class(const Box& b, const std::vector<GroundTruthObject>& gts) {
  int best = -1;
  double best_iou = 0.5;
  for (size_t g = 0; g < gts.size(); ++g) {
    double v = iou(b, gts[g].box);
    if (v >= best_iou) {
      best_iou = v;
      best = static_cast<int>(g);
    }
  }
  return best < 0 ? -1 : gts[best].class_id;
}

}  // namespace

void accumulate_alignment(AlignmentReport& acc, const ProposalSet& props,
                          const MiningStages& stages, const std::vector<GroundTruthObject>& gts) {
  auto tally_raw = [&](const std::vector<int>& indices, StageAlignment& st) {
    for (int i : indices) {
      const auto& p = props.proposals[i];
      ++st.total;
      if (aligned_gt_class(p.box, gts) == p.scores.argmax_foreground()) ++st.aligned;
    }
  };
  tally_raw(stages.after_iou, acc.after_iou);
  tally_raw(stages.after_bg, acc.after_bg);
  for (const auto& l : stages.lpl) {
    ++acc.lpl.total;
    if (aligned_gt_class(l.box, gts) == l.amp.argmax()) ++acc.lpl.aligned;
  }
}

AlignmentReport class_alignment_ratio(const ProposalSet& props, const MiningStages& stages,
                                      const std::vector<GroundTruthObject>& gts) {
  AlignmentReport r;
  accumulate_alignment(r, props, stages, gts);
  return r;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

nlohmann::ordered_json eval_record_to_json(const EvalRecord& r) {
  nlohmann::ordered_json j;
  j["map"] = r.map;
  j["score_threshold"] = r.score_threshold;
  j["class_ap"] = r.class_ap;
  j["class_gt"] = r.class_gt;
  j["class_tp"] = r.class_tp;
  j["class_fp"] = r.class_fp;
  j["class_fn"] = r.class_fn;
  j["bucket_tp"] = r.bucket_tp;
  j["bucket_fn"] = r.bucket_fn;
  nlohmann::ordered_json fnr = nlohmann::ordered_json::array();
  for (int b = 0; b < 3; ++b) {
    auto v = r.bucket_fnr(b);
    if (v) fnr.push_back(*v);
    else fnr.push_back(nullptr);
  }
  j["bucket_fnr"] = fnr;
  return j;
}

std::string eval_record_to_csv(const EvalRecord& r) {
  std::ostringstream os;
  os << "row,id,ap50,gt,tp,fp,fn,fnr\n";
  for (size_t c = 0; c < r.class_ap.size(); ++c) {
    os << "class," << c << ',' << fmt(r.class_ap[c]) << ',' << r.class_gt[c] << ','
       << r.class_tp[c] << ',' << r.class_fp[c] << ',' << r.class_fn[c] << ','
       << opt_fmt(r.class_fnr(static_cast<int>(c))) << '\n';
  }
  static const char* bucket_names[3] = {"small", "medium", "large"};
  for (int b = 0; b < 3; ++b) {
    os << "bucket," << bucket_names[b] << ",,," << r.bucket_tp[b] << ",," << r.bucket_fn[b] << ','
       << opt_fmt(r.bucket_fnr(b)) << '\n';
  }
  os << "summary,map," << fmt(r.map) << ",,,,,\n";
  return os.str();
}

nlohmann::ordered_json histogram_to_json(const HistogramGrid& g) {
  nlohmann::ordered_json j;
  j["bins"] = g.bins;
  j["counts"] = g.counts;
  j["total"] = g.total();
  return j;
}

std::string histogram_to_csv(const HistogramGrid& g) {
  std::ostringstream os;
  os << "conf_bin,iou_bin,conf_lo,iou_lo,count\n";
  for (int ci = 0; ci < g.bins; ++ci)
    for (int ii = 0; ii < g.bins; ++ii)
      os << ci << ',' << ii << ',' << fmt(static_cast<double>(ci) / g.bins) << ','
         << fmt(static_cast<double>(ii) / g.bins) << ',' << g.at(ci, ii) << '\n';
  return os.str();
}

std::string alignment_to_csv(const AlignmentReport& r) {
  std::ostringstream os;
  os << "stage,aligned,total,ratio\n";
  auto row = [&](const char* name, const StageAlignment& st) {
    os << name << ',' << st.aligned << ',' << st.total << ',' << opt_fmt(st.ratio()) << '\n';
  };
  row("after_iou", r.after_iou);
  row("after_bg", r.after_bg);
  row("lpl", r.lpl);
  return os.str();
}

}  // namespace lpld
