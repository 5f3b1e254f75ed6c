#include "lpld/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "lpld/errors.hpp"

namespace lpld {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// Stable BCE with logit input: max(z,0) - z*y + log(1 + exp(-|z|)).
double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double dot(std::span<const double> w, const std::vector<double>& f) {
  double s = 0.0;
  for (size_t i = 0; i < w.size(); ++i) s += w[i] * f[i];
  return s;
}

// Indices of the top_k entries by descending value, ties to lower index.
std::vector<size_t> top_k_indices(const std::vector<double>& values, int k) {
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] > values[b]; });
  if (static_cast<int>(order.size()) > k) order.resize(k);
  return order;
}

std::vector<double> cls_logits(const DetectorParams& p, const std::vector<double>& f) {
  std::vector<double> z(p.classes + 1);
  for (int c = 0; c <= p.classes; ++c) z[c] = dot(p.cls_row(c), f) + p.cls_b(c);
  return z;
}

}  // namespace

void DetectorConfig::validate() const {
  if (classes < 1 || channels < 1 || pooled_size < 1) {
    throw ConfigError("detector: classes, channels and pooled_size must be >= 1");
  }
  if (anchor_scales.empty() || anchor_ratios.empty()) {
    throw ConfigError("detector: anchor_scales and anchor_ratios must be non-empty");
  }
  if (top_k < 1) throw ConfigError("detector: top_k must be >= 1");
  for (double s : anchor_scales) {
    if (s <= 0.0) throw ConfigError("detector: anchor scales must be positive");
  }
  for (double r : anchor_ratios) {
    if (r <= 0.0) throw ConfigError("detector: anchor ratios must be positive");
  }
}

DetectorParams DetectorParams::zeros(const DetectorConfig& cfg) {
  DetectorParams p;
  p.classes = cfg.classes;
  p.channels = cfg.channels;
  p.pooled_size = cfg.pooled_size;
  p.data.assign(p.total_len(), 0.0);
  return p;
}

DetectorParams DetectorParams::random_init(const DetectorConfig& cfg, Rng& rng, double scale) {
  DetectorParams p = zeros(cfg);
  for (double& v : p.data) v = rng.normal(0.0, scale);
  return p;
}

double DetectorParams::checksum() const {
  double h = 0.0;
  double k = 1.0;
  for (double v : data) {
    h += v * k;
    k = k * 1.000001 + 1e-9;
  }
  return h;
}

std::vector<Box> generate_anchors(const FeatureMap& fm, const DetectorConfig& cfg) {
  std::vector<Box> anchors;
  anchors.reserve(static_cast<size_t>(fm.width) * fm.height * cfg.anchor_scales.size() *
                  cfg.anchor_ratios.size());
  for (int y = 0; y < fm.height; ++y) {
    for (int x = 0; x < fm.width; ++x) {
      double cx = (x + 0.5) * fm.scale;
      double cy = (y + 0.5) * fm.scale;
      for (double s : cfg.anchor_scales) {
        for (double r : cfg.anchor_ratios) {
          double w = s * std::sqrt(r);
          double h = s / std::sqrt(r);
          anchors.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
        }
      }
    }
  }
  return anchors;
}

ProposalSet forward(const DetectorParams& params, const FeatureMap& fm,
                    const DetectorConfig& cfg, int64_t scene_id) {
  std::vector<Box> anchors = generate_anchors(fm, cfg);
  std::vector<double> obj(anchors.size());
  std::vector<RoiFeature> feats(anchors.size());
  for (size_t i = 0; i < anchors.size(); ++i) {
    feats[i] = roi_align(fm, anchors[i], cfg.pooled_size);
    obj[i] = sigmoid(dot(params.obj_w(), feats[i].values) + params.obj_b());
  }
  std::vector<size_t> kept = top_k_indices(obj, cfg.top_k);

  ProposalSet out;
  out.scene_id = scene_id;
  out.proposals.reserve(kept.size());
  for (size_t i : kept) {
    Proposal p;
    p.box = anchors[i];
    p.objectness = obj[i];
    p.scores = softmax(cls_logits(params, feats[i].values));
    out.proposals.push_back(std::move(p));
  }
  return out;
}

BoxScore score_box(const DetectorParams& params, const FeatureMap& fm, const Box& b,
                   const DetectorConfig& cfg) {
  BoxScore s;
  s.feature = roi_align(fm, b, cfg.pooled_size);
  s.logits = cls_logits(params, s.feature.values);
  s.scores = softmax(s.logits);
  return s;
}

std::array<double, 4> encode_deltas(const Box& anchor, const Box& target) {
  double aw = anchor.width();
  double ah = anchor.height();
  return {(target.cx() - anchor.cx()) / aw, (target.cy() - anchor.cy()) / ah,
          std::log(target.width() / aw), std::log(target.height() / ah)};
}

Box apply_deltas(const Box& anchor, const std::array<double, 4>& d) {
  double aw = anchor.width();
  double ah = anchor.height();
  double cx = anchor.cx() + d[0] * aw;
  double cy = anchor.cy() + d[1] * ah;
  double w = aw * std::exp(d[2]);
  double h = ah * std::exp(d[3]);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

double smooth_l1(double x) {
  double ax = std::abs(x);
  if (ax < 1.0) return 0.5 * x * x;
  return ax - 0.5;
}

double smooth_l1_grad(double x) {
  if (std::abs(x) < 1.0) return x;
  return x > 0.0 ? 1.0 : -1.0;
}

std::vector<Detection> detect(const DetectorParams& params, const FeatureMap& fm,
                              const DetectorConfig& cfg) {
  std::vector<Box> anchors = generate_anchors(fm, cfg);
  std::vector<double> obj(anchors.size());
  std::vector<RoiFeature> feats(anchors.size());
  for (size_t i = 0; i < anchors.size(); ++i) {
    feats[i] = roi_align(fm, anchors[i], cfg.pooled_size);
    obj[i] = sigmoid(dot(params.obj_w(), feats[i].values) + params.obj_b());
  }
  std::vector<size_t> kept = top_k_indices(obj, cfg.top_k);

  const int C = cfg.classes;
  std::vector<std::vector<ScoredBox>> per_class(C);
  for (size_t i : kept) {
    const std::vector<double>& f = feats[i].values;
    ScoreVector scores = softmax(cls_logits(params, f));
    std::array<double, 4> mean_delta = {0, 0, 0, 0};
    for (int c = 0; c < C; ++c) {
      for (int t = 0; t < 4; ++t) {
        mean_delta[t] += (dot(params.reg_row(4 * c + t), f) + params.reg_b(4 * c + t)) / C;
      }
    }
    Box refined = apply_deltas(anchors[i], mean_delta);
    for (int c = 0; c < C; ++c) {
      if (scores.probs[c] >= cfg.score_filter) {
        per_class[c].push_back({refined, scores.probs[c]});
      }
    }
  }

  std::vector<Detection> dets;
  for (int c = 0; c < C; ++c) {
    std::vector<size_t> keep = nms(per_class[c], cfg.nms_iou);
    for (size_t k : keep) dets.push_back({per_class[c][k].box, c, per_class[c][k].score});
  }
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  return dets;
}

LossResult mt_loss(const DetectorParams& student, const FeatureMap& fm,
                   const std::vector<BoxLabel>& labels, const DetectorConfig& cfg) {
  if (!student.shape_matches(cfg)) throw ConfigError("mt_loss: params shape mismatch");
  const int C = cfg.classes;
  const int F = cfg.feature_len();

  LossResult res;
  res.grads.assign(student.total_len(), 0.0);
  double* g_obj_w = res.grads.data() + student.obj_w_off();
  double* g_obj_b = res.grads.data() + student.obj_b_off();
  double* g_cls_w = res.grads.data() + student.cls_w_off();
  double* g_cls_b = res.grads.data() + student.cls_b_off();
  double* g_reg_w = res.grads.data() + student.reg_w_off();
  double* g_reg_b = res.grads.data() + student.reg_b_off();

  std::vector<Box> anchors = generate_anchors(fm, cfg);
  std::vector<RoiFeature> feats(anchors.size());
  std::vector<double> obj_logit(anchors.size());
  std::vector<double> obj(anchors.size());
  for (size_t i = 0; i < anchors.size(); ++i) {
    feats[i] = roi_align(fm, anchors[i], cfg.pooled_size);
    obj_logit[i] = dot(student.obj_w(), feats[i].values) + student.obj_b();
    obj[i] = sigmoid(obj_logit[i]);
  }

  // RPN term: mean BCE over anchors labeled by IoU against the label boxes.
  size_t n_rpn = 0;
  for (size_t i = 0; i < anchors.size(); ++i) {
    double best = 0.0;
    for (const BoxLabel& l : labels) best = std::max(best, iou(anchors[i], l.box));
    double y;
    if (best >= cfg.rpn_pos_iou) {
      y = 1.0;
    } else if (best < cfg.rpn_neg_iou) {
      y = 0.0;
    } else {
      continue;  // ignored band
    }
    ++n_rpn;
    res.rpn += bce_with_logit(obj_logit[i], y);
    double dz = obj[i] - y;
    const std::vector<double>& f = feats[i].values;
    for (int t = 0; t < F; ++t) g_obj_w[t] += dz * f[t];
    *g_obj_b += dz;
  }
  if (n_rpn > 0) {
    double inv = 1.0 / static_cast<double>(n_rpn);
    res.rpn *= inv;
    for (int t = 0; t < F; ++t) g_obj_w[t] *= inv;
    *g_obj_b *= inv;
  }

  // RoI term over the student's own top_k proposals.
  std::vector<size_t> kept = top_k_indices(obj, cfg.top_k);
  for (size_t i : kept) {
    const std::vector<double>& f = feats[i].values;

    int matched = -1;
    double best = 0.0;
    for (size_t k = 0; k < labels.size(); ++k) {
      double v = iou(anchors[i], labels[k].box);
      if (v > best) {
        best = v;
        matched = static_cast<int>(k);
      }
    }
    int cls = (matched >= 0 && best >= cfg.roi_match_iou) ? labels[matched].class_id : C;

    std::vector<double> z = cls_logits(student, f);
    double zmax = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - zmax);
    lse = zmax + std::log(lse);
    res.roi_cls += lse - z[cls];

    ScoreVector p = softmax(z);
    for (int c = 0; c <= C; ++c) {
      double dz = p.probs[c] - (c == cls ? 1.0 : 0.0);
      double* row = g_cls_w + static_cast<size_t>(c) * F;
      for (int t = 0; t < F; ++t) row[t] += dz * f[t];
      g_cls_b[c] += dz;
    }

    if (cls < C) {
      std::array<double, 4> target = encode_deltas(anchors[i], labels[matched].box);
      for (int t = 0; t < 4; ++t) {
        int k = 4 * cls + t;
        double pred = dot(student.reg_row(k), f) + student.reg_b(k);
        double diff = pred - target[t];
        res.roi_reg += smooth_l1(diff);
        double dp = smooth_l1_grad(diff);
        double* row = g_reg_w + static_cast<size_t>(k) * F;
        for (int u = 0; u < F; ++u) row[u] += dp * f[u];
        g_reg_b[k] += dp;
      }
    }
  }

  // Both RoI terms are means over the kept proposals.
  if (!kept.empty()) {
    double inv = 1.0 / static_cast<double>(kept.size());
    res.roi_cls *= inv;
    res.roi_reg *= inv;
    size_t cls_len = static_cast<size_t>(C + 1) * F + (C + 1);
    for (size_t t = 0; t < cls_len; ++t) g_cls_w[t] *= inv;
    size_t reg_len = static_cast<size_t>(4 * C) * F + 4 * static_cast<size_t>(C);
    for (size_t t = 0; t < reg_len; ++t) g_reg_w[t] *= inv;
  }

  res.loss = res.rpn + res.roi_cls + res.roi_reg;
  return res;
}

nlohmann::ordered_json detector_params_to_json(const DetectorParams& p) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["classes"] = p.classes;
  j["channels"] = p.channels;
  j["pooled_size"] = p.pooled_size;
  j["data"] = p.data;
  return j;
}

DetectorParams detector_params_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != 1) throw ConfigError("unsupported params version");
  DetectorParams p;
  p.classes = j.at("classes").get<int>();
  p.channels = j.at("channels").get<int>();
  p.pooled_size = j.at("pooled_size").get<int>();
  p.data = j.at("data").get<std::vector<double>>();
  if (p.data.size() != p.total_len()) throw ConfigError("params data length mismatch");
  for (double v : p.data) {
    if (!std::isfinite(v)) throw ConfigError("params contain non-finite values");
  }
  return p;
}

}  // namespace lpld
