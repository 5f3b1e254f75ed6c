#include "lpld/distill.hpp"

#include <algorithm>
#include <cmath>

#include "lpld/errors.hpp"
#include "lpld/scores.hpp"

namespace lpld {

LplLossKind lpl_loss_kind_from_string(const std::string& s) {
  if (s == "kl") return LplLossKind::kl;
  if (s == "ce") return LplLossKind::ce;
  if (s == "ce_reg") return LplLossKind::ce_reg;
  throw ConfigError("unknown lpl_loss_kind: " + s);
}

std::string to_string(LplLossKind k) {
  switch (k) {
    case LplLossKind::kl: return "kl";
    case LplLossKind::ce: return "ce";
    case LplLossKind::ce_reg: return "ce_reg";
  }
  return "kl";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(ema_rate >= 0.0 && ema_rate <= 1.0)) throw ConfigError("ema_rate must be in [0, 1]");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be non-negative");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be positive");
  if (!use_hpl && !use_lpl) throw ConfigError("at least one of use_hpl / use_lpl must be set");
}

std::vector<double> adaptive_weights(const FeatureMap& student_map, const FeatureMap& teacher_map,
                                     const std::vector<LowConfLabel>& lpl, int pooled_size) {
  std::vector<double> out;
  out.reserve(lpl.size());
  for (const auto& l : lpl) {
    RoiFeature a = roi_align(student_map, l.box, pooled_size);
    RoiFeature b = roi_align(teacher_map, l.box, pooled_size);
    out.push_back(cosine_distance(a, b));
  }
  return out;
}

LossResult lpld_loss(const DetectorParams& params, const FeatureMap& fm,
                     const std::vector<LowConfLabel>& lpl, const std::vector<double>& weights,
                     LplLossKind kind, const DetectorConfig& cfg) {
  cfg.validate();
  if (!weights.empty() && weights.size() != lpl.size())
    throw InternalError("weight count does not match label count");

  LossResult res;
  res.grads.assign(params.total_len(), 0.0);
  if (lpl.empty()) return res;

  const int C = cfg.classes;
  const double inv_n = 1.0 / static_cast<double>(lpl.size());

  for (size_t j = 0; j < lpl.size(); ++j) {
    const auto& label = lpl[j];
    const double w = weights.empty() ? 1.0 : weights[j];
    const double scale = w * inv_n;

    BoxScore bs = score_box(params, fm, label.box, cfg);
    const auto& p = bs.scores.probs;  // softmax over C+1
    std::vector<double> gz(C + 1, 0.0);
    double loss_j = 0.0;

    if (kind == LplLossKind::kl) {
      ForegroundDist s = amplify(bs.scores);
      loss_j = kl_div(s, label.amp);
      std::vector<double> gs = kl_div_grad_p(s, label.amp);
      // Chain through the renormalization s_c = p_c / M, M = sum fg.
      double mass = bs.scores.foreground_mass();
      double dot = 0.0;
      for (int c = 0; c < C; ++c) dot += gs[c] * s.probs[c];
      std::vector<double> gp(C + 1, 0.0);
      for (int c = 0; c < C; ++c) gp[c] = (gs[c] - dot) / mass;
      gz = softmax_vjp(p, gp);
    } else {
      int target = label.amp.argmax();
      loss_j = -std::log(std::max(p[target], kProbEpsilon));
      for (int c = 0; c <= C; ++c) gz[c] = p[c] - (c == target ? 1.0 : 0.0);
      if (kind == LplLossKind::ce_reg) {
        // Anchor the predicted box to the label box itself: the encoded
        // target deltas are identically zero.
        for (int t = 0; t < 4; ++t) {
          double z = 0.0;
          auto row = params.reg_row(4 * target + t);
          for (size_t f = 0; f < bs.feature.values.size(); ++f)
            z += row[f] * bs.feature.values[f];
          z += params.reg_b(4 * target + t);
          loss_j += smooth_l1(z);
          double gd = scale * smooth_l1_grad(z);
          double* gw = res.grads.data() + params.reg_w_off() + (4 * target + t) * cfg.feature_len();
          for (size_t f = 0; f < bs.feature.values.size(); ++f) gw[f] += gd * bs.feature.values[f];
          res.grads[params.reg_b_off() + 4 * target + t] += gd;
        }
      }
    }

    res.loss += scale * loss_j;
    // Classification gradient: logits are linear in the pooled feature.
    for (int c = 0; c <= C; ++c) {
      double gd = scale * gz[c];
      if (gd == 0.0) continue;
      double* gw = res.grads.data() + params.cls_w_off() + c * cfg.feature_len();
      for (size_t f = 0; f < bs.feature.values.size(); ++f) gw[f] += gd * bs.feature.values[f];
      res.grads[params.cls_b_off() + c] += gd;
    }
  }
  return res;
}

TotalLoss total_loss(const DetectorParams& params, const FeatureMap& fm,
                     const std::vector<BoxLabel>& hpl, const std::vector<LowConfLabel>& lpl,
                     const std::vector<double>& weights, const TrainConfig& tcfg,
                     const DetectorConfig& dcfg) {
  tcfg.validate();
  TotalLoss out;
  out.grads.assign(params.total_len(), 0.0);

  if (tcfg.use_hpl) {
    LossResult mt = mt_loss(params, fm, hpl, dcfg);
    out.loss_mt = mt.loss;
    for (size_t i = 0; i < out.grads.size(); ++i) out.grads[i] += mt.grads[i];
  }
  if (tcfg.use_lpl) {
    LossResult lp = lpld_loss(params, fm, lpl, tcfg.use_adaptive_weights ? weights : std::vector<double>{},
                              tcfg.lpl_loss_kind, dcfg);
    out.loss_lpld = lp.loss;
    for (size_t i = 0; i < out.grads.size(); ++i) out.grads[i] += lp.grads[i];
  }
  out.loss = out.loss_mt + out.loss_lpld;
  return out;
}

void sgd_step(DetectorParams& params, const std::vector<double>& grads, SgdState& state,
              const TrainConfig& cfg) {
  if (grads.size() != params.data.size()) throw InternalError("gradient size mismatch");
  if (state.velocity.size() != params.data.size()) state.reset(params.data.size());
  for (size_t i = 0; i < params.data.size(); ++i) {
    double g = grads[i] + cfg.weight_decay * params.data[i];
    state.velocity[i] = cfg.momentum * state.velocity[i] + g;
    params.data[i] -= cfg.learning_rate * state.velocity[i];
  }
}

void ema_update(DetectorParams& teacher, const DetectorParams& student, double m) {
  if (teacher.data.size() != student.data.size()) throw InternalError("parameter size mismatch");
  for (size_t i = 0; i < teacher.data.size(); ++i)
    teacher.data[i] = m * teacher.data[i] + (1.0 - m) * student.data[i];
}

}  // namespace lpld
