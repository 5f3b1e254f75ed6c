#include "lpld/runconfig.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "lpld/errors.hpp"

namespace lpld {

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad value for ") + key + ": " + e.what());
    }
  }
}

}  // namespace

void MetricsConfig::validate() const {
  if (!(fnr_score_threshold >= 0.0 && fnr_score_threshold <= 1.0))
    throw ConfigError("fnr_score_threshold must be in [0, 1]");
  if (histogram_bins < 1) throw ConfigError("histogram_bins must be positive");
}

void RunConfig::validate() const {
  dataset.validate();
  detector.validate();
  mining.validate();
  train.validate();
  metrics.validate();
  if (detector.channels != dataset.channels)
    throw ConfigError("detector.channels must match dataset.channels");
  if (detector.classes != dataset.classes)
    throw ConfigError("detector.classes must match dataset.classes");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["dataset"] = dataset_config_to_json(cfg.dataset);
  j["detector"] = {
      {"classes", cfg.detector.classes},
      {"channels", cfg.detector.channels},
      {"pooled_size", cfg.detector.pooled_size},
      {"anchor_scales", cfg.detector.anchor_scales},
      {"anchor_ratios", cfg.detector.anchor_ratios},
      {"top_k", cfg.detector.top_k},
      {"rpn_pos_iou", cfg.detector.rpn_pos_iou},
      {"rpn_neg_iou", cfg.detector.rpn_neg_iou},
      {"roi_match_iou", cfg.detector.roi_match_iou},
      {"score_filter", cfg.detector.score_filter},
      {"nms_iou", cfg.detector.nms_iou},
  };
  j["mining"] = {
      {"delta_hc", cfg.mining.delta_hc},
      {"delta_iou", cfg.mining.delta_iou},
      {"delta_bg", cfg.mining.delta_bg},
      {"delta_lc", cfg.mining.delta_lc},
      {"nms_iou", cfg.mining.nms_iou},
      {"pre_nms_score", cfg.mining.pre_nms_score},
      {"classwise_nms", cfg.mining.classwise_nms},
  };
  j["train"] = {
      {"learning_rate", cfg.train.learning_rate},
      {"momentum", cfg.train.momentum},
      {"weight_decay", cfg.train.weight_decay},
      {"ema_rate", cfg.train.ema_rate},
      {"epochs", cfg.train.epochs},
      {"pretrain_epochs", cfg.train.pretrain_epochs},
      {"init_scale", cfg.train.init_scale},
      {"use_hpl", cfg.train.use_hpl},
      {"use_lpl", cfg.train.use_lpl},
      {"use_adaptive_weights", cfg.train.use_adaptive_weights},
      {"ema_per_iteration", cfg.train.ema_per_iteration},
      {"lpl_loss_kind", to_string(cfg.train.lpl_loss_kind)},
  };
  j["metrics"] = {
      {"fnr_score_threshold", cfg.metrics.fnr_score_threshold},
      {"histogram_bins", cfg.metrics.histogram_bins},
  };
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  read_field(j, "seed", cfg.seed);
  read_field(j, "out_dir", cfg.out_dir);
  if (j.contains("dataset")) cfg.dataset = dataset_config_from_json(j.at("dataset"));
  cfg.detector.classes = cfg.dataset.classes;
  cfg.detector.channels = cfg.dataset.channels;
  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    read_field(d, "classes", cfg.detector.classes);
    read_field(d, "channels", cfg.detector.channels);
    read_field(d, "pooled_size", cfg.detector.pooled_size);
    read_field(d, "anchor_scales", cfg.detector.anchor_scales);
    read_field(d, "anchor_ratios", cfg.detector.anchor_ratios);
    read_field(d, "top_k", cfg.detector.top_k);
    read_field(d, "rpn_pos_iou", cfg.detector.rpn_pos_iou);
    read_field(d, "rpn_neg_iou", cfg.detector.rpn_neg_iou);
    read_field(d, "roi_match_iou", cfg.detector.roi_match_iou);
    read_field(d, "score_filter", cfg.detector.score_filter);
    read_field(d, "nms_iou", cfg.detector.nms_iou);
  }
  if (j.contains("mining")) {
    const auto& m = j.at("mining");
    read_field(m, "delta_hc", cfg.mining.delta_hc);
    read_field(m, "delta_iou", cfg.mining.delta_iou);
    read_field(m, "delta_bg", cfg.mining.delta_bg);
    read_field(m, "delta_lc", cfg.mining.delta_lc);
    read_field(m, "nms_iou", cfg.mining.nms_iou);
    read_field(m, "pre_nms_score", cfg.mining.pre_nms_score);
    read_field(m, "classwise_nms", cfg.mining.classwise_nms);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    read_field(t, "learning_rate", cfg.train.learning_rate);
    read_field(t, "momentum", cfg.train.momentum);
    read_field(t, "weight_decay", cfg.train.weight_decay);
    read_field(t, "ema_rate", cfg.train.ema_rate);
    read_field(t, "epochs", cfg.train.epochs);
    read_field(t, "pretrain_epochs", cfg.train.pretrain_epochs);
    read_field(t, "init_scale", cfg.train.init_scale);
    read_field(t, "use_hpl", cfg.train.use_hpl);
    read_field(t, "use_lpl", cfg.train.use_lpl);
    read_field(t, "use_adaptive_weights", cfg.train.use_adaptive_weights);
    read_field(t, "ema_per_iteration", cfg.train.ema_per_iteration);
    if (t.contains("lpl_loss_kind"))
      cfg.train.lpl_loss_kind = lpl_loss_kind_from_string(t.at("lpl_loss_kind").get<std::string>());
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    read_field(m, "fnr_score_threshold", cfg.metrics.fnr_score_threshold);
    read_field(m, "histogram_bins", cfg.metrics.histogram_bins);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open config: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    cfg = run_config_from_json(j);
  } else {
    cfg = run_config_from_json(nlohmann::json::object());
  }
  if (const char* root = std::getenv("LPLD_OUT_ROOT");
      root && *root && std::filesystem::path(cfg.out_dir).is_relative()) {
    cfg.out_dir = (std::filesystem::path(root) / cfg.out_dir).string();
  }
  return cfg;
}

}  // namespace lpld
