#include "lpld/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "lpld/errors.hpp"

namespace lpld {

void AugmentConfig::validate() const {
  if (!(weak_sigma >= 0.0)) throw ConfigError("weak_sigma must be non-negative");
  if (!(strong_sigma >= 0.0)) throw ConfigError("strong_sigma must be non-negative");
  if (!(channel_jitter >= 0.0 && channel_jitter < 1.0))
    throw ConfigError("channel_jitter must be in [0, 1)");
  if (erase_count < 0) throw ConfigError("erase_count must be non-negative");
  if (!(erase_frac >= 0.0 && erase_frac <= 1.0))
    throw ConfigError("erase_frac must be in [0, 1]");
}

void DatasetConfig::validate() const {
  if (classes < 1) throw ConfigError("classes must be positive");
  if (channels < classes)
    throw ConfigError("channels must be >= classes so class signatures stay orthogonal");
  if (grid_width < 1 || grid_height < 1) throw ConfigError("grid must be non-empty");
  if (!(cell_size > 0.0)) throw ConfigError("cell_size must be positive");
  if (!class_weights.empty()) {
    if (static_cast<int>(class_weights.size()) != classes)
      throw ConfigError("class_weights size must equal classes");
    double total = 0.0;
    for (double w : class_weights) {
      if (!(w >= 0.0)) throw ConfigError("class_weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("class_weights must have positive mass");
  }
  for (int c : minor_classes)
    if (c < 0 || c >= classes) throw ConfigError("minor_classes entry out of range");
  if (objects_min < 0 || objects_max < objects_min) throw ConfigError("bad object count range");
  if (!(size_min > 0.0 && size_max >= size_min)) throw ConfigError("bad object size range");
  if (!(aspect_min > 0.0 && aspect_max >= aspect_min)) throw ConfigError("bad aspect range");
  double widest = size_max * std::sqrt(aspect_max);
  double tallest = size_max / std::sqrt(aspect_min);
  if (widest > scene_width() || tallest > scene_height())
    throw ConfigError("size_max does not fit in the scene");
  if (!(signal_strength > 0.0)) throw ConfigError("signal_strength must be positive");
  if (!(background_amplitude >= 0.0)) throw ConfigError("background_amplitude must be non-negative");
  if (!(target_noise_sigma >= 0.0)) throw ConfigError("target_noise_sigma must be non-negative");
  if (n_source < 0 || n_target_train < 0 || n_target_eval < 0)
    throw ConfigError("split sizes must be non-negative");
  augment.validate();
}

int DatasetConfig::size_bucket(double area) const {
  double lo = size_min * size_min;
  double hi = size_max * size_max;
  double t = (hi > lo) ? (area - lo) / (hi - lo) : 0.0;
  if (t < 1.0 / 3.0) return 0;
  if (t < 2.0 / 3.0) return 1;
  return 2;
}

namespace {

constexpr uint64_t kSceneStream = 0x5ce7e;
constexpr uint64_t kAugStream = 0xa06;

std::vector<double> normalized_weights(const DatasetConfig& cfg) {
  std::vector<double> w = cfg.class_weights;
  if (w.empty()) w.assign(cfg.classes, 1.0);
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

int sample_class(const std::vector<double>& w, Rng& rng) {
  double u = rng.uniform(0.0, 1.0);
  double acc = 0.0;
  for (size_t c = 0; c < w.size(); ++c) {
    acc += w[c];
    if (u < acc) return static_cast<int>(c);
  }
  return static_cast<int>(w.size()) - 1;
}

// Class signature in channel space. Source scenes use the canonical basis
// vector; target scenes rotate it toward the next channel.
std::vector<double> class_signature(const DatasetConfig& cfg, int class_id, Domain domain) {
  std::vector<double> sig(cfg.channels, 0.0);
  if (domain == Domain::source) {
    sig[class_id] = cfg.signal_strength;
  } else {
    double theta = cfg.shift_angle_deg * std::numbers::pi / 180.0;
    sig[class_id] = cfg.signal_strength * std::cos(theta);
    sig[(class_id + 1) % cfg.channels] += cfg.signal_strength * std::sin(theta);
  }
  return sig;
}

// Overlap of box b with the grid cell (x, y), as a fraction of cell area.
double cell_coverage(const Box& b, int x, int y, double cell) {
  Box cell_box{x * cell, y * cell, (x + 1) * cell, (y + 1) * cell};
  return intersection_area(b, cell_box) / (cell * cell);
}

}  // namespace

Scene generate_scene(const DatasetConfig& cfg, int64_t id, Domain domain, uint64_t seed) {
  cfg.validate();
  Rng rng(Rng::mix(seed, static_cast<uint64_t>(id), kSceneStream));

  Scene scene;
  scene.id = id;
  scene.domain = domain;
  scene.fm = FeatureMap::zeros(cfg.channels, cfg.grid_height, cfg.grid_width, cfg.cell_size);

  // Smooth low-amplitude background texture, one wave per channel.
  for (int d = 0; d < cfg.channels; ++d) {
    double fx = rng.uniform(0.05, 0.25);
    double fy = rng.uniform(0.05, 0.25);
    double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    if (cfg.background_amplitude > 0.0) {
      for (int y = 0; y < cfg.grid_height; ++y)
        for (int x = 0; x < cfg.grid_width; ++x)
          scene.fm.at(d, y, x) +=
              cfg.background_amplitude * std::cos(2.0 * std::numbers::pi * (fx * x + fy * y) + phase);
    }
  }

  std::vector<double> weights = normalized_weights(cfg);
  int n = cfg.objects_min + (cfg.objects_max > cfg.objects_min
                                 ? rng.uniform_int(cfg.objects_max - cfg.objects_min + 1)
                                 : 0);
  for (int i = 0; i < n; ++i) {
    int cls = sample_class(weights, rng);
    double side = rng.uniform(cfg.size_min, cfg.size_max);
    double aspect = rng.uniform(cfg.aspect_min, cfg.aspect_max);
    double w = side * std::sqrt(aspect);
    double h = side / std::sqrt(aspect);
    double cx = rng.uniform(w / 2.0, cfg.scene_width() - w / 2.0);
    double cy = rng.uniform(h / 2.0, cfg.scene_height() - h / 2.0);
    Box b{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};

    GroundTruthObject obj;
    obj.box = b;
    obj.class_id = cls;
    obj.size_bucket = cfg.size_bucket(side * side);
    scene.objects.push_back(obj);

    std::vector<double> sig = class_signature(cfg, cls, domain);
    int x0 = std::max(0, static_cast<int>(std::floor(b.x1 / cfg.cell_size)));
    int x1 = std::min(cfg.grid_width - 1, static_cast<int>(std::floor(b.x2 / cfg.cell_size)));
    int y0 = std::max(0, static_cast<int>(std::floor(b.y1 / cfg.cell_size)));
    int y1 = std::min(cfg.grid_height - 1, static_cast<int>(std::floor(b.y2 / cfg.cell_size)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double cov = cell_coverage(b, x, y, cfg.cell_size);
        if (cov <= 0.0) continue;
        for (int d = 0; d < cfg.channels; ++d)
          if (sig[d] != 0.0) scene.fm.at(d, y, x) += cov * sig[d];
      }
    }
  }

  if (domain == Domain::target) {
    if (cfg.style_offset != 0.0)
      for (double& v : scene.fm.data) v += cfg.style_offset;
    if (cfg.target_noise_sigma > 0.0)
      for (double& v : scene.fm.data) v += cfg.target_noise_sigma * rng.normal();
  }
  return scene;
}

SplitIds split_ids(const DatasetConfig& cfg) {
  SplitIds s;
  for (int i = 0; i < cfg.n_source; ++i) s.source.push_back(i);
  for (int i = 0; i < cfg.n_target_train; ++i) s.target_train.push_back(100000 + i);
  for (int i = 0; i < cfg.n_target_eval; ++i) s.target_eval.push_back(200000 + i);
  return s;
}

FeatureMap augment_map(const FeatureMap& fm, AugKind kind, const AugmentConfig& cfg,
                       uint64_t seed) {
  cfg.validate();
  FeatureMap out = fm;
  if (kind == AugKind::none) return out;
  Rng rng(Rng::mix(seed, static_cast<uint64_t>(kind), kAugStream));

  if (kind == AugKind::weak) {
    if (cfg.weak_sigma > 0.0)
      for (double& v : out.data) v += cfg.weak_sigma * rng.normal();
    return out;
  }

  // Strong view: per-channel gain, additive noise, then rectangle erasing.
  const int plane = out.height * out.width;
  for (int d = 0; d < out.channels; ++d) {
    double gain = rng.uniform(1.0 - cfg.channel_jitter, 1.0 + cfg.channel_jitter);
    for (int i = 0; i < plane; ++i) out.data[static_cast<size_t>(d) * plane + i] *= gain;
  }
  if (cfg.strong_sigma > 0.0)
    for (double& v : out.data) v += cfg.strong_sigma * rng.normal();

  double sw = out.width * out.scale;
  double sh = out.height * out.scale;
  for (int e = 0; e < cfg.erase_count; ++e) {
    double w = rng.uniform(0.3, 1.0) * cfg.erase_frac * sw;
    double h = rng.uniform(0.3, 1.0) * cfg.erase_frac * sh;
    double cx = rng.uniform(0.0, sw);
    double cy = rng.uniform(0.0, sh);
    Box r{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        double ccx = (x + 0.5) * out.scale;
        double ccy = (y + 0.5) * out.scale;
        if (ccx >= r.x1 && ccx <= r.x2 && ccy >= r.y1 && ccy <= r.y2)
          for (int d = 0; d < out.channels; ++d) out.at(d, y, x) = cfg.erase_fill;
      }
    }
  }
  return out;
}

nlohmann::ordered_json dataset_config_to_json(const DatasetConfig& cfg) {
  nlohmann::ordered_json j;
  j["classes"] = cfg.classes;
  j["channels"] = cfg.channels;
  j["grid_width"] = cfg.grid_width;
  j["grid_height"] = cfg.grid_height;
  j["cell_size"] = cfg.cell_size;
  j["class_weights"] = cfg.class_weights;
  j["minor_classes"] = cfg.minor_classes;
  j["objects_min"] = cfg.objects_min;
  j["objects_max"] = cfg.objects_max;
  j["size_min"] = cfg.size_min;
  j["size_max"] = cfg.size_max;
  j["aspect_min"] = cfg.aspect_min;
  j["aspect_max"] = cfg.aspect_max;
  j["signal_strength"] = cfg.signal_strength;
  j["background_amplitude"] = cfg.background_amplitude;
  j["shift_angle_deg"] = cfg.shift_angle_deg;
  j["style_offset"] = cfg.style_offset;
  j["target_noise_sigma"] = cfg.target_noise_sigma;
  j["n_source"] = cfg.n_source;
  j["n_target_train"] = cfg.n_target_train;
  j["n_target_eval"] = cfg.n_target_eval;
  j["augment"] = {
      {"weak_sigma", cfg.augment.weak_sigma},
      {"strong_sigma", cfg.augment.strong_sigma},
      {"channel_jitter", cfg.augment.channel_jitter},
      {"erase_count", cfg.augment.erase_count},
      {"erase_frac", cfg.augment.erase_frac},
      {"erase_fill", cfg.augment.erase_fill},
  };
  return j;
}

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

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
  DatasetConfig cfg;
  read_field(j, "classes", cfg.classes);
  read_field(j, "channels", cfg.channels);
  read_field(j, "grid_width", cfg.grid_width);
  read_field(j, "grid_height", cfg.grid_height);
  read_field(j, "cell_size", cfg.cell_size);
  read_field(j, "class_weights", cfg.class_weights);
  read_field(j, "minor_classes", cfg.minor_classes);
  read_field(j, "objects_min", cfg.objects_min);
  read_field(j, "objects_max", cfg.objects_max);
  read_field(j, "size_min", cfg.size_min);
  read_field(j, "size_max", cfg.size_max);
  read_field(j, "aspect_min", cfg.aspect_min);
  read_field(j, "aspect_max", cfg.aspect_max);
  read_field(j, "signal_strength", cfg.signal_strength);
  read_field(j, "background_amplitude", cfg.background_amplitude);
  read_field(j, "shift_angle_deg", cfg.shift_angle_deg);
  read_field(j, "style_offset", cfg.style_offset);
  read_field(j, "target_noise_sigma", cfg.target_noise_sigma);
  read_field(j, "n_source", cfg.n_source);
  read_field(j, "n_target_train", cfg.n_target_train);
  read_field(j, "n_target_eval", cfg.n_target_eval);
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    read_field(a, "weak_sigma", cfg.augment.weak_sigma);
    read_field(a, "strong_sigma", cfg.augment.strong_sigma);
    read_field(a, "channel_jitter", cfg.augment.channel_jitter);
    read_field(a, "erase_count", cfg.augment.erase_count);
    read_field(a, "erase_frac", cfg.augment.erase_frac);
    read_field(a, "erase_fill", cfg.augment.erase_fill);
  }
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json manifest_to_json(const DatasetConfig& cfg, uint64_t seed) {
  SplitIds s = split_ids(cfg);
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["seed"] = seed;
  j["config"] = dataset_config_to_json(cfg);
  j["splits"]["source"] = s.source;
  j["splits"]["target_train"] = s.target_train;
  j["splits"]["target_eval"] = s.target_eval;
  return j;
}

Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  if (!j.contains("config") || !j.contains("splits") || !j.contains("seed"))
    throw ConfigError("manifest missing required fields");
  m.config = dataset_config_from_json(j.at("config"));
  read_field(j, "seed", m.seed);
  read_field(j.at("splits"), "source", m.splits.source);
  read_field(j.at("splits"), "target_train", m.splits.target_train);
  read_field(j.at("splits"), "target_eval", m.splits.target_eval);
  return m;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

Scene scene_from_manifest(const Manifest& m, int64_t id) {
  Domain d = (id < 100000) ? Domain::source : Domain::target;
  return generate_scene(m.config, id, d, m.seed);
}

}  // namespace lpld
