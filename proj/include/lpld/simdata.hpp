#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpld/box.hpp"
#include "lpld/featmap.hpp"
#include "lpld/rng.hpp"

#include "json.hpp"

namespace lpld {

enum class Domain { source, target };
enum class AugKind { none, weak, strong };

struct AugmentConfig {
  double weak_sigma = 0.02;     // additive noise on the weak view
  double strong_sigma = 0.12;   // additive noise on the strong view
  double channel_jitter = 0.3;  // strong: per-channel gain in [1-j, 1+j]
  int erase_count = 2;          // strong: rectangles blanked to erase_fill
  double erase_frac = 0.3;      // strong: erased rect side, fraction of scene side
  double erase_fill = 0.0;

  void validate() const;
};

struct DatasetConfig {
  int classes = 6;
  int channels = 8;
  int grid_width = 16;
  int grid_height = 16;
  double cell_size = 1.0;
  std::vector<double> class_weights;  // unnormalized; defaulted when empty
  std::vector<int> minor_classes;     // low-frequency classes, for FNR reporting
  int objects_min = 2;
  int objects_max = 5;
  double size_min = 2.5;     // object side range, scene units
  double size_max = 6.5;
  double aspect_min = 0.75;  // width / height
  double aspect_max = 4.0 / 3.0;
  double signal_strength = 1.0;
  double background_amplitude = 0.05;
  double shift_angle_deg = 25.0;   // target-domain rotation of class signatures
  double style_offset = 0.1;       // target-domain constant channel offset
  double target_noise_sigma = 0.1; // target-domain additive noise
  int n_source = 60;
  int n_target_train = 60;
  int n_target_eval = 30;
  AugmentConfig augment;

  double scene_width() const { return grid_width * cell_size; }
  double scene_height() const { return grid_height * cell_size; }
  void validate() const;

  // Terciles of the object area range [size_min^2, size_max^2]:
  // 0 = small, 1 = medium, 2 = large.
  int size_bucket(double area) const;
};

struct GroundTruthObject {
  Box box;
  int class_id = 0;
  int size_bucket = 0;
};

struct Scene {
  int64_t id = -1;
  Domain domain = Domain::source;
  std::vector<GroundTruthObject> objects;
  FeatureMap fm;
};

// Deterministic scene synthesis: objects paint their class signature into
// every covered cell weighted by the covered fraction of that cell, on top
// of a low-amplitude smooth background texture. Target-domain scenes rotate
// each class signature toward the next channel by shift_angle_deg, add a
// constant style offset and per-cell noise. Same (config, id, domain,
// seed) always yields the identical scene.
Scene generate_scene(const DatasetConfig& cfg, int64_t id, Domain domain, uint64_t seed);

// Scene ids of each split. Source ids count from 0, target train from
// 100000, target eval from 200000.
struct SplitIds {
  std::vector<int64_t> source;
  std::vector<int64_t> target_train;
  std::vector<int64_t> target_eval;
};
SplitIds split_ids(const DatasetConfig& cfg);

// Photometric-only views: boxes are never touched. The weak view adds
// small Gaussian noise; the strong view applies per-channel gain, larger
// noise, then blanks erase_count rectangles.
FeatureMap augment_map(const FeatureMap& fm, AugKind kind, const AugmentConfig& cfg, uint64_t seed);

nlohmann::ordered_json dataset_config_to_json(const DatasetConfig& cfg);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

// Manifest written by the gen command and consumed by every other one.
nlohmann::ordered_json manifest_to_json(const DatasetConfig& cfg, uint64_t seed);
struct Manifest {
  DatasetConfig config;
  uint64_t seed = 0;
  SplitIds splits;
};
Manifest manifest_from_json(const nlohmann::json& j);
Manifest load_manifest(const std::string& path);

Scene scene_from_manifest(const Manifest& m, int64_t id);

}  // namespace lpld
