#include "doctest.h"

#include <cmath>
#include <vector>

#include "lpld/errors.hpp"
#include "lpld/simdata.hpp"

using namespace lpld;

namespace {

DatasetConfig small_config() {
  DatasetConfig cfg;
  cfg.classes = 3;
  cfg.channels = 4;
  cfg.grid_width = 8;
  cfg.grid_height = 8;
  cfg.size_min = 1.5;
  cfg.size_max = 4.0;
  cfg.n_source = 6;
  cfg.n_target_train = 5;
  cfg.n_target_eval = 4;
  return cfg;
}

}  // namespace

TEST_CASE("generate_scene is a pure function of its inputs") {
  DatasetConfig cfg = small_config();
  Scene a = generate_scene(cfg, 3, Domain::target, 77);
  Scene b = generate_scene(cfg, 3, Domain::target, 77);
  CHECK(a.fm.data == b.fm.data);
  REQUIRE(a.objects.size() == b.objects.size());
  for (size_t i = 0; i < a.objects.size(); ++i) {
    CHECK(a.objects[i].box == b.objects[i].box);
    CHECK(a.objects[i].class_id == b.objects[i].class_id);
    CHECK(a.objects[i].size_bucket == b.objects[i].size_bucket);
  }

  CHECK(generate_scene(cfg, 4, Domain::target, 77).fm.data != a.fm.data);
  CHECK(generate_scene(cfg, 3, Domain::target, 78).fm.data != a.fm.data);
  CHECK(generate_scene(cfg, 3, Domain::source, 77).fm.data != a.fm.data);
}

TEST_CASE("scene objects respect the configured ranges") {
  DatasetConfig cfg = small_config();
  for (int id = 0; id < 50; ++id) {
    Scene s = generate_scene(cfg, id, Domain::source, 7);
    CHECK(s.id == id);
    CHECK(s.domain == Domain::source);
    CHECK(s.objects.size() >= static_cast<size_t>(cfg.objects_min));
    CHECK(s.objects.size() <= static_cast<size_t>(cfg.objects_max));
    CHECK(s.fm.channels == cfg.channels);
    CHECK(s.fm.height == cfg.grid_height);
    CHECK(s.fm.width == cfg.grid_width);
    for (const auto& o : s.objects) {
      CHECK(o.class_id >= 0);
      CHECK(o.class_id < cfg.classes);
      CHECK(o.box.x1 >= 0.0);
      CHECK(o.box.y1 >= 0.0);
      CHECK(o.box.x2 <= cfg.scene_width());
      CHECK(o.box.y2 <= cfg.scene_height());
      double side = std::sqrt(o.box.width() * o.box.height());
      CHECK(side >= cfg.size_min - 1e-9);
      CHECK(side <= cfg.size_max + 1e-9);
      CHECK(o.size_bucket == cfg.size_bucket(o.box.width() * o.box.height()));
    }
  }
}

TEST_CASE("class weights shape the class frequencies") {
  DatasetConfig cfg = small_config();
  cfg.class_weights = {4.0, 4.0, 1.0};  // class 2 is minor: 1/9 of draws
  std::vector<int> counts(cfg.classes, 0);
  int total = 0;
  for (int id = 0; id < 600; ++id) {
    Scene s = generate_scene(cfg, id, Domain::source, 11);
    for (const auto& o : s.objects) {
      ++counts[o.class_id];
      ++total;
    }
  }
  double minor = static_cast<double>(counts[2]) / total;
  CHECK(minor > 0.06);
  CHECK(minor < 0.17);
  // Majors are each ~4x the minor frequency.
  CHECK(counts[0] > 2 * counts[2]);
  CHECK(counts[1] > 2 * counts[2]);
}

TEST_CASE("default class weights are uniform") {
  DatasetConfig cfg = small_config();
  std::vector<int> counts(cfg.classes, 0);
  int total = 0;
  for (int id = 0; id < 600; ++id) {
    Scene s = generate_scene(cfg, id, Domain::source, 13);
    for (const auto& o : s.objects) {
      ++counts[o.class_id];
      ++total;
    }
  }
  for (int c = 0; c < cfg.classes; ++c) {
    double f = static_cast<double>(counts[c]) / total;
    CHECK(f > 0.25);
    CHECK(f < 0.42);
  }
}

TEST_CASE("size buckets are terciles of the area range") {
  DatasetConfig cfg = small_config();  // areas 2.25 .. 16, width 13.75
  CHECK(cfg.size_bucket(2.25) == 0);
  CHECK(cfg.size_bucket(2.25 + 13.75 / 3 - 1e-9) == 0);
  CHECK(cfg.size_bucket(2.25 + 13.75 / 3 + 1e-9) == 1);
  CHECK(cfg.size_bucket(2.25 + 2 * 13.75 / 3 + 1e-9) == 2);
  CHECK(cfg.size_bucket(16.0) == 2);
}

TEST_CASE("invalid dataset configs are rejected") {
  DatasetConfig cfg = small_config();
  cfg.channels = 2;  // fewer channels than classes
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = small_config();
  cfg.size_max = 100.0;  // objects no longer fit in the scene
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = small_config();
  cfg.objects_min = 5;
  cfg.objects_max = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = small_config();
  cfg.class_weights = {1.0, 1.0};  // wrong length
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("weak augmentation with zero sigma is the identity") {
  DatasetConfig cfg = small_config();
  Scene s = generate_scene(cfg, 0, Domain::source, 3);
  AugmentConfig acfg;
  acfg.weak_sigma = 0.0;
  FeatureMap out = augment_map(s.fm, AugKind::weak, acfg, 5);
  CHECK(out.data == s.fm.data);
  FeatureMap none = augment_map(s.fm, AugKind::none, cfg.augment, 5);
  CHECK(none.data == s.fm.data);
}

TEST_CASE("augmented views are deterministic in the seed") {
  DatasetConfig cfg = small_config();
  Scene s = generate_scene(cfg, 0, Domain::target, 3);
  for (AugKind kind : {AugKind::weak, AugKind::strong}) {
    FeatureMap a = augment_map(s.fm, kind, cfg.augment, 5);
    FeatureMap b = augment_map(s.fm, kind, cfg.augment, 5);
    FeatureMap c = augment_map(s.fm, kind, cfg.augment, 6);
    CHECK(a.data == b.data);
    CHECK(a.data != c.data);
    CHECK(a.data != s.fm.data);
    CHECK(a.channels == s.fm.channels);
    CHECK(a.width == s.fm.width);
    CHECK(a.height == s.fm.height);
  }
}

TEST_CASE("strong augmentation erases whole cells across channels") {
  DatasetConfig cfg = small_config();
  cfg.background_amplitude = 0.2;  // keep the background visibly nonzero
  Scene s = generate_scene(cfg, 1, Domain::source, 3);
  AugmentConfig acfg = cfg.augment;
  acfg.erase_frac = 0.6;
  acfg.erase_fill = -7.5;  // sentinel no gain/noise combination produces
  FeatureMap out = augment_map(s.fm, AugKind::strong, acfg, 5);

  int erased_cells = 0;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      bool all = true;
      for (int d = 0; d < out.channels; ++d)
        if (out.at(d, y, x) != acfg.erase_fill) all = false;
      if (all) ++erased_cells;
    }
  CHECK(erased_cells > 0);
}

TEST_CASE("split ids cover the configured counts and ranges") {
  DatasetConfig cfg = small_config();
  SplitIds ids = split_ids(cfg);
  REQUIRE(ids.source.size() == static_cast<size_t>(cfg.n_source));
  REQUIRE(ids.target_train.size() == static_cast<size_t>(cfg.n_target_train));
  REQUIRE(ids.target_eval.size() == static_cast<size_t>(cfg.n_target_eval));
  for (size_t i = 0; i < ids.source.size(); ++i) CHECK(ids.source[i] == static_cast<int64_t>(i));
  for (size_t i = 0; i < ids.target_train.size(); ++i)
    CHECK(ids.target_train[i] == 100000 + static_cast<int64_t>(i));
  for (size_t i = 0; i < ids.target_eval.size(); ++i)
    CHECK(ids.target_eval[i] == 200000 + static_cast<int64_t>(i));
}

TEST_CASE("manifest round trip preserves the dataset config") {
  DatasetConfig cfg = small_config();
  cfg.class_weights = {2.0, 1.0, 1.0};
  cfg.minor_classes = {1, 2};
  cfg.shift_angle_deg = 30.0;
  nlohmann::ordered_json j = manifest_to_json(cfg, 123);
  Manifest m = manifest_from_json(j);
  CHECK(m.seed == 123);
  CHECK(m.config.classes == cfg.classes);
  CHECK(m.config.channels == cfg.channels);
  CHECK(m.config.class_weights == cfg.class_weights);
  CHECK(m.config.minor_classes == cfg.minor_classes);
  CHECK(m.config.shift_angle_deg == cfg.shift_angle_deg);
  CHECK(m.config.size_min == cfg.size_min);
  CHECK(m.splits.source.size() == static_cast<size_t>(cfg.n_source));

  // Scenes regenerate identically from the manifest.
  Scene direct = generate_scene(cfg, 100001, Domain::target, 123);
  Scene via = scene_from_manifest(m, 100001);
  CHECK(via.domain == Domain::target);
  CHECK(via.fm.data == direct.fm.data);
  Scene src = scene_from_manifest(m, 2);
  CHECK(src.domain == Domain::source);
}

TEST_CASE("target domain shifts the signal without moving the boxes") {
  DatasetConfig cfg = small_config();
  cfg.target_noise_sigma = 0.0;
  cfg.style_offset = 0.25;
  cfg.shift_angle_deg = 0.0;
  cfg.background_amplitude = 0.0;
  // With no rotation, no noise and no background, target differs from source
  // by exactly the constant style offset on every cell.
  Scene src = generate_scene(cfg, 9, Domain::source, 21);
  Scene tgt = generate_scene(cfg, 9, Domain::target, 21);
  REQUIRE(src.fm.data.size() == tgt.fm.data.size());
  REQUIRE(src.objects.size() == tgt.objects.size());
  for (size_t i = 0; i < src.objects.size(); ++i) {
    CHECK(src.objects[i].box == tgt.objects[i].box);
    CHECK(src.objects[i].class_id == tgt.objects[i].class_id);
  }
  for (size_t i = 0; i < src.fm.data.size(); ++i)
    CHECK(tgt.fm.data[i] == doctest::Approx(src.fm.data[i] + 0.25).epsilon(1e-12));
}

TEST_CASE("signature rotation moves energy into the neighbor channel") {
  DatasetConfig cfg = small_config();
  cfg.target_noise_sigma = 0.0;
  cfg.style_offset = 0.0;
  cfg.background_amplitude = 0.0;
  cfg.shift_angle_deg = 90.0;  // full rotation: class c paints channel c+1
  cfg.objects_min = cfg.objects_max = 1;
  Scene src = generate_scene(cfg, 9, Domain::source, 21);
  Scene tgt = generate_scene(cfg, 9, Domain::target, 21);
  int c = src.objects[0].class_id;
  int next = (c + 1) % cfg.channels;
  double src_c = 0.0, src_next = 0.0, tgt_c = 0.0, tgt_next = 0.0;
  for (int y = 0; y < src.fm.height; ++y)
    for (int x = 0; x < src.fm.width; ++x) {
      src_c += src.fm.at(c, y, x);
      src_next += src.fm.at(next, y, x);
      tgt_c += tgt.fm.at(c, y, x);
      tgt_next += tgt.fm.at(next, y, x);
    }
  CHECK(src_c > 0.1);
  CHECK(src_next == doctest::Approx(0.0));
  CHECK(tgt_c == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(tgt_next == doctest::Approx(src_c));
}
