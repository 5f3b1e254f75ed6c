#include "lpld/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "lpld/errors.hpp"
#include "lpld/metrics.hpp"
#include "lpld/trainloop.hpp"

namespace fs = std::filesystem;

namespace lpld {

namespace {

constexpr uint64_t kInitStream = 0x1217;

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const MissingInputError& e) {
    std::cerr << "missing input: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw MissingInputError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

// Wall-clock metadata lives in its own sidecar so every other artifact
// stays byte-identical across reruns.
void write_meta(const fs::path& dir, const std::string& command) {
  auto now = std::chrono::system_clock::now();
  auto t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  nlohmann::ordered_json j;
  j["command"] = command;
  j["timestamp"] = buf;
  write_json(dir / ("meta_" + command + ".json"), j);
}

Manifest require_manifest(const CliOptions& opts, const RunConfig& cfg) {
  std::string path = opts.manifest.empty()
                         ? (fs::path(cfg.out_dir) / "manifest.json").string()
                         : opts.manifest;
  return load_manifest(path);
}

TrainState require_checkpoint(const CliOptions& opts, const RunConfig& cfg) {
  if (opts.checkpoint.empty()) throw MissingInputError("no checkpoint given (--checkpoint)");
  TrainState st = load_checkpoint(opts.checkpoint);
  if (!st.teacher.shape_matches(cfg.detector) || !st.student.shape_matches(cfg.detector))
    throw ConfigError("checkpoint shape does not match detector config");
  return st;
}

std::vector<Scene> build_scenes(const Manifest& m, const std::vector<int64_t>& ids) {
  std::vector<Scene> scenes;
  scenes.reserve(ids.size());
  for (int64_t id : ids) scenes.push_back(scene_from_manifest(m, id));
  return scenes;
}

const std::vector<int64_t>& split_of(const Manifest& m, const std::string& name) {
  if (name == "source") return m.splits.source;
  if (name == "target_train") return m.splits.target_train;
  if (name == "target_eval") return m.splits.target_eval;
  throw ConfigError("unknown split: " + name);
}

// Teacher-side detections over raw scene maps, the evaluation convention
// for every checkpoint (for a pretrain checkpoint teacher == student).
std::vector<SceneEval> run_detector(const DetectorParams& params, const std::vector<Scene>& scenes,
                                    const DetectorConfig& dcfg) {
  std::vector<SceneEval> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) {
    SceneEval e;
    e.detections = detect(params, s.fm, dcfg);
    e.objects = s.objects;
    out.push_back(std::move(e));
  }
  return out;
}

EvalRecord eval_split(const DetectorParams& params, const Manifest& m, const std::string& split,
                      const RunConfig& cfg) {
  std::vector<Scene> scenes = build_scenes(m, split_of(m, split));
  return evaluate(run_detector(params, scenes, cfg.detector), cfg.detector.classes,
                  cfg.metrics.fnr_score_threshold);
}

nlohmann::ordered_json epoch_eval_line(int epoch, const EvalRecord& r,
                                       const std::vector<int>& minor_classes, int classes) {
  std::vector<int> major;
  for (int c = 0; c < classes; ++c)
    if (std::find(minor_classes.begin(), minor_classes.end(), c) == minor_classes.end())
      major.push_back(c);
  auto opt_json = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["map"] = r.map;
  j["small_fnr"] = opt_json(r.bucket_fnr(0));
  j["medium_fnr"] = opt_json(r.bucket_fnr(1));
  j["large_fnr"] = opt_json(r.bucket_fnr(2));
  j["minor_fnr"] = opt_json(r.group_fnr(minor_classes));
  j["major_fnr"] = opt_json(r.group_fnr(major));
  return j;
}

nlohmann::ordered_json box_json(const Box& b) {
  return nlohmann::ordered_json::array({b.x1, b.y1, b.x2, b.y2});
}

}  // namespace

RunConfig effective_config(const CliOptions& opts) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  if (opts.use_hpl) cfg.train.use_hpl = *opts.use_hpl;
  if (opts.use_lpl) cfg.train.use_lpl = *opts.use_lpl;
  if (opts.use_adaptive_weights) cfg.train.use_adaptive_weights = *opts.use_adaptive_weights;
  if (opts.lpl_loss_kind) cfg.train.lpl_loss_kind = lpl_loss_kind_from_string(*opts.lpl_loss_kind);
  cfg.validate();
  return cfg;
}

int cmd_gen(const CliOptions& opts) {
  return guarded([&] {
    RunConfig cfg = effective_config(opts);
    fs::path dir(cfg.out_dir);
    write_json(dir / "manifest.json", manifest_to_json(cfg.dataset, cfg.seed));
    write_meta(dir, "gen");
    std::cout << "wrote " << (dir / "manifest.json").string() << '\n';
  });
}

int cmd_pretrain(const CliOptions& opts) {
  return guarded([&] {
    RunConfig cfg = effective_config(opts);
    Manifest m = require_manifest(opts, cfg);
    fs::path dir(cfg.out_dir);

    std::vector<Scene> source = build_scenes(m, m.splits.source);
    Rng init_rng(Rng::mix(cfg.seed, 0, kInitStream));
    DetectorParams params =
        DetectorParams::random_init(cfg.detector, init_rng, cfg.train.init_scale);
    SgdState opt;
    opt.reset(params.data.size());

    std::ostringstream log;
    for (int e = 0; e < cfg.train.pretrain_epochs; ++e) {
      for (const auto& rec :
           pretrain_epoch(params, opt, e, source, cfg.train, cfg.detector, cfg.dataset.augment,
                          cfg.seed))
        log << rec.to_json().dump() << '\n';
    }
    write_text(dir / "pretrain_log.jsonl", log.str());

    TrainState st;
    st.teacher = params;
    st.student = params;
    st.opt.reset(params.data.size());
    st.epoch = 0;
    save_checkpoint(st, (dir / "checkpoint_pretrain.json").string());

    EvalRecord on_source = eval_split(params, m, "source", cfg);
    EvalRecord on_target = eval_split(params, m, "target_eval", cfg);
    write_json(dir / "eval_pretrain_source.json", eval_record_to_json(on_source));
    write_text(dir / "eval_pretrain_source.csv", eval_record_to_csv(on_source));
    write_json(dir / "eval_pretrain_target.json", eval_record_to_json(on_target));
    write_text(dir / "eval_pretrain_target.csv", eval_record_to_csv(on_target));
    write_meta(dir, "pretrain");
    std::cout << "source map " << on_source.map << ", target map " << on_target.map << '\n';
  });
}

int cmd_adapt(const CliOptions& opts) {
  return guarded([&] {
    RunConfig cfg = effective_config(opts);
    Manifest m = require_manifest(opts, cfg);
    fs::path dir(cfg.out_dir);
    TrainState st = require_checkpoint(opts, cfg);

    std::vector<Scene> train_scenes = build_scenes(m, m.splits.target_train);

    std::ostringstream log, eval_log;
    for (int e = 0; e < cfg.train.epochs; ++e) {
      for (const auto& rec : adapt_epoch(st, train_scenes, cfg.mining, cfg.train, cfg.detector,
                                         cfg.dataset.augment, cfg.seed))
        log << rec.to_json().dump() << '\n';
      EvalRecord r = eval_split(st.teacher, m, "target_eval", cfg);
      eval_log << epoch_eval_line(st.epoch, r, cfg.dataset.minor_classes, cfg.detector.classes)
                      .dump()
               << '\n';
    }
    write_text(dir / "adapt_log.jsonl", log.str());
    write_text(dir / "adapt_eval.jsonl", eval_log.str());
    save_checkpoint(st, (dir / "checkpoint_adapted.json").string());

    EvalRecord final_eval = eval_split(st.teacher, m, "target_eval", cfg);
    write_json(dir / "eval_adapted_target.json", eval_record_to_json(final_eval));
    write_text(dir / "eval_adapted_target.csv", eval_record_to_csv(final_eval));
    write_meta(dir, "adapt");
    std::cout << "adapted target map " << final_eval.map << '\n';
  });
}

int cmd_eval(const CliOptions& opts) {
  return guarded([&] {
    RunConfig cfg = effective_config(opts);
    Manifest m = require_manifest(opts, cfg);
    fs::path dir(cfg.out_dir);
    TrainState st = require_checkpoint(opts, cfg);

    EvalRecord r = eval_split(st.teacher, m, opts.split, cfg);
    write_json(dir / ("eval_" + opts.split + ".json"), eval_record_to_json(r));
    write_text(dir / ("eval_" + opts.split + ".csv"), eval_record_to_csv(r));
    write_meta(dir, "eval");
    std::cout << opts.split << " map " << r.map << '\n';
  });
}

int cmd_mine(const CliOptions& opts) {
  return guarded([&] {
    RunConfig cfg = effective_config(opts);
    Manifest m = require_manifest(opts, cfg);
    fs::path dir(cfg.out_dir);
    TrainState st = require_checkpoint(opts, cfg);

    auto in_split = [&](const std::vector<int64_t>& ids) {
      return std::find(ids.begin(), ids.end(), opts.scene_id) != ids.end();
    };
    if (!in_split(m.splits.source) && !in_split(m.splits.target_train) &&
        !in_split(m.splits.target_eval))
      throw ConfigError("scene_id not present in the manifest");

    Scene scene = scene_from_manifest(m, opts.scene_id);
    ProposalSet props = forward(st.teacher, scene.fm, cfg.detector, scene.id);
    std::vector<HighConfLabel> hpl = extract_hpl(props, cfg.mining);
    std::vector<LowConfLabel> lpl = mine_lpl(props, hpl, cfg.mining);

    nlohmann::ordered_json j;
    j["scene_id"] = scene.id;
    j["hpl"] = nlohmann::ordered_json::array();
    for (const auto& h : hpl) {
      nlohmann::ordered_json e;
      e["box"] = box_json(h.box);
      e["scores"] = h.scores.probs;
      e["class_id"] = h.class_id;
      j["hpl"].push_back(e);
    }
    j["lpl"] = nlohmann::ordered_json::array();
    for (const auto& l : lpl) {
      nlohmann::ordered_json e;
      e["box"] = box_json(l.box);
      e["amp"] = l.amp.probs;
      e["source_index"] = l.source_index;
      j["lpl"].push_back(e);
    }
    fs::path out = opts.dump.empty()
                       ? dir / ("mine_" + std::to_string(opts.scene_id) + ".json")
                       : fs::path(opts.dump);
    write_json(out, j);
    std::cout << "wrote " << out.string() << '\n';
  });
}

int cmd_report(const CliOptions& opts) {
  return guarded([&] {
    RunConfig cfg = effective_config(opts);
    Manifest m = require_manifest(opts, cfg);
    fs::path dir(cfg.out_dir);

    // FNR per epoch, from the adaptation eval log.
    std::ifstream eval_log(dir / "adapt_eval.jsonl");
    if (!eval_log)
      throw MissingInputError("no adapt_eval.jsonl in " + dir.string() + " (run adapt first)");
    std::ostringstream fnr_csv;
    fnr_csv << "epoch,map,small_fnr,medium_fnr,large_fnr,minor_fnr,major_fnr\n";
    std::string line;
    auto cell = [](const nlohmann::json& v) {
      if (v.is_null()) return std::string();
      std::ostringstream os;
      os.precision(17);
      os << v.get<double>();
      return os.str();
    };
    while (std::getline(eval_log, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      fnr_csv << j.at("epoch").get<int>() << ',' << cell(j.at("map")) << ','
              << cell(j.at("small_fnr")) << ',' << cell(j.at("medium_fnr")) << ','
              << cell(j.at("large_fnr")) << ',' << cell(j.at("minor_fnr")) << ','
              << cell(j.at("major_fnr")) << '\n';
    }
    write_text(dir / "report_fnr_per_epoch.csv", fnr_csv.str());

    // Confidence-vs-IoU histograms of teacher proposals over the eval
    // split, before and after adaptation.
    TrainState source_ckpt = load_checkpoint((dir / "checkpoint_pretrain.json").string());
    TrainState adapted_ckpt = load_checkpoint((dir / "checkpoint_adapted.json").string());
    std::vector<Scene> eval_scenes = build_scenes(m, m.splits.target_eval);
    HistogramGrid before(cfg.metrics.histogram_bins), after(cfg.metrics.histogram_bins);
    for (const auto& s : eval_scenes) {
      conf_iou_histogram(before, forward(source_ckpt.teacher, s.fm, cfg.detector, s.id), s.objects);
      conf_iou_histogram(after, forward(adapted_ckpt.teacher, s.fm, cfg.detector, s.id), s.objects);
    }
    write_text(dir / "report_conf_iou_source.csv", histogram_to_csv(before));
    write_text(dir / "report_conf_iou_adapted.csv", histogram_to_csv(after));

    // Class alignment through the mining stages, source teacher on target
    // training scenes.
    AlignmentReport align;
    for (const auto& s : build_scenes(m, m.splits.target_train)) {
      ProposalSet props = forward(source_ckpt.teacher, s.fm, cfg.detector, s.id);
      MiningStages stages = mine_lpl_stages(props, extract_hpl(props, cfg.mining), cfg.mining);
      accumulate_alignment(align, props, stages, s.objects);
    }
    write_text(dir / "report_alignment.csv", alignment_to_csv(align));

    // TP/FN per ground-truth instance against its scale, adapted teacher,
    // matched greedily at the operating threshold like evaluate().
    std::ostringstream scatter;
    scatter << "scene_id,class_id,scale,bucket,detected\n";
    for (const auto& s : eval_scenes) {
      std::vector<Detection> dets = detect(adapted_ckpt.teacher, s.fm, cfg.detector);
      std::vector<char> hit(s.objects.size(), 0);
      std::vector<std::pair<double, size_t>> order;
      for (size_t d = 0; d < dets.size(); ++d)
        if (dets[d].score >= cfg.metrics.fnr_score_threshold)
          order.push_back({-dets[d].score, d});
      std::stable_sort(order.begin(), order.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      for (auto [neg_score, d] : order) {
        const auto& det = dets[d];
        int best = -1;
        double best_v = 0.0;
        for (size_t g = 0; g < s.objects.size(); ++g) {
          if (hit[g] || s.objects[g].class_id != det.class_id) continue;
          double v = iou(det.box, s.objects[g].box);
          if (v >= 0.5 && v > best_v) {
            best = static_cast<int>(g);
            best_v = v;
          }
        }
        if (best >= 0) hit[best] = 1;
      }
      for (size_t g = 0; g < s.objects.size(); ++g) {
        const auto& o = s.objects[g];
        std::ostringstream sc;
        sc.precision(17);
        sc << std::sqrt(area(o.box));
        scatter << s.id << ',' << o.class_id << ',' << sc.str() << ',' << o.size_bucket << ','
                << int(hit[g]) << '\n';
      }
    }
    write_text(dir / "report_scale_scatter.csv", scatter.str());
    write_meta(dir, "report");
    std::cout << "wrote reports to " << dir.string() << '\n';
  });
}

}  // namespace lpld
