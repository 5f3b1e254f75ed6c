#include "lpld/trainloop.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "lpld/errors.hpp"

namespace lpld {

namespace {

constexpr uint64_t kOrderStream = 0x04de4;
constexpr uint64_t kViewStream = 0x71e05;

std::vector<size_t> epoch_order(size_t n, uint64_t seed, int epoch) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(Rng::mix(seed, static_cast<uint64_t>(epoch), kOrderStream));
  rng.shuffle(order);
  return order;
}

uint64_t view_seed(uint64_t seed, int epoch, int64_t scene_id) {
  return Rng::mix(Rng::mix(seed, static_cast<uint64_t>(epoch), kViewStream),
                  static_cast<uint64_t>(scene_id));
}

}  // namespace

nlohmann::ordered_json SceneLogRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["scene_id"] = scene_id;
  j["n_hpl"] = n_hpl;
  j["n_lpl"] = n_lpl;
  j["loss_mt"] = loss_mt;
  j["loss_lpld"] = loss_lpld;
  j["mean_alpha"] = mean_alpha;
  return j;
}

std::vector<SceneLogRecord> adapt_epoch(TrainState& state, const std::vector<Scene>& scenes,
                                        const MiningConfig& mcfg, const TrainConfig& tcfg,
                                        const DetectorConfig& dcfg, const AugmentConfig& acfg,
                                        uint64_t seed) {
  mcfg.validate();
  tcfg.validate();
  dcfg.validate();
  std::vector<SceneLogRecord> log;
  log.reserve(scenes.size());

  const double teacher_digest = state.teacher.checksum();
  std::vector<size_t> order = epoch_order(scenes.size(), seed, state.epoch);

  for (size_t oi = 0; oi < order.size(); ++oi) {
    const Scene& scene = scenes[order[oi]];
    uint64_t vs = view_seed(seed, state.epoch, scene.id);
    FeatureMap weak = augment_map(scene.fm, AugKind::weak, acfg, vs);
    FeatureMap strong = augment_map(scene.fm, AugKind::strong, acfg, vs);

    ProposalSet props = forward(state.teacher, weak, dcfg, scene.id);
    std::vector<HighConfLabel> hpl = extract_hpl(props, mcfg);
    std::vector<LowConfLabel> lpl = mine_lpl(props, hpl, mcfg);

    std::vector<BoxLabel> hpl_boxes;
    hpl_boxes.reserve(hpl.size());
    for (const auto& h : hpl) hpl_boxes.push_back(h.as_box_label());

    std::vector<double> alpha;
    if (tcfg.use_lpl && tcfg.use_adaptive_weights)
      alpha = adaptive_weights(strong, weak, lpl, dcfg.pooled_size);

    TotalLoss tl = total_loss(state.student, strong, hpl_boxes, lpl, alpha, tcfg, dcfg);
    sgd_step(state.student, tl.grads, state.opt, tcfg);

    if (tcfg.ema_per_iteration) ema_update(state.teacher, state.student, tcfg.ema_rate);

    SceneLogRecord rec;
    rec.epoch = state.epoch;
    rec.scene_id = scene.id;
    rec.n_hpl = static_cast<int>(hpl.size());
    rec.n_lpl = static_cast<int>(lpl.size());
    rec.loss_mt = tl.loss_mt;
    rec.loss_lpld = tl.loss_lpld;
    rec.mean_alpha = alpha.empty()
                         ? 0.0
                         : std::accumulate(alpha.begin(), alpha.end(), 0.0) / alpha.size();
    log.push_back(rec);
  }

  if (!tcfg.ema_per_iteration) {
    if (state.teacher.checksum() != teacher_digest)
      throw InternalError("teacher parameters changed outside ema_update");
    ema_update(state.teacher, state.student, tcfg.ema_rate);
  }
  ++state.epoch;
  return log;
}

std::vector<SceneLogRecord> pretrain_epoch(DetectorParams& params, SgdState& opt, int epoch,
                                           const std::vector<Scene>& scenes,
                                           const TrainConfig& tcfg, const DetectorConfig& dcfg,
                                           const AugmentConfig& acfg, uint64_t seed) {
  tcfg.validate();
  dcfg.validate();
  std::vector<SceneLogRecord> log;
  log.reserve(scenes.size());
  std::vector<size_t> order = epoch_order(scenes.size(), seed, epoch);

  for (size_t oi = 0; oi < order.size(); ++oi) {
    const Scene& scene = scenes[order[oi]];
    FeatureMap view = augment_map(scene.fm, AugKind::weak, acfg, view_seed(seed, epoch, scene.id));

    std::vector<BoxLabel> labels;
    labels.reserve(scene.objects.size());
    for (const auto& o : scene.objects) labels.push_back({o.box, o.class_id});

    LossResult res = mt_loss(params, view, labels, dcfg);
    sgd_step(params, res.grads, opt, tcfg);

    SceneLogRecord rec;
    rec.epoch = epoch;
    rec.scene_id = scene.id;
    rec.n_hpl = static_cast<int>(labels.size());
    rec.loss_mt = res.loss;
    log.push_back(rec);
  }
  return log;
}

nlohmann::ordered_json checkpoint_to_json(const TrainState& state) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["epoch"] = state.epoch;
  j["teacher"] = detector_params_to_json(state.teacher);
  j["student"] = detector_params_to_json(state.student);
  j["velocity"] = state.opt.velocity;
  return j;
}

TrainState checkpoint_from_json(const nlohmann::json& j) {
  if (!j.contains("version") || j.at("version").get<int>() != 1)
    throw ConfigError("unsupported checkpoint version");
  TrainState st;
  st.epoch = j.at("epoch").get<int>();
  st.teacher = detector_params_from_json(j.at("teacher"));
  st.student = detector_params_from_json(j.at("student"));
  st.opt.velocity = j.at("velocity").get<std::vector<double>>();
  if (st.opt.velocity.size() != st.student.data.size())
    throw ConfigError("checkpoint velocity length mismatch");
  return st;
}

void save_checkpoint(const TrainState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MissingInputError("cannot write checkpoint: " + path);
  out << checkpoint_to_json(state).dump(2) << '\n';
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace lpld
