#include "lpld/mining.hpp"

#include <algorithm>

#include "lpld/errors.hpp"

namespace lpld {

void MiningConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1]");
  };
  unit(delta_hc, "delta_hc");
  unit(delta_iou, "delta_iou");
  unit(delta_bg, "delta_bg");
  unit(delta_lc, "delta_lc");
  unit(nms_iou, "nms_iou");
  unit(pre_nms_score, "pre_nms_score");
}

namespace {

struct RenormScore {
  double score = 0.0;  // max foreground probability after renormalization
  int class_id = 0;
};

RenormScore renorm(const ScoreVector& s) {
  double mass = s.foreground_mass();
  if (mass <= 0.0) return {0.0, 0};
  return {s.max_foreground() / mass, s.argmax_foreground()};
}

}  // namespace

std::vector<HighConfLabel> extract_hpl(const ProposalSet& props, const MiningConfig& cfg) {
  cfg.validate();
  const auto& ps = props.proposals;

  struct Candidate {
    int index;
    RenormScore rs;
  };
  std::vector<Candidate> cands;
  for (int i = 0; i < static_cast<int>(ps.size()); ++i) {
    RenormScore rs = renorm(ps[i].scores);
    if (rs.score >= cfg.pre_nms_score) cands.push_back({i, rs});
  }

  // NMS per class (or one global pass), on the renormalized scores.
  std::vector<char> kept(cands.size(), 0);
  auto run_group = [&](const std::vector<size_t>& group) {
    std::vector<ScoredBox> boxes;
    boxes.reserve(group.size());
    for (size_t g : group) boxes.push_back({ps[cands[g].index].box, cands[g].rs.score});
    for (size_t k : nms(boxes, cfg.nms_iou)) kept[group[k]] = 1;
  };
  if (cfg.classwise_nms) {
    int classes = 0;
    for (const auto& c : cands) classes = std::max(classes, c.rs.class_id + 1);
    for (int cls = 0; cls < classes; ++cls) {
      std::vector<size_t> group;
      for (size_t g = 0; g < cands.size(); ++g)
        if (cands[g].rs.class_id == cls) group.push_back(g);
      if (!group.empty()) run_group(group);
    }
  } else {
    std::vector<size_t> group(cands.size());
    for (size_t g = 0; g < cands.size(); ++g) group[g] = g;
    if (!group.empty()) run_group(group);
  }

  // Candidates are already in source order; kept flags were set per group.
  std::vector<HighConfLabel> out;
  for (size_t g = 0; g < cands.size(); ++g) {
    if (!kept[g]) continue;
    if (cands[g].rs.score > cfg.delta_hc)
      out.push_back({ps[cands[g].index].box, ps[cands[g].index].scores, cands[g].rs.class_id});
  }
  return out;
}

MiningStages mine_lpl_stages(const ProposalSet& props, const std::vector<HighConfLabel>& hpl,
                             const MiningConfig& cfg) {
  cfg.validate();
  MiningStages st;
  const auto& ps = props.proposals;

  for (int i = 0; i < static_cast<int>(ps.size()); ++i) {
    bool disjoint = true;
    for (const auto& h : hpl) {
      double v = iou(ps[i].box, h.box);
      if (v != 0.0 && v >= cfg.delta_iou) {
        disjoint = false;
        break;
      }
    }
    if (disjoint) st.after_iou.push_back(i);
  }

  for (int i : st.after_iou)
    if (ps[i].scores.background() < cfg.delta_bg) st.after_bg.push_back(i);

  for (int i : st.after_bg) {
    ForegroundDist amp = amplify(ps[i].scores);
    if (amp.max() > cfg.delta_lc) st.lpl.push_back({ps[i].box, std::move(amp), i});
  }
  return st;
}

std::vector<LowConfLabel> mine_lpl(const ProposalSet& props, const std::vector<HighConfLabel>& hpl,
                                   const MiningConfig& cfg) {
  return mine_lpl_stages(props, hpl, cfg).lpl;
}

}  // namespace lpld
