#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "lpld/metrics.hpp"
#include "lpld/rng.hpp"

using namespace lpld;

namespace {

GroundTruthObject gt(Box b, int cls, int bucket = 0) {
  GroundTruthObject o;
  o.box = b;
  o.class_id = cls;
  o.size_bucket = bucket;
  return o;
}

Detection det(Box b, int cls, double score) { return {b, cls, score}; }

// Independent all-point AP: literal precision/recall walk with an O(n^2)
// right-max, sharing only the documented matching rules.
double ap_oracle(const std::vector<SceneEval>& scenes, int cls, double iou_thresh) {
  struct Flat {
    double score;
    int scene;
    Box box;
  };
  std::vector<Flat> dets;
  int n_gt = 0;
  for (size_t s = 0; s < scenes.size(); ++s) {
    for (const auto& d : scenes[s].detections)
      if (d.class_id == cls) dets.push_back({d.score, static_cast<int>(s), d.box});
    for (const auto& g : scenes[s].objects)
      if (g.class_id == cls) ++n_gt;
  }
  if (n_gt == 0) return 0.0;
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Flat& a, const Flat& b) { return a.score > b.score; });

  std::vector<std::vector<char>> used(scenes.size());
  for (size_t s = 0; s < scenes.size(); ++s) used[s].assign(scenes[s].objects.size(), 0);
  std::vector<char> tp;
  for (const auto& d : dets) {
    const auto& gts = scenes[d.scene].objects;
    int best = -1;
    double best_v = 0.0;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].class_id != cls || used[d.scene][g]) continue;
      double v = iou(d.box, gts[g].box);
      if (v >= iou_thresh && v > best_v) {
        best = static_cast<int>(g);
        best_v = v;
      }
    }
    if (best >= 0) {
      used[d.scene][best] = 1;
      tp.push_back(1);
    } else {
      tp.push_back(0);
    }
  }

  std::vector<double> prec, rec;
  int hits = 0;
  for (size_t i = 0; i < tp.size(); ++i) {
    if (tp[i]) ++hits;
    prec.push_back(static_cast<double>(hits) / (i + 1));
    rec.push_back(static_cast<double>(hits) / n_gt);
  }
  double ap = 0.0, prev = 0.0;
  for (size_t i = 0; i < rec.size(); ++i) {
    if (rec[i] <= prev) continue;
    double pmax = 0.0;
    for (size_t j = i; j < prec.size(); ++j) pmax = std::max(pmax, prec[j]);
    ap += (rec[i] - prev) * pmax;
    prev = rec[i];
  }
  return ap;
}

}  // namespace

TEST_CASE("perfect detections score AP 1 on every present class") {
  SceneEval s;
  s.objects = {gt({0, 0, 4, 4}, 0), gt({8, 8, 12, 12}, 1), gt({2, 9, 5, 12}, 0)};
  for (const auto& o : s.objects) s.detections.push_back(det(o.box, o.class_id, 0.9));
  ApResult r = ap50({s}, 3);
  CHECK(r.per_class[0] == doctest::Approx(1.0));
  CHECK(r.per_class[1] == doctest::Approx(1.0));
  CHECK(r.gt_count[2] == 0);
  CHECK(r.map == doctest::Approx(1.0));  // class 2 has no GT and is excluded
}

TEST_CASE("no detections score AP 0") {
  SceneEval s;
  s.objects = {gt({0, 0, 4, 4}, 0)};
  ApResult r = ap50({s}, 2);
  CHECK(r.per_class[0] == 0.0);
  CHECK(r.map == 0.0);
}

TEST_CASE("hand-computed AP with interleaved false positives") {
  SceneEval s;
  s.objects = {gt({0, 0, 4, 4}, 0), gt({10, 0, 14, 4}, 0), gt({0, 10, 4, 14}, 0)};
  s.detections = {
      det({0, 0, 4, 4}, 0, 0.95),      // TP   P=1    R=1/3
      det({20, 20, 24, 24}, 0, 0.90),  // FP   P=1/2
      det({10, 0, 14, 4}, 0, 0.85),    // TP   P=2/3  R=2/3
      det({10.2, 0, 14.2, 4}, 0, 0.80),// FP (GT already claimed)
      det({0, 10, 4, 14}, 0, 0.75),    // TP   P=3/5  R=1
  };
  ApResult r = ap50({s}, 1);
  // (1/3)*1 + (1/3)*(2/3) + (1/3)*(3/5) = 34/45
  CHECK(r.per_class[0] == doctest::Approx(34.0 / 45.0));
  CHECK(r.per_class[0] == doctest::Approx(ap_oracle({s}, 0, 0.5)));
}

TEST_CASE("duplicate detections of one object count once") {
  SceneEval s;
  s.objects = {gt({0, 0, 4, 4}, 0)};
  s.detections = {det({0, 0, 4, 4}, 0, 0.9), det({0.1, 0, 4.1, 4}, 0, 0.8)};
  ApResult r = ap50({s}, 1);
  CHECK(r.per_class[0] == doctest::Approx(1.0));  // FP sits after full recall
  EvalRecord e = evaluate({s}, 1, 0.5);
  CHECK(e.class_tp[0] == 1);
  CHECK(e.class_fp[0] == 1);
  CHECK(e.class_fn[0] == 0);
}

TEST_CASE("ap50 agrees with the oracle on random instances") {
  Rng rng(61);
  const int classes = 4;
  for (int trial = 0; trial < 250; ++trial) {
    std::vector<SceneEval> scenes(1 + rng.uniform_int(3));
    for (auto& s : scenes) {
      int n_gt = static_cast<int>(rng.uniform_int(5));
      for (int i = 0; i < n_gt; ++i) {
        double x = rng.uniform(0, 16), y = rng.uniform(0, 16);
        s.objects.push_back(gt({x, y, x + rng.uniform(2, 5), y + rng.uniform(2, 5)},
                               static_cast<int>(rng.uniform_int(classes))));
      }
      int n_det = static_cast<int>(rng.uniform_int(9));
      for (int i = 0; i < n_det; ++i) {
        Box b;
        if (!s.objects.empty() && rng.uniform(0, 1) < 0.6) {
          const Box& base = s.objects[rng.uniform_int(s.objects.size())].box;
          double dx = rng.uniform(-1.5, 1.5), dy = rng.uniform(-1.5, 1.5);
          b = {base.x1 + dx, base.y1 + dy, base.x2 + dx, base.y2 + dy};
        } else {
          double x = rng.uniform(0, 16), y = rng.uniform(0, 16);
          b = {x, y, x + rng.uniform(2, 5), y + rng.uniform(2, 5)};
        }
        s.detections.push_back(det(b, static_cast<int>(rng.uniform_int(classes)),
                                   rng.uniform(0.05, 1.0)));
      }
    }
    ApResult r = ap50(scenes, classes);
    for (int c = 0; c < classes; ++c)
      CHECK(r.per_class[c] == doctest::Approx(ap_oracle(scenes, c, 0.5)).epsilon(1e-12));
  }
}

TEST_CASE("evaluate counts are conserved") {
  Rng rng(67);
  const int classes = 3;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SceneEval> scenes(2);
    for (auto& s : scenes) {
      int n_gt = static_cast<int>(rng.uniform_int(5));
      for (int i = 0; i < n_gt; ++i) {
        double x = rng.uniform(0, 12), y = rng.uniform(0, 12);
        s.objects.push_back(gt({x, y, x + 3, y + 3}, static_cast<int>(rng.uniform_int(classes)),
                               static_cast<int>(rng.uniform_int(3))));
      }
      int n_det = static_cast<int>(rng.uniform_int(7));
      for (int i = 0; i < n_det; ++i) {
        double x = rng.uniform(0, 12), y = rng.uniform(0, 12);
        s.detections.push_back(det({x, y, x + 3, y + 3},
                                   static_cast<int>(rng.uniform_int(classes)),
                                   rng.uniform(0.0, 1.0)));
      }
    }
    const double thr = 0.5;
    EvalRecord e = evaluate(scenes, classes, thr);
    std::vector<int> gt_per_class(classes, 0), det_per_class(classes, 0);
    int gt_total = 0;
    for (const auto& s : scenes) {
      for (const auto& g : s.objects) {
        ++gt_per_class[g.class_id];
        ++gt_total;
      }
      for (const auto& d : s.detections)
        if (d.score >= thr) ++det_per_class[d.class_id];
    }
    for (int c = 0; c < classes; ++c) {
      CHECK(e.class_tp[c] + e.class_fn[c] == gt_per_class[c]);
      CHECK(e.class_tp[c] + e.class_fp[c] == det_per_class[c]);
    }
    int bucket_total = 0;
    for (int b = 0; b < 3; ++b) bucket_total += e.bucket_tp[b] + e.bucket_fn[b];
    CHECK(bucket_total == gt_total);
  }
}

TEST_CASE("false negative rates at the operating point") {
  SceneEval s;
  s.objects = {gt({0, 0, 4, 4}, 0, 0), gt({8, 8, 12, 12}, 0, 0), gt({0, 8, 4, 12}, 1, 2)};

  SUBCASE("perfect detector misses nothing") {
    for (const auto& o : s.objects) s.detections.push_back(det(o.box, o.class_id, 0.9));
    EvalRecord e = evaluate({s}, 2);
    CHECK(*e.class_fnr(0) == 0.0);
    CHECK(*e.class_fnr(1) == 0.0);
    CHECK(*e.bucket_fnr(0) == 0.0);
    CHECK(!e.bucket_fnr(1));  // no medium objects anywhere
  }
  SUBCASE("silent detector misses everything") {
    EvalRecord e = evaluate({s}, 2);
    CHECK(*e.class_fnr(0) == 1.0);
    CHECK(*e.group_fnr({0, 1}) == 1.0);
    CHECK(*e.bucket_fnr(2) == 1.0);
  }
  SUBCASE("one missed small object") {
    s.detections = {det({0, 0, 4, 4}, 0, 0.9), det({0, 8, 4, 12}, 1, 0.9)};
    EvalRecord e = evaluate({s}, 2);
    CHECK(*e.class_fnr(0) == doctest::Approx(0.5));
    CHECK(*e.bucket_fnr(0) == doctest::Approx(0.5));  // 1 of 2 small GT missed
    CHECK(*e.bucket_fnr(2) == 0.0);
  }
  SUBCASE("low-scoring detections fall below the operating point") {
    for (const auto& o : s.objects) s.detections.push_back(det(o.box, o.class_id, 0.2));
    EvalRecord e = evaluate({s}, 2, 0.5);
    CHECK(*e.class_fnr(0) == 1.0);   // AP still sees them...
    CHECK(e.class_ap[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("confidence-iou histogram bins every proposal exactly once") {
  Rng rng(71);
  HistogramGrid grid(50);
  int64_t pushed = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ProposalSet props;
    int n = static_cast<int>(rng.uniform_int(30));
    for (int i = 0; i < n; ++i) {
      Proposal p;
      double x = rng.uniform(0, 12), y = rng.uniform(0, 12);
      p.box = {x, y, x + rng.uniform(1, 4), y + rng.uniform(1, 4)};
      std::vector<double> z = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      p.scores = softmax(z);
      props.proposals.push_back(p);
    }
    std::vector<GroundTruthObject> gts;
    for (int i = 0; i < 3; ++i) {
      double x = rng.uniform(0, 12), y = rng.uniform(0, 12);
      gts.push_back(gt({x, y, x + 3, y + 3}, 0));
    }
    conf_iou_histogram(grid, props, gts);
    pushed += n;
  }
  CHECK(grid.total() == pushed);
}

TEST_CASE("histogram corner cases") {
  HistogramGrid grid(50);
  SUBCASE("no ground truth lands in the zero-iou column") {
    ProposalSet props;
    Proposal p;
    p.box = {0, 0, 2, 2};
    p.scores.probs = {0.5, 0.3, 0.2};
    props.proposals.push_back(p);
    conf_iou_histogram(grid, props, {});
    int64_t col0 = 0;
    for (int ci = 0; ci < grid.bins; ++ci) col0 += grid.at(ci, 0);
    CHECK(col0 == 1);
    CHECK(grid.total() == 1);
  }
  SUBCASE("a confident exact hit lands in the top corner bin") {
    ProposalSet props;
    Proposal p;
    p.box = {0, 0, 2, 2};
    p.scores.probs = {0.998, 0.001, 0.001};  // renormalized max ~0.999
    props.proposals.push_back(p);
    conf_iou_histogram(grid, props, {gt({0, 0, 2, 2}, 0)});
    CHECK(grid.at(grid.bins - 1, grid.bins - 1) == 1);
  }
}

TEST_CASE("mean confidence over high-iou bins uses bin midpoints") {
  HistogramGrid grid(50);
  grid.at(49, 49) = 2;
  grid.at(10, 0) = 1;
  auto high = grid.mean_confidence_min_iou(0.5);
  REQUIRE(high);
  CHECK(*high == doctest::Approx(0.99));
  auto all = grid.mean_confidence_min_iou(0.0);
  REQUIRE(all);
  CHECK(*all == doctest::Approx((2 * 0.99 + 1 * 0.21) / 3.0));
  HistogramGrid empty(50);
  CHECK(!empty.mean_confidence_min_iou(0.5));
}

TEST_CASE("class alignment across mining stages") {
  ProposalSet props;
  auto push = [&](Box b, std::vector<double> probs) {
    Proposal p;
    p.box = b;
    p.scores.probs = std::move(probs);
    props.proposals.push_back(p);
  };
  std::vector<GroundTruthObject> gts = {gt({0, 0, 4, 4}, 1), gt({10, 10, 14, 14}, 0)};
  push({0, 0, 4, 4}, {0.2, 0.5, 0.3});        // raw argmax 1, on class-1 GT: aligned
  push({0.2, 0.2, 4.2, 4.2}, {0.5, 0.2, 0.3}); // raw argmax 0 on class-1 GT: misaligned
  push({10, 10, 14, 14}, {0.4, 0.1, 0.5});     // raw argmax 0 on class-0 GT: aligned
  push({5.5, 5.5, 6.5, 6.5}, {0.4, 0.1, 0.5}); // under the IoU floor: misaligned

  MiningStages stages;
  stages.after_iou = {0, 1, 2, 3};
  stages.after_bg = {0, 1};
  LowConfLabel l;
  l.box = {0, 0, 4, 4};
  l.amp.probs = {0.3, 0.7};
  l.source_index = 0;
  stages.lpl = {l};

  AlignmentReport r = class_alignment_ratio(props, stages, gts);
  CHECK(r.after_iou.total == 4);
  CHECK(r.after_iou.aligned == 2);
  CHECK(*r.after_iou.ratio() == doctest::Approx(0.5));
  CHECK(*r.after_bg.ratio() == doctest::Approx(0.5));
  CHECK(r.lpl.total == 1);
  CHECK(*r.lpl.ratio() == doctest::Approx(1.0));

  MiningStages none;
  AlignmentReport empty = class_alignment_ratio(props, none, gts);
  CHECK(!empty.after_iou.ratio());
  CHECK(!empty.lpl.ratio());
}

TEST_CASE("csv serializations carry complete tables") {
  EvalRecord e;
  e.class_ap = {0.5, 1.0};
  e.class_gt = {2, 1};
  e.class_tp = {1, 1};
  e.class_fp = {0, 2};
  e.class_fn = {1, 0};
  std::string csv = eval_record_to_csv(e);
  std::istringstream is(csv);
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 1 + 2 + 3 + 1);  // header, classes, buckets, summary
  CHECK(csv.find("row,id,ap50,gt,tp,fp,fn,fnr") == 0);
  CHECK(csv.find("summary,map,") != std::string::npos);

  HistogramGrid g(10);
  g.at(3, 4) = 7;
  std::string hcsv = histogram_to_csv(g);
  std::istringstream hs(hcsv);
  rows = 0;
  while (std::getline(hs, line)) ++rows;
  CHECK(rows == 1 + 10 * 10);
  CHECK(hcsv.find("3,4,") != std::string::npos);

  AlignmentReport ar;
  ar.after_iou = {1, 2};
  std::string acsv = alignment_to_csv(ar);
  CHECK(acsv.find("stage,aligned,total,ratio") == 0);
  CHECK(acsv.find("after_iou,1,2,0.5") != std::string::npos);
  CHECK(acsv.find("lpl,0,0,") != std::string::npos);
}
