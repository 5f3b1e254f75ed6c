#pragma once

#include <vector>

#include "lpld/box.hpp"

namespace lpld {

// Dense feature grid. data is channel-major: data[d*H*W + y*W + x].
// scale converts cell units to scene units (scene = cell * scale); the
// center of cell (x, y) sits at scene point ((x+0.5)*scale, (y+0.5)*scale).
struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  double scale = 1.0;
  std::vector<double> data;

  static FeatureMap zeros(int channels, int height, int width, double scale = 1.0);

  double& at(int d, int y, int x) { return data[(d * height + y) * width + x]; }
  double at(int d, int y, int x) const { return data[(d * height + y) * width + x]; }

  double scene_width() const { return width * scale; }
  double scene_height() const { return height * scale; }
};

// Pooled per-proposal feature vector of length channels * P * P,
// channel-major.
struct RoiFeature {
  std::vector<double> values;
  int source_index = -1;
};

// Samples P x P points at the centers of a uniform P x P partition of the
// box, each via bilinear interpolation with border clamping. Boxes partly
// or fully outside the map read clamped border values.
RoiFeature roi_align(const FeatureMap& fm, const Box& b, int pooled_size);

// Accumulates d(loss)/d(feature map values) for a roi_align call, given the
// gradient w.r.t. the pooled output. roi_align is linear in the map, so this
// scatters the same bilinear weights the forward pass gathered.
void roi_align_backward(const FeatureMap& fm, const Box& b, int pooled_size,
                        const std::vector<double>& grad_output,
                        std::vector<double>& grad_map);

// 1 - cosine similarity, in [0, 2]. Returns 0 when either vector has
// L2 norm below 1e-12, collapsing the weight of a degenerate feature.
double cosine_distance(const RoiFeature& a, const RoiFeature& b);

}  // namespace lpld
