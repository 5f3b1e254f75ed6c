#include "lpld/featmap.hpp"

#include <algorithm>
#include <cmath>

namespace lpld {

namespace {

struct BilinearTaps {
  int x0, x1, y0, y1;
  double w00, w01, w10, w11;  // (y,x): 00=(y0,x0), 01=(y0,x1), 10=(y1,x0), 11=(y1,x1)
};

// Tap positions and weights for one scene-space sample point.
BilinearTaps taps_at(const FeatureMap& fm, double sx, double sy) {
  double u = sx / fm.scale - 0.5;
  double v = sy / fm.scale - 0.5;
  u = std::clamp(u, 0.0, static_cast<double>(fm.width - 1));
  v = std::clamp(v, 0.0, static_cast<double>(fm.height - 1));
  BilinearTaps t;
  t.x0 = static_cast<int>(std::floor(u));
  t.y0 = static_cast<int>(std::floor(v));
  t.x1 = std::min(t.x0 + 1, fm.width - 1);
  t.y1 = std::min(t.y0 + 1, fm.height - 1);
  double fx = u - t.x0;
  double fy = v - t.y0;
  t.w00 = (1.0 - fy) * (1.0 - fx);
  t.w01 = (1.0 - fy) * fx;
  t.w10 = fy * (1.0 - fx);
  t.w11 = fy * fx;
  return t;
}

}  // namespace

FeatureMap FeatureMap::zeros(int channels, int height, int width, double scale) {
  FeatureMap fm;
  fm.channels = channels;
  fm.height = height;
  fm.width = width;
  fm.scale = scale;
  fm.data.assign(static_cast<size_t>(channels) * height * width, 0.0);
  return fm;
}

RoiFeature roi_align(const FeatureMap& fm, const Box& b, int pooled_size) {
  const int P = pooled_size;
  RoiFeature out;
  out.values.assign(static_cast<size_t>(fm.channels) * P * P, 0.0);
  double bw = b.x2 - b.x1;
  double bh = b.y2 - b.y1;
  for (int py = 0; py < P; ++py) {
    for (int px = 0; px < P; ++px) {
      double sx = b.x1 + (px + 0.5) / P * bw;
      double sy = b.y1 + (py + 0.5) / P * bh;
      BilinearTaps t = taps_at(fm, sx, sy);
      for (int d = 0; d < fm.channels; ++d) {
        double v = t.w00 * fm.at(d, t.y0, t.x0) + t.w01 * fm.at(d, t.y0, t.x1) +
                   t.w10 * fm.at(d, t.y1, t.x0) + t.w11 * fm.at(d, t.y1, t.x1);
        out.values[(static_cast<size_t>(d) * P + py) * P + px] = v;
      }
    }
  }
  return out;
}

void roi_align_backward(const FeatureMap& fm, const Box& b, int pooled_size,
                        const std::vector<double>& grad_output,
                        std::vector<double>& grad_map) {
  const int P = pooled_size;
  const size_t hw = static_cast<size_t>(fm.height) * fm.width;
  double bw = b.x2 - b.x1;
  double bh = b.y2 - b.y1;
  for (int py = 0; py < P; ++py) {
    for (int px = 0; px < P; ++px) {
      double sx = b.x1 + (px + 0.5) / P * bw;
      double sy = b.y1 + (py + 0.5) / P * bh;
      BilinearTaps t = taps_at(fm, sx, sy);
      for (int d = 0; d < fm.channels; ++d) {
        double g = grad_output[(static_cast<size_t>(d) * P + py) * P + px];
        grad_map[d * hw + t.y0 * fm.width + t.x0] += g * t.w00;
        grad_map[d * hw + t.y0 * fm.width + t.x1] += g * t.w01;
        grad_map[d * hw + t.y1 * fm.width + t.x0] += g * t.w10;
        grad_map[d * hw + t.y1 * fm.width + t.x1] += g * t.w11;
      }
    }
  }
}

double cosine_distance(const RoiFeature& a, const RoiFeature& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return 1.0 - dot / (na * nb);
}

}  // namespace lpld
