#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace lpld {

// Axis-aligned rectangle in continuous scene coordinates.
// x1 <= x2 and y1 <= y2; zero-area boxes are valid.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }

  bool operator==(const Box&) const = default;
};

inline double area(const Box& b) { return (b.x2 - b.x1) * (b.y2 - b.y1); }

inline double intersection_area(const Box& a, const Box& b) {
  double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

// Intersection over union. Returns 0 when the union has zero area, so
// zero-area boxes never divide by zero.
inline double iou(const Box& a, const Box& b) {
  double inter = intersection_area(a, b);
  double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

struct ScoredBox {
  Box box;
  double score = 0.0;
};

// Greedy NMS. Keeps the highest-scoring remaining box and suppresses every
// box with IoU strictly greater than iou_thresh against it. Score ties are
// broken by lower original index. Returns kept indices in descending score
// order.
std::vector<size_t> nms(std::span<const ScoredBox> boxes, double iou_thresh);

}  // namespace lpld
