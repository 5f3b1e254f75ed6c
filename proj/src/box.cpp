#include "lpld/box.hpp"

#include <algorithm>
#include <numeric>

namespace lpld {

std::vector<size_t> nms(std::span<const ScoredBox> boxes, double iou_thresh) {
  std::vector<size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return boxes[a].score > boxes[b].score;
  });

  std::vector<char> suppressed(boxes.size(), 0);
  std::vector<size_t> kept;
  for (size_t oi = 0; oi < order.size(); ++oi) {
    size_t i = order[oi];
    if (suppressed[i]) continue;
    kept.push_back(i);
    for (size_t oj = oi + 1; oj < order.size(); ++oj) {
      size_t j = order[oj];
      if (suppressed[j]) continue;
      if (iou(boxes[i].box, boxes[j].box) > iou_thresh) suppressed[j] = 1;
    }
  }
  return kept;
}

}  // namespace lpld
