#include "bodem/oracle.hpp"

#include <algorithm>

namespace bodem::oracle {

double pixel_iou(const Rect& a, const Rect& b) {
  const int x0 = std::min(a.x1, b.x1), x1 = std::max(a.x2, b.x2);
  const int y0 = std::min(a.y1, b.y1), y1 = std::max(a.y2, b.y2);
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool in_a = a.contains(x, y), in_b = b.contains(x, y);
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

namespace {

void split_into(int x1, int y1, int x2, int y2, int min_subarea, std::set<Rect>& out) {
  const int w = x2 - x1, h = y2 - y1;
  if (h >= min_subarea) {
    out.insert(Rect(x1, y1, x2, y1 + h / 2));
    out.insert(Rect(x1, y1 + h / 2, x2, y2));
  }
  if (w >= min_subarea) {
    out.insert(Rect(x1, y1, x1 + w / 2, y2));
    out.insert(Rect(x1 + w / 2, y1, x2, y2));
  }
}

}  // namespace

std::set<Rect> local_area_fixpoint(const Rect& box, int width, int height, int margin,
                                   int min_subarea) {
  const int x1 = std::max(0, box.x1 - margin), y1 = std::max(0, box.y1 - margin);
  const int x2 = std::min(width, box.x2 + margin), y2 = std::min(height, box.y2 + margin);
  std::set<Rect> areas;
  split_into(x1, y1, x2, y2, min_subarea, areas);
  for (;;) {
    std::set<Rect> next = areas;
    for (const Rect& r : areas) split_into(r.x1, r.y1, r.x2, r.y2, min_subarea, next);
    if (next.size() == areas.size()) break;
    areas = std::move(next);
  }
  return areas;
}

std::vector<int> coverage(std::span<const Rect> rects, int width, int height) {
  std::vector<int> count(std::size_t(width) * height, 0);
  for (const Rect& r : rects) {
    for (int y = std::max(r.y1, 0); y < std::min(r.y2, height); ++y) {
      for (int x = std::max(r.x1, 0); x < std::min(r.x2, width); ++x) {
        ++count[std::size_t(y) * width + x];
      }
    }
  }
  return count;
}

std::vector<double> per_pixel_sum(std::span<const Rect> rects, std::span<const double> values,
                                  int width, int height) {
  std::vector<double> sum(std::size_t(width) * height, 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < rects.size(); ++i) {
        if (rects[i].contains(x, y)) s += values[i];
      }
      sum[std::size_t(y) * width + x] = s;
    }
  }
  return sum;
}

}  // namespace bodem::oracle
