#include "bodem/maskgen.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>

namespace bodem {

void MaskGenConfig::validate() const {
  if (margin < 0) throw std::invalid_argument("margin must be >= 0");
  if (min_subarea < 2) throw std::invalid_argument("min_subarea must be >= 2");
  for (int c : global_cells) {
    if (c < 1) throw std::invalid_argument("global cell sizes must be >= 1");
  }
}

Rect masking_area(const Rect& box, ImageDims dims, int margin) {
  auto ma = clamp_to(box.x1 - margin, box.y1 - margin, box.x2 + margin, box.y2 + margin,
                     dims.width, dims.height);
  if (!ma) throw BoundsError("box " + to_string(box) + " outside image");
  return *ma;
}

std::vector<Rect> bisect(const Rect& r, int min_subarea) {
  std::vector<Rect> halves;
  if (r.height() >= min_subarea) {
    const int mid = r.y1 + r.height() / 2;
    halves.emplace_back(r.x1, r.y1, r.x2, mid);
    halves.emplace_back(r.x1, mid, r.x2, r.y2);
  }
  if (r.width() >= min_subarea) {
    const int mid = r.x1 + r.width() / 2;
    halves.emplace_back(r.x1, r.y1, mid, r.y2);
    halves.emplace_back(mid, r.y1, r.x2, r.y2);
  }
  return halves;
}

std::vector<Rect> local_mask_areas(const Rect& box, ImageDims dims, const MaskGenConfig& cfg) {
  const Rect ma = masking_area(box, dims, cfg.margin);

  std::vector<Rect> ordered;
  std::set<Rect> seen;
  std::deque<Rect> pending{ma};
  while (!pending.empty()) {
    const Rect next = pending.front();
    pending.pop_front();
    for (const Rect& half : bisect(next, cfg.min_subarea)) {
      if (seen.insert(half).second) {
        ordered.push_back(half);
        pending.push_back(half);
      }
    }
  }
  return ordered;
}

std::vector<Rect> global_mask_areas(ImageDims dims, int cell) {
  if (cell < 1) throw std::invalid_argument("global cell size must be >= 1");
  std::vector<Rect> cells;
  for (int y = 0; y < dims.height; y += cell) {
    for (int x = 0; x < dims.width; x += cell) {
      cells.emplace_back(x, y, std::min(x + cell, dims.width), std::min(y + cell, dims.height));
    }
  }
  return cells;
}

std::vector<MaskSpec> local_masks(const Rect& box, ImageDims dims, const MaskGenConfig& cfg) {
  std::vector<MaskSpec> masks;
  for (const Rect& r : local_mask_areas(box, dims, cfg)) {
    masks.push_back({int(masks.size()), MaskKind::local, r, std::nullopt});
  }
  return masks;
}

std::vector<MaskSpec> global_masks(ImageDims dims, int cell) {
  std::vector<MaskSpec> masks;
  for (const Rect& r : global_mask_areas(dims, cell)) {
    masks.push_back({int(masks.size()), MaskKind::global, r, cell});
  }
  return masks;
}

}  // namespace bodem
