#pragma once

#include <optional>
#include <vector>

#include "bodem/core.hpp"

namespace bodem {

enum class MaskKind { local, global };

/// One mask area. Indices are dense 0..N-1 within the set the mask belongs to
/// (the local set, or one global set per cell size).
struct MaskSpec {
  int index = 0;
  MaskKind kind = MaskKind::local;
  Rect area;
  std::optional<int> global_cell;

  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

struct MaskGenConfig {
  int margin = 5;
  int min_subarea = 20;
  std::vector<int> global_cells{20, 50};

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct ImageDims {
  int width = 0;
  int height = 0;
};

/// The box grown by the margin on every side and clamped to the image.
Rect masking_area(const Rect& box, ImageDims dims, int margin);

/// Halves of r produced by one division step: the horizontal cut (top, bottom) when
/// height >= min_subarea, then the vertical cut (left, right) when width >= min_subarea.
/// The first half of an odd span gets floor(span / 2).
std::vector<Rect> bisect(const Rect& r, int min_subarea);

/// Recursive bisection of the masking area. The masking area itself is not part of the
/// result; every sub-area appears once, in breadth-first first-produced order.
std::vector<Rect> local_mask_areas(const Rect& box, ImageDims dims, const MaskGenConfig& cfg);

/// Row-major grid of cell x cell squares from the top-left corner; cells on the right and
/// bottom edges are clipped. Cells are disjoint and cover the image.
std::vector<Rect> global_mask_areas(ImageDims dims, int cell);

std::vector<MaskSpec> local_masks(const Rect& box, ImageDims dims, const MaskGenConfig& cfg);
std::vector<MaskSpec> global_masks(ImageDims dims, int cell);

}  // namespace bodem
