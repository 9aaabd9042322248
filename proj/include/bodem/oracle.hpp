#pragma once

// Brute-force reference computations used by the self-test and the test suites. They share
// no code with the production paths they check.

#include <set>
#include <span>
#include <vector>

#include "bodem/core.hpp"
#include "bodem/maskgen.hpp"

namespace bodem::oracle {

/// IOU by counting pixel membership over the grid spanned by both boxes.
double pixel_iou(const Rect& a, const Rect& b);

/// Set-closure fixpoint of the bisection: split every known sub-area each pass until a pass adds nothing.
std::set<Rect> local_area_fixpoint(const Rect& box, int width, int height, int margin,
                                   int min_subarea);

/// Number of rects covering each pixel, row-major.
std::vector<int> coverage(std::span<const Rect> rects, int width, int height);

/// Per-pixel sum of `values[i]` over every rect i containing the pixel, row-major.
std::vector<double> per_pixel_sum(std::span<const Rect> rects, std::span<const double> values,
                                  int width, int height);

}  // namespace bodem::oracle
