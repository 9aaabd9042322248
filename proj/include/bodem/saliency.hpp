#pragma once

#include <Eigen/Core>

#include <charconv>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bodem/core.hpp"
#include "bodem/inquiry.hpp"
#include "bodem/maskgen.hpp"

namespace bodem {

/// Raised when inquiry results and masks disagree (a mask has no detections recorded).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Per-pixel importance for one explained box. Stored row-major with one row per image
/// row, so values(y, x) addresses pixel (x, y).
template <typename Scalar = double>
struct SaliencyMap {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Array values;
  bool normalized = false;

  static SaliencyMap zero(ImageDims dims) {
    return {Array::Zero(dims.height, dims.width), false};
  }

  int width() const { return int(values.cols()); }
  int height() const { return int(values.rows()); }
  Scalar at(int x, int y) const { return values(y, x); }
  bool all_zero() const { return (values == Scalar(0)).all(); }

  auto block(const Rect& r) { return values.block(r.y1, r.x1, r.height(), r.width()); }
  auto block(const Rect& r) const { return values.block(r.y1, r.x1, r.height(), r.width()); }
};

/// IOU schedule for the dynamic sweep: base, base + step, ... up to max.
struct ThresholdSchedule {
  double base = 0.8;
  double step = 0.05;
  double max = 1.0;

  void validate() const;
  /// The thresholds in sweep order. Grid points are snapped to 1e-6 so that base + k*step
  /// lands on the nearest double of the decimal value; the last point is always max.
  std::vector<double> grid() const;
};

/// Largest IOU between b and any box of `found`; 0 when `found` is empty.
double similarity(const BBox& b, const DetectionSet& found);

/// Output change caused by a mask: 0 when similarity >= threshold, the penalty when
/// nothing overlapping b was found, otherwise 1 / similarity (the smallest 1/IOU distance).
double difference(const BBox& b, const DetectionSet& found, double threshold, double penalty);

/// Penalty for a mask that removes every detection overlapping b: w + h of the image.
inline double miss_penalty(ImageDims dims) { return double(dims.width) + double(dims.height); }

/// difference() for each mask, in mask order.
std::vector<double> mask_differences(const BBox& b, std::span<const MaskSpec> masks,
                                     const InquiryResult& result, ImageDims dims,
                                     double threshold);

/// Accumulates each mask's difference over its area, in mask order. Un-normalized.
template <typename Scalar = double>
SaliencyMap<Scalar> estimate(const BBox& b, std::span<const MaskSpec> masks,
                             const InquiryResult& result, ImageDims dims, double threshold) {
  auto sm = SaliencyMap<Scalar>::zero(dims);
  const auto diffs = mask_differences(b, masks, result, dims, threshold);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (diffs[i] != 0.0) sm.block(masks[i].area) += Scalar(diffs[i]);
  }
  return sm;
}

/// Divides by the maximum; an all-zero map stays zero.
template <typename Scalar>
SaliencyMap<Scalar> normalize(SaliencyMap<Scalar> sm) {
  if (sm.values.size() > 0) {
    const Scalar peak = sm.values.maxCoeff();
    if (peak > Scalar(0)) sm.values /= peak;
  }
  sm.normalized = true;
  return sm;
}

template <typename Scalar = double>
struct DynamicEstimate {
  double threshold_used = 0.0;
  SaliencyMap<Scalar> map;
};

/// Sweeps the schedule over the cached results and keeps the first threshold whose map
/// is not identically zero; (max, zero map) when none is.
template <typename Scalar = double>
DynamicEstimate<Scalar> estimate_dynamic(const BBox& b, std::span<const MaskSpec> masks,
                                         const InquiryResult& result, ImageDims dims,
                                         const ThresholdSchedule& sched) {
  sched.validate();
  DynamicEstimate<Scalar> out;
  for (double t : sched.grid()) {
    out.threshold_used = t;
    out.map = estimate<Scalar>(b, masks, result, dims, t);
    if (!out.map.all_zero()) break;
  }
  return out;
}

/// One line per image row, comma-separated, shortest round-trip decimal.
template <typename Scalar>
void write_csv(const SaliencyMap<Scalar>& sm, std::ostream& out) {
  char buf[64];
  for (Eigen::Index y = 0; y < sm.values.rows(); ++y) {
    for (Eigen::Index x = 0; x < sm.values.cols(); ++x) {
      if (x > 0) out.put(',');
      const auto res = std::to_chars(buf, buf + sizeof buf, sm.values(y, x));
      out.write(buf, res.ptr - buf);
    }
    out.put('\n');
  }
}

/// Parses write_csv output back into an un-flagged map.
SaliencyMap<double> read_csv(std::istream& in);

}  // namespace bodem
