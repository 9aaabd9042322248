#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "bodem/core.hpp"
#include "bodem/detector.hpp"
#include "bodem/maskgen.hpp"

namespace bodem {

/// A detector failure while probing one mask.
class InquiryError : public DetectorError {
 public:
  InquiryError(const DetectorError& cause, MaskKind kind, int mask_index,
               std::optional<int> cell);
  MaskKind mask_kind() const { return mask_kind_; }
  int mask_index() const { return mask_index_; }

 private:
  MaskKind mask_kind_;
  int mask_index_;
};

/// Detections on the unmasked image plus one detection set per mask.
struct InquiryResult {
  DetectionSet baseline;
  std::vector<DetectionSet> local;                  // by local mask index
  std::map<int, std::vector<DetectionSet>> global;  // cell size -> by mask index
  long query_count = 0;                             // detector calls issued for this result

  /// Nullptr when the result holds no entry for the mask.
  const DetectionSet* find(const MaskSpec& mask) const;
};

/// Probes every mask exactly once. Masked images are built one at a time per worker; the
/// output is ordered by position in `masks` regardless of completion order.
std::vector<DetectionSet> probe_masks(Detector& detector, const Image& img,
                                      std::span<const MaskSpec> masks, int parallelism);

/// Baseline plus one probe per local and global mask.
InquiryResult run_inquiry(Detector& detector, const Image& img, std::span<const MaskSpec> local,
                          std::span<const MaskSpec> global, int parallelism);

/// Per-image probing session. Baseline and global-mask detections do not depend on the
/// box being explained, so they are probed once and shared by every box of the image.
class ImageInquiry {
 public:
  ImageInquiry(Detector& detector, const Image& img, std::vector<int> global_cells,
               int parallelism);

  const DetectionSet& baseline();
  const std::vector<MaskSpec>& global_masks() const { return global_masks_; }

  /// Probes the box's local masks; baseline and globals come from the cache (probed on
  /// first use).
  InquiryResult for_box(std::span<const MaskSpec> local);

  long query_count() const { return query_count_; }

 private:
  void ensure_globals();

  Detector& detector_;
  const Image& img_;
  int parallelism_;
  std::vector<MaskSpec> global_masks_;
  std::optional<DetectionSet> baseline_;
  std::optional<std::map<int, std::vector<DetectionSet>>> global_;
  long query_count_ = 0;
};

}  // namespace bodem
