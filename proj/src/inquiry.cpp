#include "bodem/inquiry.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace bodem {

namespace {

std::string describe_mask(MaskKind kind, int index, std::optional<int> cell) {
  std::string s = kind == MaskKind::local ? "local mask " : "global mask ";
  s += std::to_string(index);
  if (cell) s += " (cell " + std::to_string(*cell) + ")";
  return s;
}

}  // namespace

InquiryError::InquiryError(const DetectorError& cause, MaskKind kind, int mask_index,
                           std::optional<int> cell)
    : DetectorError(cause.kind(), describe_mask(kind, mask_index, cell) + ": " + cause.what()),
      mask_kind_(kind),
      mask_index_(mask_index) {}

const DetectionSet* InquiryResult::find(const MaskSpec& mask) const {
  if (mask.kind == MaskKind::local) {
    if (mask.index < 0 || std::size_t(mask.index) >= local.size()) return nullptr;
    return &local[std::size_t(mask.index)];
  }
  if (!mask.global_cell) return nullptr;
  const auto it = global.find(*mask.global_cell);
  if (it == global.end() || mask.index < 0 || std::size_t(mask.index) >= it->second.size()) {
    return nullptr;
  }
  return &it->second[std::size_t(mask.index)];
}

std::vector<DetectionSet> probe_masks(Detector& detector, const Image& img,
                                      std::span<const MaskSpec> masks, int parallelism) {
  const std::size_t n = masks.size();
  std::vector<DetectionSet> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto worker = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        results[i] = detect(detector, apply_mask(img, masks[i].area));
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };

  std::size_t workers = detector.single_flight() ? 1 : std::size_t(std::max(parallelism, 1));
  workers = std::min(workers, n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  // Report the lowest failing index so the error does not depend on scheduling.
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const DetectorError& e) {
      throw InquiryError(e, masks[i].kind, masks[i].index, masks[i].global_cell);
    }
  }
  return results;
}

namespace {

std::map<int, std::vector<MaskSpec>> group_by_cell(std::span<const MaskSpec> global) {
  std::map<int, std::vector<MaskSpec>> groups;
  for (const MaskSpec& m : global) {
    if (m.kind != MaskKind::global || !m.global_cell) {
      throw std::invalid_argument("global mask list holds a mask without a cell size");
    }
    groups[*m.global_cell].push_back(m);
  }
  return groups;
}

std::map<int, std::vector<DetectionSet>> probe_globals(Detector& detector, const Image& img,
                                                       std::span<const MaskSpec> global,
                                                       int parallelism, long& queries) {
  std::map<int, std::vector<DetectionSet>> out;
  for (auto& [cell, masks] : group_by_cell(global)) {
    std::vector<DetectionSet> sets(masks.size());
    auto probed = probe_masks(detector, img, masks, parallelism);
    for (std::size_t i = 0; i < masks.size(); ++i) {
      const int idx = masks[i].index;
      if (idx < 0 || std::size_t(idx) >= sets.size()) {
        throw std::invalid_argument("global mask indices are not dense");
      }
      sets[std::size_t(idx)] = std::move(probed[i]);
    }
    queries += long(masks.size());
    out.emplace(cell, std::move(sets));
  }
  return out;
}

std::vector<DetectionSet> probe_locals(Detector& detector, const Image& img,
                                       std::span<const MaskSpec> local, int parallelism) {
  std::vector<DetectionSet> sets(local.size());
  auto probed = probe_masks(detector, img, local, parallelism);
  for (std::size_t i = 0; i < local.size(); ++i) {
    const int idx = local[i].index;
    if (local[i].kind != MaskKind::local || idx < 0 || std::size_t(idx) >= sets.size()) {
      throw std::invalid_argument("local mask indices are not dense");
    }
    sets[std::size_t(idx)] = std::move(probed[i]);
  }
  return sets;
}

}  // namespace

InquiryResult run_inquiry(Detector& detector, const Image& img, std::span<const MaskSpec> local,
                          std::span<const MaskSpec> global, int parallelism) {
  InquiryResult result;
  try {
    result.baseline = detect(detector, img);
  } catch (const DetectorError& e) {
    throw DetectorError(e.kind(), std::string("baseline: ") + e.what());
  }
  result.query_count = 1;
  result.local = probe_locals(detector, img, local, parallelism);
  result.query_count += long(local.size());
  result.global = probe_globals(detector, img, global, parallelism, result.query_count);
  return result;
}

ImageInquiry::ImageInquiry(Detector& detector, const Image& img, std::vector<int> global_cells,
                           int parallelism)
    : detector_(detector), img_(img), parallelism_(parallelism) {
  std::sort(global_cells.begin(), global_cells.end());
  global_cells.erase(std::unique(global_cells.begin(), global_cells.end()), global_cells.end());
  for (int cell : global_cells) {
    auto masks = bodem::global_masks({img.width(), img.height()}, cell);
    global_masks_.insert(global_masks_.end(), masks.begin(), masks.end());
  }
}

const DetectionSet& ImageInquiry::baseline() {
  if (!baseline_) {
    try {
      baseline_ = detect(detector_, img_);
    } catch (const DetectorError& e) {
      throw DetectorError(e.kind(), std::string("baseline: ") + e.what());
    }
    ++query_count_;
  }
  return *baseline_;
}

void ImageInquiry::ensure_globals() {
  if (!global_) global_ = probe_globals(detector_, img_, global_masks_, parallelism_, query_count_);
}

InquiryResult ImageInquiry::for_box(std::span<const MaskSpec> local) {
  const long before = query_count_;
  InquiryResult result;
  result.baseline = baseline();
  ensure_globals();
  result.global = *global_;
  result.local = probe_locals(detector_, img_, local, parallelism_);
  query_count_ += long(local.size());
  result.query_count = query_count_ - before;
  return result;
}

}  // namespace bodem
