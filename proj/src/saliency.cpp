#include "bodem/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

namespace bodem {

void ThresholdSchedule::validate() const {
  if (!(base > 0.0 && base <= max && max <= 1.0)) {
    throw std::invalid_argument("threshold schedule needs 0 < base <= max <= 1");
  }
  if (!(step > 0.0)) throw std::invalid_argument("threshold step must be positive");
}

std::vector<double> ThresholdSchedule::grid() const {
  validate();
  std::vector<double> ts;
  for (int k = 0;; ++k) {
    const double t = std::round((base + k * step) * 1e6) / 1e6;
    if (t >= max) break;
    ts.push_back(t);
  }
  ts.push_back(max);
  return ts;
}

double similarity(const BBox& b, const DetectionSet& found) {
  double best = 0.0;
  for (const BBox& other : found) best = std::max(best, iou(b, other));
  return best;
}

double difference(const BBox& b, const DetectionSet& found, double threshold, double penalty) {
  const double sim = similarity(b, found);
  if (sim >= threshold) return 0.0;
  if (found.empty() || sim == 0.0) return penalty;
  return 1.0 / sim;
}

std::vector<double> mask_differences(const BBox& b, std::span<const MaskSpec> masks,
                                     const InquiryResult& result, ImageDims dims,
                                     double threshold) {
  const double penalty = miss_penalty(dims);
  std::vector<double> diffs;
  diffs.reserve(masks.size());
  for (const MaskSpec& m : masks) {
    const DetectionSet* found = result.find(m);
    if (!found) {
      throw ConsistencyError("no detections recorded for " +
                             std::string(m.kind == MaskKind::local ? "local" : "global") +
                             " mask " + std::to_string(m.index));
    }
    diffs.push_back(difference(b, *found, threshold, penalty));
  }
  return diffs;
}

SaliencyMap<double> read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      double v = 0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw std::invalid_argument("bad saliency value in CSV");
      row.push_back(v);
      p = res.ptr;
      if (p < end && *p == ',') ++p;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::invalid_argument("ragged saliency CSV");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("empty saliency CSV");
  auto sm = SaliencyMap<double>::zero({int(rows.front().size()), int(rows.size())});
  for (std::size_t y = 0; y < rows.size(); ++y) {
    for (std::size_t x = 0; x < rows[y].size(); ++x) sm.values(Eigen::Index(y), Eigen::Index(x)) = rows[y][x];
  }
  return sm;
}

}  // namespace bodem
