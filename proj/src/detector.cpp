#include "bodem/detector.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstring>

#include "bodem/wire.hpp"

namespace bodem {

const char* to_string(DetectorErrorKind kind) {
  switch (kind) {
    case DetectorErrorKind::transport: return "transport";
    case DetectorErrorKind::rejected: return "rejected";
    case DetectorErrorKind::malformed: return "malformed";
    case DetectorErrorKind::timeout: return "timeout";
  }
  return "unknown";
}

DetectionSet detect(Detector& detector, const Image& img) {
  DetectionSet out;
  for (RawBox& raw : detector.detect_raw(img)) {
    auto r = clamp_to(raw.x1, raw.y1, raw.x2, raw.y2, img.width(), img.height());
    if (!r) {
      spdlog::warn("dropping degenerate box ({},{},{},{}) from {}", raw.x1, raw.y1, raw.x2,
                   raw.y2, detector.describe());
      continue;
    }
    out.emplace_back(*r, std::move(raw.label), raw.score);
  }
  return out;
}

DetectionSet synthetic_detect(const Image& img, SyntheticMode mode) {
  const int w = img.width();
  const int h = img.height();
  const Color background = img.pixel(0, 0);
  std::vector<char> visited(std::size_t(w) * h, 0);
  std::vector<std::pair<int, int>> stack;
  DetectionSet found;

  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (visited[std::size_t(y0) * w + x0] || img.pixel(x0, y0) == background) continue;
      const Color first = img.pixel(x0, y0);
      bool uniform = true;
      long count = 0;
      int x1 = x0, y1 = y0, x2 = x0, y2 = y0;
      visited[std::size_t(y0) * w + x0] = 1;
      stack.assign(1, {x0, y0});
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        ++count;
        uniform = uniform && img.pixel(x, y) == first;
        x1 = std::min(x1, x);
        x2 = std::max(x2, x);
        y1 = std::min(y1, y);
        y2 = std::max(y2, y);
        constexpr int dx[] = {1, -1, 0, 0};
        constexpr int dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dx[k];
          const int ny = y + dy[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          char& v = visited[std::size_t(ny) * w + nx];
          if (v || img.pixel(nx, ny) == background) continue;
          v = 1;
          stack.emplace_back(nx, ny);
        }
      }
      if (mode == SyntheticMode::strict && (!uniform || count < 25)) continue;
      found.emplace_back(x1, y1, x2 + 1, y2 + 1);
    }
  }
  std::sort(found.begin(), found.end(), [](const BBox& a, const BBox& b) {
    return std::pair(a.rect.y1, a.rect.x1) < std::pair(b.rect.y1, b.rect.x1);
  });
  return found;
}

std::vector<RawBox> SyntheticDetector::detect_raw(const Image& img) {
  std::vector<RawBox> out;
  for (const BBox& b : synthetic_detect(img, mode_)) {
    out.push_back({b.rect.x1, b.rect.y1, b.rect.x2, b.rect.y2, std::nullopt, std::nullopt});
  }
  return out;
}

std::string SyntheticDetector::describe() const {
  return mode_ == SyntheticMode::strict ? "synthetic:strict" : "synthetic";
}

std::unique_ptr<Detector> make_detector(const std::string& spec, AdapterOptions opts) {
  if (spec == "synthetic" || spec == "synthetic:plain") {
    return std::make_unique<SyntheticDetector>(SyntheticMode::plain);
  }
  if (spec == "synthetic:strict") return std::make_unique<SyntheticDetector>(SyntheticMode::strict);
  if (spec.starts_with("http://") || spec.starts_with("https://")) {
    return std::make_unique<RemoteDetector>(spec, opts);
  }
  if (spec.starts_with("cmd:") && spec.size() > 4) {
    return std::make_unique<SubprocessDetector>(spec.substr(4), opts);
  }
  throw std::invalid_argument("unrecognised detector spec '" + spec + "'");
}

namespace wire {

namespace {

int int_field(const nlohmann::json& box, const char* key) {
  const auto it = box.find(key);
  if (it == box.end() || !it->is_number_integer()) {
    throw DetectorError(DetectorErrorKind::malformed,
                        std::string("box field '") + key + "' missing or not an integer");
  }
  const auto v = it->get<std::int64_t>();
  if (v < INT32_MIN || v > INT32_MAX) {
    throw DetectorError(DetectorErrorKind::malformed, std::string("box field '") + key +
                                                          "' out of range");
  }
  return int(v);
}

}  // namespace

std::vector<RawBox> parse_boxes(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("boxes") || !body["boxes"].is_array()) {
    throw DetectorError(DetectorErrorKind::malformed, "response lacks a 'boxes' array");
  }
  std::vector<RawBox> boxes;
  for (const auto& b : body["boxes"]) {
    if (!b.is_object()) throw DetectorError(DetectorErrorKind::malformed, "box is not an object");
    RawBox raw{int_field(b, "x1"), int_field(b, "y1"), int_field(b, "x2"), int_field(b, "y2"),
               std::nullopt, std::nullopt};
    if (auto it = b.find("label"); it != b.end() && !it->is_null()) {
      if (!it->is_string()) throw DetectorError(DetectorErrorKind::malformed, "label not a string");
      raw.label = it->get<std::string>();
    }
    if (auto it = b.find("score"); it != b.end() && !it->is_null()) {
      if (!it->is_number()) throw DetectorError(DetectorErrorKind::malformed, "score not a number");
      raw.score = it->get<double>();
    }
    boxes.push_back(std::move(raw));
  }
  return boxes;
}

nlohmann::json boxes_to_json(std::span<const RawBox> boxes) {
  auto arr = nlohmann::json::array();
  for (const RawBox& b : boxes) {
    nlohmann::json j{{"x1", b.x1}, {"y1", b.y1}, {"x2", b.x2}, {"y2", b.y2}};
    if (b.label) j["label"] = *b.label;
    if (b.score) j["score"] = *b.score;
    arr.push_back(std::move(j));
  }
  return {{"boxes", std::move(arr)}};
}

nlohmann::json box_to_json(const BBox& box) {
  nlohmann::json j{{"x1", box.rect.x1}, {"y1", box.rect.y1}, {"x2", box.rect.x2},
                   {"y2", box.rect.y2}};
  if (box.label) j["label"] = *box.label;
  if (box.score) j["score"] = *box.score;
  return j;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                int(bytes.size()));
  out.resize(std::size_t(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                int(text.size()));
  if (n < 0) throw std::invalid_argument("invalid base64");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t len = std::size_t(n);
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

}  // namespace wire
}  // namespace bodem
