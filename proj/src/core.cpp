#include "bodem/core.hpp"

#include <algorithm>

namespace bodem {

Rect::Rect(int x1_, int y1_, int x2_, int y2_) : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
  if (x1 >= x2 || y1 >= y2) {
    throw std::invalid_argument("degenerate rectangle " + to_string(*this));
  }
}

std::string to_string(const Rect& r) {
  return "(" + std::to_string(r.x1) + "," + std::to_string(r.y1) + "," + std::to_string(r.x2) +
         "," + std::to_string(r.y2) + ")";
}

std::optional<Rect> intersect(const Rect& a, const Rect& b) {
  if (!a.intersects(b)) return std::nullopt;
  return Rect(std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2),
              std::min(a.y2, b.y2));
}

double iou(const Rect& a, const Rect& b) {
  const auto inter = intersect(a, b);
  if (!inter) return 0.0;
  const std::int64_t i = inter->area();
  return double(i) / double(a.area() + b.area() - i);
}

std::optional<Rect> clamp_to(int x1, int y1, int x2, int y2, int width, int height) {
  x1 = std::clamp(x1, 0, width);
  x2 = std::clamp(x2, 0, width);
  y1 = std::clamp(y1, 0, height);
  y2 = std::clamp(y2, 0, height);
  if (x1 >= x2 || y1 >= y2) return std::nullopt;
  return Rect(x1, y1, x2, y2);
}

Image::Image(int width, int height, Color fill_color) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
  pixels_.resize(std::size_t(width) * height * kChannels);
  for (std::size_t i = 0; i < pixels_.size(); i += kChannels) {
    std::copy(fill_color.begin(), fill_color.end(), pixels_.begin() + i);
  }
}

Image::Image(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
  if (pixels_.size() != std::size_t(width) * height * kChannels) {
    throw std::invalid_argument("pixel buffer does not match image dimensions");
  }
}

void Image::fill(const Rect& r, Color c) {
  if (!bounds().contains(r)) throw BoundsError("fill rect " + to_string(r) + " outside image");
  for (int y = r.y1; y < r.y2; ++y) {
    for (int x = r.x1; x < r.x2; ++x) set_pixel(x, y, c);
  }
}

Color region_mean(const Image& img, const Rect& r) {
  if (!img.bounds().contains(r)) {
    throw BoundsError("region " + to_string(r) + " outside image");
  }
  std::array<std::uint64_t, 3> sum{};
  for (int y = r.y1; y < r.y2; ++y) {
    const std::uint8_t* row = img.data() + (std::size_t(y) * img.width() + r.x1) * Image::kChannels;
    for (int x = 0; x < r.width(); ++x) {
      for (int c = 0; c < 3; ++c) sum[c] += row[x * Image::kChannels + c];
    }
  }
  const auto n = std::uint64_t(r.area());
  Color mean{};
  for (int c = 0; c < 3; ++c) {
    // Non-negative values: half away from zero is floor(sum / n + 1/2).
    mean[c] = static_cast<std::uint8_t>((2 * sum[c] + n) / (2 * n));
  }
  return mean;
}

Image apply_mask(const Image& img, const Rect& r) {
  const Color mean = region_mean(img, r);
  Image out = img;
  out.fill(r, mean);
  return out;
}

}  // namespace bodem
