#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bodem {

/// Thrown when a rectangle does not fit inside the image it is applied to.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Axis-aligned integer rectangle, half-open: [x1, x2) x [y1, y2).
/// x grows to the right and y grows downwards. Construction rejects empty rectangles.
struct Rect {
  int x1 = 0;
  int y1 = 0;
  int x2 = 1;
  int y2 = 1;

  constexpr Rect() = default;
  Rect(int x1_, int y1_, int x2_, int y2_);

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  std::int64_t area() const { return std::int64_t(width()) * height(); }

  bool contains(int x, int y) const { return x >= x1 && x < x2 && y >= y1 && y < y2; }
  bool contains(const Rect& other) const {
    return other.x1 >= x1 && other.x2 <= x2 && other.y1 >= y1 && other.y2 <= y2;
  }
  bool intersects(const Rect& other) const {
    return x1 < other.x2 && other.x1 < x2 && y1 < other.y2 && other.y1 < y2;
  }

  friend auto operator<=>(const Rect&, const Rect&) = default;
};

std::string to_string(const Rect& r);

/// Intersection of two rectangles, empty when they do not overlap.
std::optional<Rect> intersect(const Rect& a, const Rect& b);

/// A detector output. Label and score travel with the box for reporting only.
struct BBox {
  Rect rect;
  std::optional<std::string> label;
  std::optional<double> score;

  BBox() = default;
  explicit BBox(Rect r, std::optional<std::string> l = std::nullopt,
                std::optional<double> s = std::nullopt)
      : rect(r), label(std::move(l)), score(s) {}
  BBox(int x1, int y1, int x2, int y2) : rect(x1, y1, x2, y2) {}

  friend bool operator==(const BBox&, const BBox&) = default;
};

using DetectionSet = std::vector<BBox>;

double iou(const Rect& a, const Rect& b);
inline double iou(const BBox& a, const BBox& b) { return iou(a.rect, b.rect); }

using Color = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster, row-major with interleaved channels.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, Color fill = {0, 0, 0});
  Image(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  Rect bounds() const { return Rect(0, 0, width_, height_); }

  std::uint8_t* data() { return pixels_.data(); }
  const std::uint8_t* data() const { return pixels_.data(); }
  std::span<const std::uint8_t> bytes() const { return pixels_; }

  Color pixel(int x, int y) const {
    const std::size_t o = offset(x, y);
    return {pixels_[o], pixels_[o + 1], pixels_[o + 2]};
  }
  void set_pixel(int x, int y, Color c) {
    const std::size_t o = offset(x, y);
    pixels_[o] = c[0];
    pixels_[o + 1] = c[1];
    pixels_[o + 2] = c[2];
  }

  /// Fills r with a single color; r must lie inside the image.
  void fill(const Rect& r, Color c);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (std::size_t(y) * width_ + x) * kChannels;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Per-channel mean over r, rounded half away from zero.
Color region_mean(const Image& img, const Rect& r);

/// Copy of img with every pixel in r replaced by region_mean(img, r).
Image apply_mask(const Image& img, const Rect& r);

/// Clamps r to [0,w)x[0,h); nullopt when nothing is left.
std::optional<Rect> clamp_to(int x1, int y1, int x2, int y2, int width, int height);

}  // namespace bodem
