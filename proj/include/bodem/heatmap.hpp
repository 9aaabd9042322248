#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bodem/core.hpp"
#include "bodem/saliency.hpp"

namespace bodem {

using Rgba = std::array<std::uint8_t, 4>;

struct ColorAnchor {
  double position = 0.0;
  Color color{};
};

/// Piecewise-linear palette plus a constant overlay opacity.
struct ColorMapSpec {
  std::vector<ColorAnchor> anchors{{0.0, {0, 0, 255}}, {0.5, {255, 255, 0}}, {1.0, {255, 0, 0}}};
  double alpha = 0.4;

  /// Positions strictly increasing from 0 to 1, alpha in [0,1].
  void validate() const;

  /// Parses "pos:r,g,b;pos:r,g,b;..." (e.g. "0:0,0,255;1:255,0,0").
  static ColorMapSpec parse(const std::string& palette, double alpha);
  std::string to_string() const;

  Color at(double v) const;
};

class RgbaImage {
 public:
  RgbaImage(int width, int height) : width_(width), height_(height), px_(std::size_t(width) * height * 4, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  Rgba pixel(int x, int y) const {
    const std::size_t o = (std::size_t(y) * width_ + x) * 4;
    return {px_[o], px_[o + 1], px_[o + 2], px_[o + 3]};
  }
  void set_pixel(int x, int y, Rgba c) {
    const std::size_t o = (std::size_t(y) * width_ + x) * 4;
    for (int i = 0; i < 4; ++i) px_[o + i] = c[i];
  }
  const std::vector<std::uint8_t>& bytes() const { return px_; }

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> px_;
};

/// Zero maps to transparent; v > 0 takes the palette color at v with the overlay alpha.
/// Throws std::invalid_argument if the map is not normalized.
RgbaImage colorize(const SaliencyMap<double>& sm, const ColorMapSpec& cmap);

/// Source-over compositing of layer onto img.
Image overlay(const Image& img, const RgbaImage& layer);

/// 1-pixel border along the inside edge of r.
void draw_rect(Image& img, const Rect& r, Color c);

/// Heatmap over img with the explained box outlined in black.
Image render_heatmap(const Image& img, const BBox& b, const SaliencyMap<double>& sm,
                     const ColorMapSpec& cmap);
void render_explanation(const Image& img, const BBox& b, const SaliencyMap<double>& sm,
                        const ColorMapSpec& cmap, const std::filesystem::path& out_path);

}  // namespace bodem
