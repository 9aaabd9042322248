#include "bodem/heatmap.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bodem/image_io.hpp"

namespace bodem {
namespace {

std::uint8_t round_channel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

double parse_double(std::string_view s) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + std::string(s) + "' in palette");
  }
  return v;
}

}  // namespace

void ColorMapSpec::validate() const {
  if (anchors.size() < 2) throw std::invalid_argument("palette needs at least two anchors");
  if (anchors.front().position != 0.0 || anchors.back().position != 1.0) {
    throw std::invalid_argument("palette must start at 0 and end at 1");
  }
  for (std::size_t i = 1; i < anchors.size(); ++i) {
    if (!(anchors[i].position > anchors[i - 1].position)) {
      throw std::invalid_argument("palette positions must be strictly increasing");
    }
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0,1]");
}

ColorMapSpec ColorMapSpec::parse(const std::string& palette, double alpha) {
  ColorMapSpec spec;
  spec.anchors.clear();
  spec.alpha = alpha;
  std::stringstream entries(palette);
  std::string entry;
  while (std::getline(entries, entry, ';')) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("palette entry lacks ':'");
    ColorAnchor a;
    a.position = parse_double(std::string_view(entry).substr(0, colon));
    std::stringstream rgb(entry.substr(colon + 1));
    std::string part;
    int n = 0;
    while (std::getline(rgb, part, ',')) {
      if (n >= 3) throw std::invalid_argument("palette color needs exactly 3 channels");
      const double c = parse_double(part);
      if (c < 0 || c > 255 || c != std::floor(c)) {
        throw std::invalid_argument("palette channel out of range");
      }
      a.color[std::size_t(n++)] = std::uint8_t(c);
    }
    if (n != 3) throw std::invalid_argument("palette color needs exactly 3 channels");
    spec.anchors.push_back(a);
  }
  spec.validate();
  return spec;
}

std::string ColorMapSpec::to_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (i) out << ';';
    out << anchors[i].position << ':' << int(anchors[i].color[0]) << ',' << int(anchors[i].color[1])
        << ',' << int(anchors[i].color[2]);
  }
  return out.str();
}

Color ColorMapSpec::at(double v) const {
  v = std::clamp(v, 0.0, 1.0);
  std::size_t hi = 1;
  while (hi + 1 < anchors.size() && anchors[hi].position < v) ++hi;
  const ColorAnchor& a = anchors[hi - 1];
  const ColorAnchor& b = anchors[hi];
  const double f = (v - a.position) / (b.position - a.position);
  Color c{};
  for (int i = 0; i < 3; ++i) c[i] = round_channel(a.color[i] + f * (b.color[i] - a.color[i]));
  return c;
}

RgbaImage colorize(const SaliencyMap<double>& sm, const ColorMapSpec& cmap) {
  if (!sm.normalized) throw std::invalid_argument("colorize requires a normalized saliency map");
  cmap.validate();
  const std::uint8_t alpha = round_channel(255.0 * cmap.alpha);
  RgbaImage layer(sm.width(), sm.height());
  for (int y = 0; y < sm.height(); ++y) {
    for (int x = 0; x < sm.width(); ++x) {
      const double v = sm.at(x, y);
      if (v <= 0.0) continue;
      const Color c = cmap.at(v);
      layer.set_pixel(x, y, {c[0], c[1], c[2], alpha});
    }
  }
  return layer;
}

Image overlay(const Image& img, const RgbaImage& layer) {
  if (img.width() != layer.width() || img.height() != layer.height()) {
    throw std::invalid_argument("overlay layer dimensions differ from image");
  }
  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgba src = layer.pixel(x, y);
      const unsigned a = src[3];
      if (a == 0) continue;
      const Color dst = img.pixel(x, y);
      Color c{};
      for (int i = 0; i < 3; ++i) {
        // Integer source-over; an exact .5 cannot occur when dividing by 255.
        c[i] = std::uint8_t((src[i] * a + dst[i] * (255 - a) + 127) / 255);
      }
      out.set_pixel(x, y, c);
    }
  }
  return out;
}

void draw_rect(Image& img, const Rect& r, Color c) {
  for (int x = r.x1; x < r.x2; ++x) {
    img.set_pixel(x, r.y1, c);
    img.set_pixel(x, r.y2 - 1, c);
  }
  for (int y = r.y1; y < r.y2; ++y) {
    img.set_pixel(r.x1, y, c);
    img.set_pixel(r.x2 - 1, y, c);
  }
}

Image render_heatmap(const Image& img, const BBox& b, const SaliencyMap<double>& sm,
                     const ColorMapSpec& cmap) {
  if (!img.bounds().contains(b.rect)) throw BoundsError("box outside image");
  Image out = overlay(img, colorize(sm, cmap));
  draw_rect(out, b.rect, {0, 0, 0});
  return out;
}

void render_explanation(const Image& img, const BBox& b, const SaliencyMap<double>& sm,
                        const ColorMapSpec& cmap, const std::filesystem::path& out_path) {
  write_image(render_heatmap(img, b, sm, cmap), out_path);
}

}  // namespace bodem
