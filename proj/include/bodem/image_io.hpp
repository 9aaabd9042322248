#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "bodem/core.hpp"

namespace bodem {

/// Raised for missing, truncated or otherwise undecodable raster files.
class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// PNG only. Grayscale and palette inputs are promoted to RGB, alpha is dropped,
// 16-bit inputs are rejected.
Image decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image& img);

Image load_image(const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);

/// Writes an 8-bit RGBA buffer (width*height*4 bytes).
void write_rgba_png(int width, int height, std::span<const std::uint8_t> rgba,
                    const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace bodem
