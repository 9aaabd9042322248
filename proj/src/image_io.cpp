#include "bodem/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

namespace bodem {
namespace {

struct MemoryReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->pos + count > reader->bytes.size()) {
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(out, reader->bytes.data() + reader->pos, count);
  reader->pos += count;
}

void on_png_error(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  *what = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

// Everything that must survive the longjmp lives outside decode_rows' frame.
struct DecodeState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::string error;
  MemoryReader reader;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;

  ~DecodeState() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

bool decode_rows(DecodeState& s) {
  if (setjmp(png_jmpbuf(s.png))) return false;
  png_set_read_fn(s.png, &s.reader, read_from_memory);
  png_read_info(s.png, s.info);

  s.width = png_get_image_width(s.png, s.info);
  s.height = png_get_image_height(s.png, s.info);
  const int bit_depth = png_get_bit_depth(s.png, s.info);
  const int color_type = png_get_color_type(s.png, s.info);
  if (bit_depth == 16) {
    s.error = "unsupported bit depth 16";
    return false;
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(s.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(s.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(s.png);
  }
  if (png_get_valid(s.png, s.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(s.png);
  png_set_strip_alpha(s.png);
  png_read_update_info(s.png, s.info);

  const std::size_t stride = png_get_rowbytes(s.png, s.info);
  if (stride != std::size_t(s.width) * 3) {
    s.error = "unexpected PNG row layout";
    return false;
  }
  s.pixels.resize(stride * s.height);
  s.rows.resize(s.height);
  for (png_uint_32 y = 0; y < s.height; ++y) s.rows[y] = s.pixels.data() + y * stride;
  png_read_image(s.png, s.rows.data());
  png_read_end(s.png, nullptr);
  return true;
}

}  // namespace

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw ImageIoError("not a PNG file");
  }
  DecodeState s;
  s.reader.bytes = bytes;
  s.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &s.error, on_png_error, on_png_warning);
  if (!s.png) throw ImageIoError("libpng initialisation failed");
  s.info = png_create_info_struct(s.png);
  if (!s.info) throw ImageIoError("libpng initialisation failed");
  if (!decode_rows(s)) throw ImageIoError("PNG decode failed: " + s.error);
  return Image(int(s.width), int(s.height), std::move(s.pixels));
}

namespace {

std::vector<std::uint8_t> encode_with_format(int width, int height, const std::uint8_t* data,
                                             png_uint_32 format) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(width);
  image.height = png_uint_32(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr)) {
    throw ImageIoError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr)) {
    throw ImageIoError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  return encode_with_format(img.width(), img.height(), img.data(), PNG_FORMAT_RGB);
}

void write_rgba_png(int width, int height, std::span<const std::uint8_t> rgba,
                    const std::filesystem::path& path) {
  if (rgba.size() != std::size_t(width) * height * 4) {
    throw std::invalid_argument("RGBA buffer does not match dimensions");
  }
  write_file(path, encode_with_format(width, height, rgba.data(), PNG_FORMAT_RGBA));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw ImageIoError("short write to " + path.string());
}

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_png(bytes);
  } catch (const ImageIoError& e) {
    throw ImageIoError(path.string() + ": " + e.what());
  }
}

void write_image(const Image& img, const std::filesystem::path& path) {
  write_file(path, encode_png(img));
}

}  // namespace bodem
