#include "wi/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "wi/error.hpp"

namespace wi {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open file: " + path.string());
  return f;
}

GrayImage read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed");
  }
  std::vector<std::uint8_t> buf;
  int w = 0, h = 0, channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buf.resize(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  if (w <= 0 || h <= 0) throw DataError("empty image: " + path.string());
  if (channels <= 2) {
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(x, y) = buf[rowbytes * y + x * channels] / 255.0;
    return out;
  }
  RgbImage rgb{w, h, std::vector<double>(static_cast<std::size_t>(w) * h * 3)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        rgb.data[(static_cast<std::size_t>(y) * w + x) * 3 + c] = buf[rowbytes * y + x * channels + c] / 255.0;
  return to_gray(rgb);
}

// Skips whitespace and '#' comments in a PNM header.
int read_pnm_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string dummy;
      std::getline(in, dummy);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
    c = in.peek();
  }
  int v = -1;
  in >> v;
  if (!in) throw DataError("malformed PGM header");
  return v;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw DataError("not a binary PGM (P5): " + path.string());
  const int w = read_pnm_int(in);
  const int h = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  in.get();
  if (w <= 0 || h <= 0) throw DataError("empty image: " + path.string());
  if (maxval <= 0 || maxval > 65535) throw DataError("bad PGM maxval in " + path.string());
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw DataError("truncated PGM: " + path.string());
  GrayImage out(w, h);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const int v = bytes == 1 ? buf[i] : (buf[2 * i] << 8) | buf[2 * i + 1];
    out.pixels[i] = static_cast<double>(v) / maxval;
  }
  return out;
}

void write_png_bytes(const std::vector<std::uint8_t>& bytes, int w, int h, const std::filesystem::path& path) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * w));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_pgm_bytes(const std::vector<std::uint8_t>& bytes, int w, int h, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << "P5\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::uint8_t> image_bytes(const GrayImage& img) {
  if (img.empty()) throw DataError("empty image");
  std::vector<std::uint8_t> b(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), b.begin(), to_byte);
  return b;
}

std::vector<std::uint8_t> mask_bytes(const BinaryMask& m) {
  if (m.empty()) throw DataError("empty mask");
  std::vector<std::uint8_t> b(m.bits.size());
  std::transform(m.bits.begin(), m.bits.end(), b.begin(), [](std::uint8_t v) { return v ? 255 : 0; });
  return b;
}

}  // namespace

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

GrayImage read_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("cannot open file: " + path.string());
  unsigned char magic[8] = {};
  probe.read(reinterpret_cast<char*>(magic), 8);
  if (probe.gcount() >= 2 && magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  if (probe.gcount() == 8 && png_sig_cmp(magic, 0, 8) == 0) return read_png(path);
  throw DataError("unsupported image format (expected PNG or P5 PGM): " + path.string());
}

void write_png(const GrayImage& img, const std::filesystem::path& path) {
  write_png_bytes(image_bytes(img), img.width, img.height, path);
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  write_pgm_bytes(image_bytes(img), img.width, img.height, path);
}

void write_mask_pgm(const BinaryMask& mask, const std::filesystem::path& path) {
  write_pgm_bytes(mask_bytes(mask), mask.width, mask.height, path);
}

void write_mask_png(const BinaryMask& mask, const std::filesystem::path& path) {
  write_png_bytes(mask_bytes(mask), mask.width, mask.height, path);
}

void write_image(const GrayImage& img, const std::filesystem::path& path) {
  if (path.extension() == ".pgm")
    write_pgm(img, path);
  else
    write_png(img, path);
}

}  // namespace wi
