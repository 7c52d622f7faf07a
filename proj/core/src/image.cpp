#include "wi/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wi/error.hpp"

namespace wi {

GrayImage::GrayImage(int w, int h, double fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

BinaryMask::BinaryMask(int w, int h, bool fill)
    : width(w), height(h), bits(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill ? 1 : 0) {}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

GrayImage to_gray(const RgbImage& rgb) {
  if (rgb.width <= 0 || rgb.height <= 0) throw DataError("empty image");
  if (rgb.data.size() != static_cast<std::size_t>(rgb.width) * rgb.height * 3)
    throw DataError("rgb buffer size does not match dimensions");
  GrayImage out(rgb.width, rgb.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double v = 0.299 * rgb.data[3 * i] + 0.587 * rgb.data[3 * i + 1] + 0.114 * rgb.data[3 * i + 2];
    out.pixels[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

GrayImage resize(const GrayImage& img, ResizeFactor f) {
  if (!std::isfinite(f.r) || f.r <= 0.0) throw ConfigError("resize factor must be finite and positive");
  if (img.empty()) throw DataError("empty image");
  const int ow = std::max(1, static_cast<int>(std::lround(img.width * f.r)));
  const int oh = std::max(1, static_cast<int>(std::lround(img.height * f.r)));
  const double sx = static_cast<double>(img.width) / ow;
  const double sy = static_cast<double>(img.height) / oh;
  GrayImage out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < ow; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      const double top = img.at(x0, y0) * (1.0 - wx) + img.at(x1, y0) * wx;
      const double bot = img.at(x0, y1) * (1.0 - wx) + img.at(x1, y1) * wx;
      out.at(x, y) = top * (1.0 - wy) + bot * wy;
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("gaussian sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (auto& v : k) v /= sum;
  return k;
}

namespace {

// Accumulates deviations from the centre tap so that flat regions come out
// bit-exact regardless of kernel rounding.
double convolve_at(const std::vector<double>& k, const double* window) {
  const double centre = window[k.size() / 2];
  double acc = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) acc += k[j] * (window[j] - centre);
  return centre + acc;
}

}  // namespace

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  if (img.empty()) return img;
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width;
  const int h = img.height;

  GrayImage tmp(w, h);
  std::vector<double> line(static_cast<std::size_t>(std::max(w, h) + 2 * r));
  for (int y = 0; y < h; ++y) {
    for (int i = 0; i < w + 2 * r; ++i) line[i] = img.at(std::clamp(i - r, 0, w - 1), y);
    for (int x = 0; x < w; ++x) tmp.at(x, y) = convolve_at(k, &line[x]);
  }
  GrayImage out(w, h);
  for (int x = 0; x < w; ++x) {
    for (int i = 0; i < h + 2 * r; ++i) line[i] = tmp.at(x, std::clamp(i - r, 0, h - 1));
    for (int y = 0; y < h; ++y) out.at(x, y) = convolve_at(k, &line[y]);
  }
  return out;
}

namespace {

// 1-D OR over the window [i - anchor, i - anchor + size - 1], clipped.
void dilate_line(const std::uint8_t* in, std::uint8_t* out, int n, std::ptrdiff_t stride, int size) {
  const int anchor = size / 2;
  int count = 0;
  // Window for output i covers inputs [i - anchor, i + size - 1 - anchor].
  int lo = -anchor;
  int hi = size - 1 - anchor;
  for (int j = std::max(lo, 0); j <= std::min(hi, n - 1); ++j) count += in[j * stride];
  for (int i = 0; i < n; ++i) {
    out[i * stride] = count > 0 ? 1 : 0;
    if (lo >= 0 && lo < n) count -= in[lo * stride];
    ++lo;
    ++hi;
    if (hi >= 0 && hi < n) count += in[hi * stride];
  }
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, DilationSize d) {
  if (d.height < 1 || d.width < 1) throw ConfigError("dilation size components must be >= 1");
  if (mask.empty()) return mask;
  BinaryMask tmp(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * mask.width;
    dilate_line(&mask.bits[row], &tmp.bits[row], mask.width, 1, d.width);
  }
  BinaryMask out(mask.width, mask.height);
  for (int x = 0; x < mask.width; ++x) dilate_line(&tmp.bits[x], &out.bits[x], mask.height, mask.width, d.height);
  return out;
}

GrayImage crop(const GrayImage& img, int x0, int y0, int w, int h) {
  if (w <= 0 || h <= 0 || x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height)
    throw DataError("crop window outside image");
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    std::copy_n(&img.pixels[static_cast<std::size_t>(y0 + y) * img.width + x0], w, &out.pixels[static_cast<std::size_t>(y) * w]);
  return out;
}

}  // namespace wi
