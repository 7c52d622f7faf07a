#pragma once

#include <cstdint>
#include <vector>

namespace wi {

/// Row-major luminance raster, values in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0);

  bool empty() const { return width <= 0 || height <= 0; }
  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const GrayImage&) const = default;
};

/// Row-major boolean raster; true (1) is ink.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false);

  bool empty() const { return width <= 0 || height <= 0; }
  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;

  bool operator==(const BinaryMask&) const = default;
};

/// Interleaved RGB raster, channels in [0, 1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;
};

struct ResizeFactor {
  double r = 1.0;
};

/// Rectangular structuring element size, (height, width) in pixels.
struct DilationSize {
  int height = 1;
  int width = 1;
};

GrayImage to_gray(const RgbImage& rgb);

/// Bilinear resize; output dims are max(1, round(dim * r)).
GrayImage resize(const GrayImage& img, ResizeFactor f);

/// Normalised sampled Gaussian of radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with edge replication.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

/// Binary dilation by a d.height x d.width rectangle anchored at floor(d/2);
/// pixels outside the raster are ignored.
BinaryMask dilate(const BinaryMask& mask, DilationSize d);

/// Copy of the w x h window at (x0, y0); must lie inside the image.
GrayImage crop(const GrayImage& img, int x0, int y0, int w, int h);

}  // namespace wi
