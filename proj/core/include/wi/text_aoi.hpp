#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wi/binarize.hpp"
#include "wi/image.hpp"

namespace wi {

struct ComponentBox {
  int label = 0;
  /// Inclusive bounds.
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::int64_t pixel_count = 0;

  std::int64_t bbox_area() const { return static_cast<std::int64_t>(x1 - x0 + 1) * (y1 - y0 + 1); }
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  bool operator==(const ComponentBox&) const = default;
};

struct ComponentLabels {
  int width = 0;
  int height = 0;
  /// 0 is background; components are labelled 1..n in raster order of their
  /// first pixel.
  std::vector<int> labels;
  /// boxes[i] describes label i + 1.
  std::vector<ComponentBox> boxes;
};

struct AoiParams {
  DilationSize dilation{30, 30};
  int top_k = 1;

  void validate() const;
};

struct AoiCrop {
  GrayImage image;
  ComponentBox source_box;
  std::string source_path;
};

/// 8-connected component labelling of ink pixels.
ComponentLabels connected_components(const BinaryMask& mask);

/// Sort by bbox area desc, then pixel count desc, then (y0, x0) asc; keep top_k.
std::vector<ComponentBox> rank_boxes(std::vector<ComponentBox> boxes, int top_k);

/// Dilate, label, rank and crop using a precomputed text mask.
std::vector<AoiCrop> select_aoi(const GrayImage& img, const BinaryMask& text_mask, const AoiParams& p,
                                const std::string& source_path = {});

/// Binarize, then as above. Throws DataError "no text regions found" when the
/// mask has no ink.
std::vector<AoiCrop> select_aoi(const GrayImage& img, const BinarizerSpec& b, const AoiParams& p,
                                const std::filesystem::path& source_path = {});

}  // namespace wi
