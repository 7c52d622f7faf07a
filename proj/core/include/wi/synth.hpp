#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "wi/image.hpp"
#include "wi/sampling.hpp"

namespace wi {

/// Parametric handwriting style of one synthetic writer. Every field is drawn
/// uniformly from the documented range; lengths are in page pixels.
struct WriterStyle {
  double slant = 0.0;            ///< radians, [-0.45, 0.45]
  double stroke_width = 2.0;     ///< [1.2, 3.5]
  double letter_spacing = 3.0;   ///< [1.0, 6.0]
  double curvature = 0.5;        ///< [0, 1]; 0 = straight polylines
  double baseline_wobble = 1.0;  ///< amplitude, [0, 2.5]
  double x_height = 12.0;        ///< [9, 15]
  double ink = 0.15;             ///< ink luminance, [0.05, 0.3]
  /// Seed of the writer's private glyph alphabet.
  std::uint64_t glyph_seed = 0;

  bool operator==(const WriterStyle&) const = default;
};

struct StyleBounds {
  static constexpr double slant_max = 0.45;
  static constexpr double stroke_min = 1.2, stroke_max = 3.5;
  static constexpr double spacing_min = 1.0, spacing_max = 6.0;
  static constexpr double wobble_max = 2.5;
  static constexpr double x_height_min = 9.0, x_height_max = 15.0;
  static constexpr double ink_min = 0.05, ink_max = 0.3;
};

WriterStyle gen_style(std::uint64_t writer_seed);

/// Inclusive pixel bounds.
struct TextBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  std::int64_t area() const { return static_cast<std::int64_t>(x1 - x0 + 1) * (y1 - y0 + 1); }
};

struct RenderedPage {
  GrayImage image;
  /// Bounding box of all pixels with stroke coverage >= 0.5.
  TextBox text_box;
  /// Fraction of page pixels with stroke coverage >= 0.5.
  double ink_fraction = 0.0;
};

/// Renders lines of pseudo-glyphs; noise in [0, 1] adds paper texture,
/// blotches and uneven illumination. Throws when fewer than 3 lines fit.
RenderedPage render_page(const WriterStyle& style, std::uint64_t content_seed, int width, int height,
                         double noise = 0.0);

GrayImage render_document(const WriterStyle& style, std::uint64_t content_seed, int width, int height,
                          double noise = 0.0);

struct DatasetOptions {
  int writers = 20;
  int docs_per_writer = 6;
  std::uint64_t seed = 0;
  /// Disjoint writer sets for train and test.
  bool zero_shot = true;
  /// Writers held out for testing in zero-shot mode; -1 means half.
  int test_writers = -1;
  /// Train writers moved to the val split (zero-shot mode).
  int val_writers = 0;
  int page_width = 512;
  int page_height = 512;
  double noise = 0.0;
  /// Render documents in identical pairs (doc 2i and 2i+1 share content).
  bool duplicate_pairs = false;

  void validate() const;
};

/// Fraction of the ground-truth box covered by another box.
double box_coverage(const TextBox& truth, int x0, int y0, int x1, int y1);

/// Writes <out>/wNNN_dMM.png, manifest.csv and truth_boxes.json.
Manifest gen_dataset(const DatasetOptions& opts, const std::filesystem::path& out_dir);

}  // namespace wi
