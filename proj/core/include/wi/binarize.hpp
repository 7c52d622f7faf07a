#pragma once

#include <filesystem>
#include <string>
#include <utility>

#include "wi/image.hpp"

namespace wi {

enum class BinarizerKind { otsu, sauvola, external };

struct BinarizerSpec {
  BinarizerKind kind = BinarizerKind::otsu;
  int sauvola_window = 15;
  double sauvola_k = 0.2;
  /// Path of an externally produced mask; "{stem}" expands to the image stem.
  std::string external_path_template;
  /// Convention of the external files: true when ink is stored as white.
  bool external_ink_white = true;

  void validate() const;
};

std::string to_string(BinarizerKind kind);
BinarizerKind binarizer_kind_from_string(const std::string& name);

/// Index of the last bin of the dark class chosen by Otsu on a 256-bin
/// histogram, or -1 when the image has a single intensity bin.
int otsu_threshold_bin(const GrayImage& img);

/// Histogram bin of a [0, 1] intensity.
int intensity_bin(double v);

/// Global Otsu threshold; ink = dark class.
BinaryMask otsu(const GrayImage& img);

/// Sauvola local threshold t = mean * (1 + k * (stddev / 0.5 - 1)).
/// Window statistics are taken over 8-bit quantised intensities with exact
/// integer integral images, clipped to the raster.
BinaryMask sauvola(const GrayImage& img, int window, double k);

/// Loads a PGM/PNG mask. With ink_is_white, nonzero pixels are ink; otherwise
/// zero pixels are ink.
BinaryMask import_mask(const std::filesystem::path& path, std::pair<int, int> expected_dims, bool ink_is_white);

/// F-measure of predicted ink against ground truth ink.
double f_measure(const BinaryMask& mask, const BinaryMask& truth);

/// Dispatches on spec.kind; source_path is used to resolve external masks.
BinaryMask binarize(const GrayImage& img, const BinarizerSpec& spec,
                    const std::filesystem::path& source_path = {});

}  // namespace wi
