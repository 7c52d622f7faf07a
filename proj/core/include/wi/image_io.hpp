#pragma once

#include <filesystem>

#include "wi/image.hpp"

namespace wi {

/// Loads PNG (8/16-bit gray, gray+alpha, RGB, RGBA, palette) or binary PGM (P5)
/// and converts to [0, 1] luminance. Format is detected from the file magic.
GrayImage read_image(const std::filesystem::path& path);

/// 8-bit grayscale PNG.
void write_png(const GrayImage& img, const std::filesystem::path& path);

/// 8-bit binary PGM (P5).
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

/// Mask as P5 PGM: 0 = background, 255 = ink.
void write_mask_pgm(const BinaryMask& mask, const std::filesystem::path& path);

/// Mask as 8-bit PNG: 0 = background, 255 = ink.
void write_mask_png(const BinaryMask& mask, const std::filesystem::path& path);

/// Writes PNG or PGM depending on the extension (".pgm" selects PGM).
void write_image(const GrayImage& img, const std::filesystem::path& path);

/// Quantises [0, 1] to 8 bits the same way every writer does.
std::uint8_t to_byte(double v);

}  // namespace wi
