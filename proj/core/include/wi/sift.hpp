#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "wi/image.hpp"

namespace wi {

struct ScaleSpaceParams {
  int octaves = 4;
  int scales_per_octave = 3;
  double base_sigma = 1.6;
  /// Blur already present in the input image.
  double assumed_blur = 0.5;
  double contrast_thresh = 0.03;
  /// Maximum ratio of principal curvatures for a keypoint to survive.
  double edge_ratio_thresh = 10.0;

  /// Ratio between successive Gaussian scales, 2^(1/s).
  double k() const;
  void validate() const;
};

struct PyramidOctave {
  /// Gaussian levels L; s + 3 of them.
  std::vector<GrayImage> gaussians;
  /// D[i] = L[i+1] - L[i]; s + 2 of them.
  std::vector<GrayImage> dogs;
  /// Blur of each Gaussian level in this octave's pixel units.
  std::vector<double> sigmas;
};

struct DogPyramid {
  std::vector<PyramidOctave> octaves;
};

struct Keypoint {
  /// Position in original-image pixels.
  double x = 0.0;
  double y = 0.0;
  /// Detection scale in original-image pixels.
  double sigma = 0.0;
  /// Radians in [0, 2 pi).
  double orientation = 0.0;
  /// DoG value at the extremum.
  double response = 0.0;

  int octave = 0;
  /// Index of the DoG plane (and of its lower Gaussian level) within the octave.
  int level = 0;
  /// Integer position in the octave's raster.
  int ox = 0;
  int oy = 0;
};

struct Descriptor {
  std::array<double, 128> values{};
};

struct SiftFeature {
  Keypoint keypoint;
  Descriptor descriptor;
};

DogPyramid build_dog_pyramid(const GrayImage& img, const ScaleSpaceParams& p);

/// Strict 26-neighbour extrema with contrast and edge filtering. Keypoints are
/// returned in scan order (octave, level, row, column); orientation is unset.
std::vector<Keypoint> detect_keypoints(const DogPyramid& pyr, const ScaleSpaceParams& p);

/// Dominant gradient orientation from a 36-bin histogram around the keypoint.
double dominant_orientation(const GrayImage& level_image, const Keypoint& kp);

/// Orientation plus 4x4x8 descriptor sampled from the keypoint's Gaussian
/// level. Returns nullopt when the rotated support leaves the image.
std::optional<SiftFeature> compute_descriptor(const GrayImage& level_image, const Keypoint& kp,
                                              const ScaleSpaceParams& p = {});

/// L2 normalise, clamp entries at 0.2, renormalise. All-zero input stays zero.
void normalize_descriptor(std::array<double, 128>& values);

/// Full detector; output sorted by |response| descending.
std::vector<SiftFeature> detect(const GrayImage& img, const ScaleSpaceParams& p = {});

/// CSV dump: header x,y,sigma,orientation,response,d0..d127.
std::string keypoints_to_csv(const std::vector<SiftFeature>& features);

}  // namespace wi
