#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wi {

enum class TripletVariant { euclidean, cosine };

std::string to_string(TripletVariant v);
TripletVariant triplet_variant_from_string(const std::string& s);

struct TripletLossParams {
  double margin = 1.0;
  TripletVariant variant = TripletVariant::euclidean;
  /// Squared-norm penalty weight; used by the cosine variant only.
  double lambda = 1e-4;

  void validate() const;
};

struct TripletLoss {
  double value = 0.0;
  std::vector<double> grad_anchor;
  std::vector<double> grad_positive;
  std::vector<double> grad_negative;
};

/// max(0, |a - p|^2 - |a - n|^2 + margin). At the hinge point the zero
/// subgradient is used.
TripletLoss triplet_euclidean(std::span<const double> anchor, std::span<const double> positive,
                              std::span<const double> negative, double margin);

/// max(0, cos(a, n) - cos(a, p) + margin) + lambda * (|a|^2 + |p|^2 + |n|^2).
TripletLoss triplet_cosine_l2(std::span<const double> anchor, std::span<const double> positive,
                              std::span<const double> negative, double margin, double lambda);

TripletLoss triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                         std::span<const double> negative, const TripletLossParams& p);

/// Additive angular margin classification head.
struct ArcFaceHead {
  int classes = 0;
  int dim = 0;
  /// classes x dim, row-major; row y is the class weight W_y.
  std::vector<double> weights;
  double margin = 0.5;
  double scale = 30.0;

  void validate() const;
};

ArcFaceHead init_arcface_head(int classes, int dim, std::uint64_t seed, double margin = 0.5, double scale = 30.0);

struct ArcFaceLoss {
  double value = 0.0;
  /// rows x dim.
  std::vector<double> grad_features;
  /// classes x dim.
  std::vector<double> grad_weights;
};

/// Mean cross-entropy over s * cos(theta_j), with the target logit replaced by
/// s * cos(theta_y + m); theta_y is clamped to pi - m.
ArcFaceLoss arcface(std::span<const double> features, std::span<const int> labels, const ArcFaceHead& head);

}  // namespace wi
