#include "wi/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wi/error.hpp"
#include "wi/rng.hpp"

namespace wi {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_dims(std::span<const double> a, std::span<const double> p, std::span<const double> n) {
  if (a.size() != p.size() || a.size() != n.size())
    throw ConfigError("triplet loss: dimension mismatch (" + std::to_string(a.size()) + ", " +
                      std::to_string(p.size()) + ", " + std::to_string(n.size()) + ")");
}

// Adds scale * d cos(a, b) / da into out.
void add_cosine_grad(std::span<const double> a, std::span<const double> b, double na, double nb, double cosine,
                     double scale, std::vector<double>& out) {
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += scale * (b[i] / (na * nb) - cosine * a[i] / (na * na));
}

}  // namespace

std::string to_string(TripletVariant v) { return v == TripletVariant::cosine ? "cosine" : "euclidean"; }

TripletVariant triplet_variant_from_string(const std::string& s) {
  if (s == "euclidean") return TripletVariant::euclidean;
  if (s == "cosine") return TripletVariant::cosine;
  throw ConfigError("unknown triplet variant '" + s + "' (expected euclidean|cosine)");
}

void TripletLossParams::validate() const {
  if (!(margin > 0.0)) throw ConfigError("triplet margin must be > 0");
  if (!(lambda >= 0.0)) throw ConfigError("triplet lambda must be >= 0");
}

TripletLoss triplet_euclidean(std::span<const double> a, std::span<const double> p, std::span<const double> n,
                              double margin) {
  check_dims(a, p, n);
  double dp = 0.0, dn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dp += (a[i] - p[i]) * (a[i] - p[i]);
    dn += (a[i] - n[i]) * (a[i] - n[i]);
  }
  TripletLoss out;
  out.grad_anchor.assign(a.size(), 0.0);
  out.grad_positive.assign(a.size(), 0.0);
  out.grad_negative.assign(a.size(), 0.0);
  const double inner = dp - dn + margin;
  if (inner <= 0.0) return out;
  out.value = inner;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.grad_anchor[i] = 2.0 * (n[i] - p[i]);
    out.grad_positive[i] = -2.0 * (a[i] - p[i]);
    out.grad_negative[i] = 2.0 * (a[i] - n[i]);
  }
  return out;
}

TripletLoss triplet_cosine_l2(std::span<const double> a, std::span<const double> p, std::span<const double> n,
                              double margin, double lambda) {
  check_dims(a, p, n);
  const double na = std::sqrt(dot(a, a)), np = std::sqrt(dot(p, p)), nn = std::sqrt(dot(n, n));
  if (na == 0.0 || np == 0.0 || nn == 0.0) throw NumericError("cosine triplet loss: zero-norm feature vector");
  const double cos_ap = dot(a, p) / (na * np);
  const double cos_an = dot(a, n) / (na * nn);

  TripletLoss out;
  out.grad_anchor.assign(a.size(), 0.0);
  out.grad_positive.assign(a.size(), 0.0);
  out.grad_negative.assign(a.size(), 0.0);
  const double inner = cos_an - cos_ap + margin;
  if (inner > 0.0) {
    out.value = inner;
    add_cosine_grad(a, n, na, nn, cos_an, 1.0, out.grad_anchor);
    add_cosine_grad(a, p, na, np, cos_ap, -1.0, out.grad_anchor);
    add_cosine_grad(n, a, nn, na, cos_an, 1.0, out.grad_negative);
    add_cosine_grad(p, a, np, na, cos_ap, -1.0, out.grad_positive);
  }
  out.value += lambda * (na * na + np * np + nn * nn);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.grad_anchor[i] += 2.0 * lambda * a[i];
    out.grad_positive[i] += 2.0 * lambda * p[i];
    out.grad_negative[i] += 2.0 * lambda * n[i];
  }
  return out;
}

TripletLoss triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n,
                         const TripletLossParams& params) {
  return params.variant == TripletVariant::cosine ? triplet_cosine_l2(a, p, n, params.margin, params.lambda)
                                                  : triplet_euclidean(a, p, n, params.margin);
}

void ArcFaceHead::validate() const {
  if (classes < 2) throw ConfigError("arcface head needs at least 2 classes");
  if (dim < 1) throw ConfigError("arcface head dim must be >= 1");
  if (weights.size() != static_cast<std::size_t>(classes) * dim) throw ConfigError("arcface weight shape mismatch");
  if (!(margin >= 0.0 && margin < std::numbers::pi / 2)) throw ConfigError("arcface margin must lie in [0, pi/2)");
  if (!(scale > 0.0)) throw ConfigError("arcface scale must be > 0");
}

ArcFaceHead init_arcface_head(int classes, int dim, std::uint64_t seed, double margin, double scale) {
  ArcFaceHead h{classes, dim, std::vector<double>(static_cast<std::size_t>(std::max(classes, 0)) * std::max(dim, 0)),
                margin, scale};
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / (classes + dim));
  for (double& w : h.weights) w = uniform_real(rng, -bound, bound);
  h.validate();
  return h;
}

ArcFaceLoss arcface(std::span<const double> features, std::span<const int> labels, const ArcFaceHead& head) {
  head.validate();
  const std::size_t dim = static_cast<std::size_t>(head.dim);
  const std::size_t classes = static_cast<std::size_t>(head.classes);
  if (features.size() != labels.size() * dim) throw ConfigError("arcface: feature/label count mismatch");
  const std::size_t rows = labels.size();
  if (rows == 0) throw ConfigError("arcface: empty batch");

  std::vector<double> wnorm(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    wnorm[j] = std::sqrt(dot({&head.weights[j * dim], dim}, {&head.weights[j * dim], dim}));
    if (wnorm[j] == 0.0) throw NumericError("arcface: zero-norm class weight row " + std::to_string(j));
  }

  const double cos_m = std::cos(head.margin), sin_m = std::sin(head.margin);
  const double theta_max = std::numbers::pi - head.margin;
  ArcFaceLoss out;
  out.grad_features.assign(features.size(), 0.0);
  out.grad_weights.assign(head.weights.size(), 0.0);

  std::vector<double> cosine(classes), logits(classes), dlogit(classes);
  for (std::size_t i = 0; i < rows; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw DataError("arcface: label " + std::to_string(y) + " out of range [0, " + std::to_string(classes) + ")");
    std::span<const double> f{&features[i * dim], dim};
    const double fn = std::sqrt(dot(f, f));
    if (fn == 0.0) throw NumericError("arcface: zero-norm feature row " + std::to_string(i));

    for (std::size_t j = 0; j < classes; ++j) {
      cosine[j] = std::clamp(dot(f, {&head.weights[j * dim], dim}) / (fn * wnorm[j]), -1.0, 1.0);
      logits[j] = head.scale * cosine[j];
    }
    const double c = cosine[y];
    const double theta = std::acos(c);
    double target, dtarget_dc;
    if (theta > theta_max) {
      target = -1.0;
      dtarget_dc = 0.0;
    } else {
      const double sin_t = std::sqrt(std::max(0.0, 1.0 - c * c));
      target = c * cos_m - sin_t * sin_m;
      dtarget_dc = cos_m + (sin_m == 0.0 ? 0.0 : c * sin_m / std::max(sin_t, 1e-12));
    }
    logits[y] = head.scale * target;

    const double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (std::size_t j = 0; j < classes; ++j) denom += std::exp(logits[j] - mx);
    out.value += -(logits[y] - mx - std::log(denom));

    for (std::size_t j = 0; j < classes; ++j) {
      const double prob = std::exp(logits[j] - mx) / denom;
      const double dz = (prob - (static_cast<int>(j) == y ? 1.0 : 0.0)) / static_cast<double>(rows);
      dlogit[j] = dz * head.scale * (static_cast<int>(j) == y ? dtarget_dc : 1.0);
    }

    double* gf = &out.grad_features[i * dim];
    for (std::size_t j = 0; j < classes; ++j) {
      if (dlogit[j] == 0.0) continue;
      const double* w = &head.weights[j * dim];
      double* gw = &out.grad_weights[j * dim];
      const double wn = wnorm[j];
      for (std::size_t k = 0; k < dim; ++k) {
        gf[k] += dlogit[j] * (w[k] / (wn * fn) - cosine[j] * f[k] / (fn * fn));
        gw[k] += dlogit[j] * (f[k] / (wn * fn) - cosine[j] * w[k] / (wn * wn));
      }
    }
  }
  out.value /= static_cast<double>(rows);
  return out;
}

}  // namespace wi
