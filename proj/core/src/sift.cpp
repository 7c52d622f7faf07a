#include "wi/sift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wi/error.hpp"

namespace wi {
namespace {

constexpr int kMinOctaveSide = 8;
constexpr int kOrientationBins = 36;
constexpr int kDescriptorWidth = 4;
constexpr int kDescriptorBins = 8;
constexpr int kPatchSamples = 16;
constexpr double kDescriptorClamp = 0.2;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

GrayImage subtract(const GrayImage& a, const GrayImage& b) {
  GrayImage out(a.width, a.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = a.pixels[i] - b.pixels[i];
  return out;
}

GrayImage downsample2(const GrayImage& img) {
  GrayImage out((img.width + 1) / 2, (img.height + 1) / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(x, y) = img.at(2 * x, 2 * y);
  return out;
}

bool is_extremum(const DogPyramid& pyr, int o, int s, int x, int y) {
  const auto& dogs = pyr.octaves[o].dogs;
  const double v = dogs[s].at(x, y);
  const bool try_max = v > dogs[s].at(x - 1, y);
  for (int ds = -1; ds <= 1; ++ds) {
    const GrayImage& d = dogs[s + ds];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (ds == 0 && dy == 0 && dx == 0) continue;
        const double n = d.at(x + dx, y + dy);
        if (try_max ? !(v > n) : !(v < n)) return false;
      }
    }
  }
  return true;
}

bool passes_edge_test(const GrayImage& d, int x, int y, double r) {
  const double v = d.at(x, y);
  const double dxx = d.at(x + 1, y) + d.at(x - 1, y) - 2.0 * v;
  const double dyy = d.at(x, y + 1) + d.at(x, y - 1) - 2.0 * v;
  const double dxy = (d.at(x + 1, y + 1) - d.at(x + 1, y - 1) - d.at(x - 1, y + 1) + d.at(x - 1, y - 1)) / 4.0;
  const double tr = dxx + dyy;
  const double det = dxx * dyy - dxy * dxy;
  if (det <= 0.0) return false;
  return tr * tr * r < (r + 1.0) * (r + 1.0) * det;
}

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

// Central-difference gradient with clamped borders.
void gradient_at(const GrayImage& img, int x, int y, double& gx, double& gy) {
  const int xm = std::max(x - 1, 0), xp = std::min(x + 1, img.width - 1);
  const int ym = std::max(y - 1, 0), yp = std::min(y + 1, img.height - 1);
  gx = 0.5 * (img.at(xp, y) - img.at(xm, y));
  gy = 0.5 * (img.at(x, yp) - img.at(x, ym));
}

double bilinear(const GrayImage& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto px = [&](int xx, int yy) {
    return img.at(std::clamp(xx, 0, img.width - 1), std::clamp(yy, 0, img.height - 1));
  };
  return (px(x0, y0) * (1 - fx) + px(x0 + 1, y0) * fx) * (1 - fy) +
         (px(x0, y0 + 1) * (1 - fx) + px(x0 + 1, y0 + 1) * fx) * fy;
}

double octave_sigma(const ScaleSpaceParams& p, int level) {
  return p.base_sigma * std::pow(p.k(), level);
}

}  // namespace

double ScaleSpaceParams::k() const { return std::pow(2.0, 1.0 / scales_per_octave); }

void ScaleSpaceParams::validate() const {
  if (octaves < 1) throw ConfigError("sift: octaves must be >= 1");
  if (scales_per_octave < 1) throw ConfigError("sift: scales_per_octave must be >= 1");
  if (!(base_sigma > 0.0)) throw ConfigError("sift: base_sigma must be > 0");
  if (!(assumed_blur >= 0.0) || assumed_blur >= base_sigma)
    throw ConfigError("sift: assumed_blur must lie in [0, base_sigma)");
  if (!(contrast_thresh > 0.0)) throw ConfigError("sift: contrast_thresh must be > 0");
  if (!(edge_ratio_thresh > 0.0)) throw ConfigError("sift: edge_ratio_thresh must be > 0");
}

DogPyramid build_dog_pyramid(const GrayImage& img, const ScaleSpaceParams& p) {
  p.validate();
  if (img.empty() || std::min(img.width, img.height) < 16)
    throw DataError("sift: image too small (min dimension 16)");

  const int levels = p.scales_per_octave + 3;
  const double k = p.k();
  DogPyramid pyr;
  GrayImage base = gaussian_blur(img, std::sqrt(p.base_sigma * p.base_sigma - p.assumed_blur * p.assumed_blur));

  for (int o = 0; o < p.octaves; ++o) {
    if (std::min(base.width, base.height) < kMinOctaveSide) break;
    PyramidOctave oct;
    oct.gaussians.reserve(levels);
    oct.gaussians.push_back(base);
    oct.sigmas.push_back(p.base_sigma);
    for (int i = 1; i < levels; ++i) {
      const double prev = p.base_sigma * std::pow(k, i - 1);
      const double next = prev * k;
      oct.gaussians.push_back(gaussian_blur(oct.gaussians.back(), std::sqrt(next * next - prev * prev)));
      oct.sigmas.push_back(next);
    }
    for (int i = 0; i + 1 < levels; ++i) oct.dogs.push_back(subtract(oct.gaussians[i + 1], oct.gaussians[i]));
    // Level s has blur 2 * base_sigma; halving it starts the next octave.
    base = downsample2(oct.gaussians[p.scales_per_octave]);
    pyr.octaves.push_back(std::move(oct));
  }
  return pyr;
}

std::vector<Keypoint> detect_keypoints(const DogPyramid& pyr, const ScaleSpaceParams& p) {
  std::vector<Keypoint> out;
  for (int o = 0; o < static_cast<int>(pyr.octaves.size()); ++o) {
    const auto& dogs = pyr.octaves[o].dogs;
    const double scale = std::ldexp(1.0, o);
    for (int s = 1; s + 1 < static_cast<int>(dogs.size()); ++s) {
      const GrayImage& d = dogs[s];
      for (int y = 1; y + 1 < d.height; ++y) {
        for (int x = 1; x + 1 < d.width; ++x) {
          const double v = d.at(x, y);
          if (std::abs(v) < p.contrast_thresh) continue;
          if (!is_extremum(pyr, o, s, x, y)) continue;
          if (!passes_edge_test(d, x, y, p.edge_ratio_thresh)) continue;
          Keypoint kp;
          kp.x = x * scale;
          kp.y = y * scale;
          kp.sigma = octave_sigma(p, s) * scale;
          kp.response = v;
          kp.octave = o;
          kp.level = s;
          kp.ox = x;
          kp.oy = y;
          out.push_back(kp);
        }
      }
    }
  }
  return out;
}

double dominant_orientation(const GrayImage& L, const Keypoint& kp) {
  const double sigma_oct = kp.sigma / std::ldexp(1.0, kp.octave);
  const double sigma_w = 1.5 * sigma_oct;
  const int radius = static_cast<int>(std::lround(3.0 * sigma_w));
  std::array<double, kOrientationBins> hist{};
  for (int dy = -radius; dy <= radius; ++dy) {
    const int y = kp.oy + dy;
    if (y < 0 || y >= L.height) continue;
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = kp.ox + dx;
      if (x < 0 || x >= L.width) continue;
      double gx, gy;
      gradient_at(L, x, y, gx, gy);
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_w * sigma_w));
      const double angle = wrap_angle(std::atan2(gy, gx));
      int bin = static_cast<int>(angle * kOrientationBins / kTwoPi);
      if (bin >= kOrientationBins) bin = 0;
      hist[bin] += w * mag;
    }
  }
  // [1 4 6 4 1] circular smoothing.
  std::array<double, kOrientationBins> smooth{};
  for (int i = 0; i < kOrientationBins; ++i) {
    auto h = [&](int j) { return hist[(j + kOrientationBins) % kOrientationBins]; };
    smooth[i] = (h(i - 2) + h(i + 2)) * (1.0 / 16) + (h(i - 1) + h(i + 1)) * (4.0 / 16) + h(i) * (6.0 / 16);
  }
  const int peak = static_cast<int>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
  if (smooth[peak] <= 0.0) return 0.0;
  const double l = smooth[(peak + kOrientationBins - 1) % kOrientationBins];
  const double r = smooth[(peak + 1) % kOrientationBins];
  const double denom = l - 2.0 * smooth[peak] + r;
  const double offset = denom != 0.0 ? 0.5 * (l - r) / denom : 0.0;
  return wrap_angle((peak + 0.5 + offset) * kTwoPi / kOrientationBins);
}

std::optional<SiftFeature> compute_descriptor(const GrayImage& L, const Keypoint& kp, const ScaleSpaceParams& p) {
  const double sigma_oct = kp.sigma / std::ldexp(1.0, kp.octave);
  // One sample per pixel at the base scale; the support grows with sigma.
  const double step = sigma_oct / p.base_sigma;
  const double half = 0.5 * kPatchSamples * step;
  const double reach = half * std::numbers::sqrt2 + 1.0;
  const double margin = std::max(reach, 8.0);
  if (kp.ox - margin < 0 || kp.oy - margin < 0 || kp.ox + margin > L.width - 1 || kp.oy + margin > L.height - 1)
    return std::nullopt;

  SiftFeature f;
  f.keypoint = kp;
  f.keypoint.orientation = dominant_orientation(L, kp);
  const double c = std::cos(f.keypoint.orientation);
  const double s = std::sin(f.keypoint.orientation);

  std::array<double, kDescriptorWidth * kDescriptorWidth * kDescriptorBins> hist{};
  const double centre = 0.5 * (kPatchSamples - 1);
  const double weight_sigma = 0.5 * kPatchSamples;
  for (int j = 0; j < kPatchSamples; ++j) {
    for (int i = 0; i < kPatchSamples; ++i) {
      const double u = (i - centre) * step;
      const double v = (j - centre) * step;
      const double sx = kp.ox + u * c - v * s;
      const double sy = kp.oy + u * s + v * c;
      const double gx = 0.5 * (bilinear(L, sx + 1.0, sy) - bilinear(L, sx - 1.0, sy));
      const double gy = 0.5 * (bilinear(L, sx, sy + 1.0) - bilinear(L, sx, sy - 1.0));
      const double gu = gx * c + gy * s;
      const double gv = -gx * s + gy * c;
      const double mag = std::hypot(gu, gv);
      if (mag == 0.0) continue;
      const double w = std::exp(-((i - centre) * (i - centre) + (j - centre) * (j - centre)) /
                                (2.0 * weight_sigma * weight_sigma));
      // Continuous bin coordinates; cell centres sit at integer positions.
      const double cb = (i + 0.5) / (kPatchSamples / kDescriptorWidth) - 0.5;
      const double rb = (j + 0.5) / (kPatchSamples / kDescriptorWidth) - 0.5;
      const double ob = wrap_angle(std::atan2(gv, gu)) * kDescriptorBins / kTwoPi;
      const int c0 = static_cast<int>(std::floor(cb));
      const int r0 = static_cast<int>(std::floor(rb));
      const int o0 = static_cast<int>(std::floor(ob));
      const double dc = cb - c0, dr = rb - r0, dob = ob - o0;
      for (int rr = 0; rr <= 1; ++rr) {
        const int row = r0 + rr;
        if (row < 0 || row >= kDescriptorWidth) continue;
        const double wr = rr ? dr : 1.0 - dr;
        for (int cc = 0; cc <= 1; ++cc) {
          const int col = c0 + cc;
          if (col < 0 || col >= kDescriptorWidth) continue;
          const double wc = cc ? dc : 1.0 - dc;
          for (int oo = 0; oo <= 1; ++oo) {
            const int ori = (o0 + oo) % kDescriptorBins;
            const double wo = oo ? dob : 1.0 - dob;
            hist[(row * kDescriptorWidth + col) * kDescriptorBins + ori] += w * mag * wr * wc * wo;
          }
        }
      }
    }
  }

  normalize_descriptor(hist);
  f.descriptor.values = hist;
  return f;
}

void normalize_descriptor(std::array<double, 128>& values) {
  auto normalise = [&]() {
    double sq = 0.0;
    for (double v : values) sq += v * v;
    const double n = std::sqrt(sq);
    if (n == 0.0) return false;
    for (double& v : values) v /= n;
    return true;
  };
  if (normalise()) {
    for (double& v : values) v = std::min(v, kDescriptorClamp);
    normalise();
  }
}

std::vector<SiftFeature> detect(const GrayImage& img, const ScaleSpaceParams& p) {
  const DogPyramid pyr = build_dog_pyramid(img, p);
  std::vector<SiftFeature> out;
  for (const Keypoint& kp : detect_keypoints(pyr, p)) {
    const GrayImage& L = pyr.octaves[kp.octave].gaussians[kp.level];
    if (auto f = compute_descriptor(L, kp, p)) out.push_back(*f);
  }
  std::stable_sort(out.begin(), out.end(), [](const SiftFeature& a, const SiftFeature& b) {
    return std::abs(a.keypoint.response) > std::abs(b.keypoint.response);
  });
  return out;
}

std::string keypoints_to_csv(const std::vector<SiftFeature>& features) {
  std::ostringstream os;
  os.precision(9);
  os << "x,y,sigma,orientation,response";
  for (int i = 0; i < 128; ++i) os << ",d" << i;
  os << '\n';
  for (const auto& f : features) {
    const auto& k = f.keypoint;
    os << k.x << ',' << k.y << ',' << k.sigma << ',' << k.orientation << ',' << k.response;
    for (double v : f.descriptor.values) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace wi
