#include "wi/binarize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "wi/error.hpp"
#include "wi/image_io.hpp"

namespace wi {

namespace {
constexpr int kBins = 256;
constexpr double kSauvolaRange = 0.5;
}  // namespace

void BinarizerSpec::validate() const {
  if (kind == BinarizerKind::sauvola) {
    if (sauvola_window < 3 || sauvola_window % 2 == 0)
      throw ConfigError("sauvola window must be odd and >= 3");
    if (!(sauvola_k > 0.0 && sauvola_k < 1.0)) throw ConfigError("sauvola k must lie in (0, 1)");
  }
  if (kind == BinarizerKind::external && external_path_template.empty())
    throw ConfigError("external binarizer requires a mask path template");
}

std::string to_string(BinarizerKind kind) {
  switch (kind) {
    case BinarizerKind::otsu: return "otsu";
    case BinarizerKind::sauvola: return "sauvola";
    case BinarizerKind::external: return "external";
  }
  return "otsu";
}

BinarizerKind binarizer_kind_from_string(const std::string& name) {
  if (name == "otsu") return BinarizerKind::otsu;
  if (name == "sauvola") return BinarizerKind::sauvola;
  if (name == "external") return BinarizerKind::external;
  throw ConfigError("unknown binarizer kind: " + name);
}

int intensity_bin(double v) {
  return std::clamp(static_cast<int>(std::floor(v * kBins)), 0, kBins - 1);
}

int otsu_threshold_bin(const GrayImage& img) {
  if (img.empty()) throw DataError("otsu: empty image");
  std::array<std::uint64_t, kBins> hist{};
  for (double v : img.pixels) ++hist[intensity_bin(v)];
  const double total = static_cast<double>(img.pixels.size());
  double sum_all = 0.0;
  for (int i = 0; i < kBins; ++i) sum_all += i * static_cast<double>(hist[i]);

  double best = 0.0;
  int best_bin = -1;
  double w0 = 0.0, sum0 = 0.0;
  for (int t = 0; t < kBins - 1; ++t) {
    w0 += static_cast<double>(hist[t]);
    sum0 += t * static_cast<double>(hist[t]);
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = t;
    }
  }
  return best_bin;
}

BinaryMask otsu(const GrayImage& img) {
  const int t = otsu_threshold_bin(img);
  BinaryMask out(img.width, img.height);
  if (t < 0) return out;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.bits[i] = intensity_bin(img.pixels[i]) <= t ? 1 : 0;
  return out;
}

BinaryMask sauvola(const GrayImage& img, int window, double k) {
  if (img.empty()) throw DataError("sauvola: empty image");
  BinarizerSpec{BinarizerKind::sauvola, window, k, {}, true}.validate();
  if (window > img.width || window > img.height) throw DataError("sauvola: window larger than image");

  const int w = img.width, h = img.height;
  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  std::vector<std::int64_t> sum(stride * (h + 1), 0), sq(stride * (h + 1), 0);
  std::vector<std::int64_t> q(img.pixels.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = to_byte(img.pixels[i]);
  for (int y = 0; y < h; ++y) {
    std::int64_t rs = 0, rq = 0;
    for (int x = 0; x < w; ++x) {
      const std::int64_t v = q[static_cast<std::size_t>(y) * w + x];
      rs += v;
      rq += v * v;
      sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
      sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + rq;
    }
  }
  const int r = window / 2;
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      auto box = [&](const std::vector<std::int64_t>& t) {
        return t[(y1 + 1) * stride + x1 + 1] - t[y0 * stride + x1 + 1] - t[(y1 + 1) * stride + x0] + t[y0 * stride + x0];
      };
      const std::int64_t n = static_cast<std::int64_t>(x1 - x0 + 1) * (y1 - y0 + 1);
      const std::int64_t s = box(sum);
      const std::int64_t s2 = box(sq);
      // n * var * n, exact in integers.
      const std::int64_t nvar = n * s2 - s * s;
      const double mean = static_cast<double>(s) / static_cast<double>(n) / 255.0;
      const double stddev = std::sqrt(static_cast<double>(nvar)) / static_cast<double>(n) / 255.0;
      const double t = mean * (1.0 + k * (stddev / kSauvolaRange - 1.0));
      out.bits[static_cast<std::size_t>(y) * w + x] = static_cast<double>(q[static_cast<std::size_t>(y) * w + x]) / 255.0 < t ? 1 : 0;
    }
  }
  return out;
}

BinaryMask import_mask(const std::filesystem::path& path, std::pair<int, int> expected_dims, bool ink_is_white) {
  const GrayImage img = read_image(path);
  if (img.width != expected_dims.first || img.height != expected_dims.second)
    throw DataError("mask " + path.string() + " has dims " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + ", expected " + std::to_string(expected_dims.first) + "x" +
                    std::to_string(expected_dims.second));
  BinaryMask out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const bool nonzero = img.pixels[i] > 0.0;
    out.bits[i] = (nonzero == ink_is_white) ? 1 : 0;
  }
  return out;
}

double f_measure(const BinaryMask& mask, const BinaryMask& truth) {
  if (mask.width != truth.width || mask.height != truth.height)
    throw DataError("f_measure: mask dims differ from truth dims");
  std::size_t tp = 0, pred = 0, real = 0;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    pred += mask.bits[i];
    real += truth.bits[i];
    tp += mask.bits[i] & truth.bits[i];
  }
  if (pred == 0 && real == 0) return 1.0;
  if (pred == 0 || real == 0 || tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(pred);
  const double recall = static_cast<double>(tp) / static_cast<double>(real);
  return 2.0 * precision * recall / (precision + recall);
}

BinaryMask binarize(const GrayImage& img, const BinarizerSpec& spec, const std::filesystem::path& source_path) {
  spec.validate();
  switch (spec.kind) {
    case BinarizerKind::otsu: return otsu(img);
    case BinarizerKind::sauvola: return sauvola(img, spec.sauvola_window, spec.sauvola_k);
    case BinarizerKind::external: {
      std::string path = spec.external_path_template;
      const std::string stem = source_path.stem().string();
      for (auto pos = path.find("{stem}"); pos != std::string::npos; pos = path.find("{stem}", pos + stem.size()))
        path.replace(pos, 6, stem);
      return import_mask(path, {img.width, img.height}, spec.external_ink_white);
    }
  }
  throw ConfigError("unknown binarizer kind");
}

}  // namespace wi
