#include "wi/embed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "wi/error.hpp"
#include "wi/rng.hpp"

namespace wi {
namespace {

constexpr char kFeatureMagic[] = "WIFV1\n";

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

}  // namespace

MlpExtractor::MlpExtractor(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw ConfigError("extractor needs at least 2 layer dims");
  for (int d : dims_)
    if (d <= 0) throw ConfigError("extractor layer dims must be positive");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(dims_[l]) * dims_[l + 1] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
}

MlpExtractor init_extractor(const std::vector<int>& layer_dims, std::uint64_t seed) {
  MlpExtractor e(layer_dims);
  Rng rng(seed);
  auto p = e.mutable_params();
  for (std::size_t l = 0; l < e.layer_count(); ++l) {
    const int fan_in = layer_dims[l], fan_out = layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    const std::size_t n = static_cast<std::size_t>(fan_in) * fan_out;
    for (std::size_t i = 0; i < n; ++i) p[e.weight_offset(l) + i] = uniform_real(rng, -bound, bound);
  }
  return e;
}

namespace {

// Lane k sums the products at indices i = k (mod 4); lanes combine pairwise.
// dot_rows4 repeats exactly the same arithmetic for four rows at once, so a
// row's result never depends on which other rows share its batch.
double dot(const double* a, const double* x, int n) {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += a[i] * x[i];
    l1 += a[i + 1] * x[i + 1];
    l2 += a[i + 2] * x[i + 2];
    l3 += a[i + 3] * x[i + 3];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * x[i];
  return ((l0 + l1) + (l2 + l3)) + tail;
}

void dot_rows4(const double* a, const double* x0, const double* x1, const double* x2, const double* x3, int n,
               double* out) {
  double acc[4][4] = {};
  const double* xs[4] = {x0, x1, x2, x3};
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int r = 0; r < 4; ++r) {
      acc[r][0] += a[i] * xs[r][i];
      acc[r][1] += a[i + 1] * xs[r][i + 1];
      acc[r][2] += a[i + 2] * xs[r][i + 2];
      acc[r][3] += a[i + 3] * xs[r][i + 3];
    }
  }
  for (int r = 0; r < 4; ++r) {
    double tail = 0.0;
    for (int j = i; j < n; ++j) tail += a[j] * xs[r][j];
    out[r] = ((acc[r][0] + acc[r][1]) + (acc[r][2] + acc[r][3])) + tail;
  }
}

void affine_layer(const double* w, const double* b, const double* x, std::size_t rows, int in, int out, bool relu,
                  double* y) {
  for (int o = 0; o < out; ++o) {
    const double* row = w + static_cast<std::size_t>(o) * in;
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) {
      double d[4];
      dot_rows4(row, x + r * in, x + (r + 1) * in, x + (r + 2) * in, x + (r + 3) * in, in, d);
      for (int k = 0; k < 4; ++k) {
        const double v = b[o] + d[k];
        y[(r + k) * out + o] = relu ? std::max(v, 0.0) : v;
      }
    }
    for (; r < rows; ++r) {
      const double v = b[o] + dot(row, x + r * in, in);
      y[r * out + o] = relu ? std::max(v, 0.0) : v;
    }
  }
}

void check_input(const MlpExtractor& e, std::size_t size, std::size_t rows) {
  if (size != rows * static_cast<std::size_t>(e.input_dim()))
    throw ConfigError("forward: input length " + std::to_string(rows ? size / rows : size) + " != " +
                      std::to_string(e.input_dim()));
}

}  // namespace

std::vector<double> forward_batch(const MlpExtractor& e, std::span<const double> inputs, std::size_t rows,
                                  BatchCache* cache) {
  check_input(e, inputs.size(), rows);
  const auto& dims = e.layer_dims();
  const auto p = e.params();
  std::vector<double> x(inputs.begin(), inputs.end());
  if (cache) {
    cache->rows = rows;
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  for (std::size_t l = 0; l < e.layer_count(); ++l) {
    std::vector<double> y(rows * dims[l + 1]);
    affine_layer(p.data() + e.weight_offset(l), p.data() + e.bias_offset(l), x.data(), rows, dims[l], dims[l + 1],
                 l + 1 < e.layer_count(), y.data());
    x = std::move(y);
    if (cache) cache->activations.push_back(x);
  }
  if (cache) {
    cache->generation = e.generation();
    cache->param_count = p.size();
  }
  return x;
}

void backward_batch(const MlpExtractor& e, const BatchCache& cache, std::span<const double> output_grads,
                    std::span<double> param_grads) {
  const std::size_t rows = cache.rows;
  if (cache.generation != e.generation() || cache.param_count != e.params().size() ||
      cache.activations.size() != e.layer_count() + 1)
    throw ConfigError("backward: stale forward cache");
  if (output_grads.size() != rows * static_cast<std::size_t>(e.output_dim()))
    throw ConfigError("backward: output gradient length mismatch");
  if (param_grads.size() != e.params().size()) throw ConfigError("backward: gradient buffer size mismatch");

  const auto& dims = e.layer_dims();
  const auto p = e.params();
  std::vector<double> g(output_grads.begin(), output_grads.end());
  for (std::size_t l = e.layer_count(); l-- > 0;) {
    const int in = dims[l], out = dims[l + 1];
    const auto& x = cache.activations[l];
    if (l + 1 < e.layer_count()) {
      const auto& y = cache.activations[l + 1];
      for (std::size_t i = 0; i < g.size(); ++i)
        if (y[i] <= 0.0) g[i] = 0.0;
    }
    double* dw = param_grads.data() + e.weight_offset(l);
    double* db = param_grads.data() + e.bias_offset(l);
    const double* w = p.data() + e.weight_offset(l);
    const bool need_input = l > 0;
    std::vector<double> gx(need_input ? rows * in : 0, 0.0);
    // Per element, contributions arrive in row order, as with per-row backward.
    for (int o = 0; o < out; ++o) {
      double* dwr = dw + static_cast<std::size_t>(o) * in;
      const double* wr = w + static_cast<std::size_t>(o) * in;
      for (std::size_t r = 0; r < rows; ++r) {
        const double go = g[r * out + o];
        if (go == 0.0) continue;
        db[o] += go;
        const double* xr = x.data() + r * in;
        for (int i = 0; i < in; ++i) dwr[i] += go * xr[i];
        if (need_input) {
          double* gxr = gx.data() + r * in;
          for (int i = 0; i < in; ++i) gxr[i] += wr[i] * go;
        }
      }
    }
    g = std::move(gx);
  }
}

FeatureVector forward(const MlpExtractor& e, std::span<const double> input, ForwardCache* cache) {
  check_input(e, input.size(), 1);
  if (!cache) return FeatureVector{forward_batch(e, input, 1, nullptr)};
  BatchCache bc;
  FeatureVector f{forward_batch(e, input, 1, &bc)};
  cache->activations = std::move(bc.activations);
  cache->generation = bc.generation;
  cache->param_count = bc.param_count;
  return f;
}

void backward_accumulate(const MlpExtractor& e, const ForwardCache& cache, std::span<const double> output_gradient,
                         std::span<double> param_grads, std::vector<double>* input_grad) {
  if (cache.generation != e.generation() || cache.param_count != e.params().size() ||
      cache.activations.size() != e.layer_count() + 1)
    throw ConfigError("backward: stale forward cache");
  if (output_gradient.size() != static_cast<std::size_t>(e.output_dim()))
    throw ConfigError("backward: output gradient length mismatch");
  if (param_grads.size() != e.params().size()) throw ConfigError("backward: gradient buffer size mismatch");

  const auto& dims = e.layer_dims();
  const auto p = e.params();
  std::vector<double> g(output_gradient.begin(), output_gradient.end());
  for (std::size_t l = e.layer_count(); l-- > 0;) {
    const int in = dims[l], out = dims[l + 1];
    const auto& x = cache.activations[l];
    if (l + 1 < e.layer_count()) {
      // ReLU: the recorded output is zero exactly where the unit was inactive.
      const auto& y = cache.activations[l + 1];
      for (int o = 0; o < out; ++o)
        if (y[o] <= 0.0) g[o] = 0.0;
    }
    double* dw = param_grads.data() + e.weight_offset(l);
    double* db = param_grads.data() + e.bias_offset(l);
    const double* w = p.data() + e.weight_offset(l);
    const bool need_input = l > 0 || input_grad != nullptr;
    std::vector<double> gx(need_input ? in : 0, 0.0);
    for (int o = 0; o < out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      db[o] += go;
      double* dwr = dw + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) dwr[i] += go * x[i];
      if (need_input) {
        const double* wr = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) gx[i] += wr[i] * go;
      }
    }
    g = std::move(gx);
  }
  if (input_grad) *input_grad = std::move(g);
}

MlpGradients backward(const MlpExtractor& e, const ForwardCache& cache, std::span<const double> output_gradient) {
  MlpGradients out;
  out.params.assign(e.params().size(), 0.0);
  backward_accumulate(e, cache, output_gradient, out.params, &out.input);
  return out;
}

EmbeddingMatrix embed_document(const MlpExtractor& e, const std::vector<Patch>& patches,
                               const std::string& document_id) {
  if (patches.empty()) throw DataError("embed_document: no patches for " + document_id);
  EmbeddingMatrix m;
  m.rows = patches.size();
  m.cols = static_cast<std::size_t>(e.output_dim());
  m.document_id = document_id;
  std::vector<double> inputs;
  inputs.reserve(patches.size() * static_cast<std::size_t>(e.input_dim()));
  for (const Patch& p : patches) {
    const auto v = standardize(p.pixels);
    inputs.insert(inputs.end(), v.begin(), v.end());
  }
  m.data = forward_batch(e, inputs, m.rows);
  return m;
}

void export_features(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  if (m.data.size() != m.rows * m.cols) throw DataError("export_features: inconsistent matrix");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file " + path.string());
  out << kFeatureMagic << m.rows << ' ' << m.cols << '\n';
  for (double v : m.data) {
    const auto bits = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    out.write(reinterpret_cast<const char*>(&bits), 4);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

EmbeddingMatrix import_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  std::string magic(sizeof(kFeatureMagic) - 1, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kFeatureMagic) throw DataError("bad feature file magic in " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError("truncated feature header in " + path.string());
  std::istringstream hs(header);
  long long rows = -1, cols = -1;
  hs >> rows >> cols;
  if (!hs || rows < 0 || cols <= 0) throw DataError("malformed feature header in " + path.string());

  EmbeddingMatrix m;
  m.rows = static_cast<std::size_t>(rows);
  m.cols = static_cast<std::size_t>(cols);
  m.document_id = path.stem().string();
  m.data.resize(m.rows * m.cols);
  for (double& v : m.data) {
    std::uint32_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), 4);
    if (in.gcount() != 4) throw DataError("truncated feature file " + path.string());
    v = static_cast<double>(std::bit_cast<float>(to_le(bits)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in feature file " + path.string());
  return m;
}

EmbeddingMatrix import_features(const std::filesystem::path& path, std::size_t expected_cols) {
  EmbeddingMatrix m = import_features(path);
  if (m.cols != expected_cols)
    throw DataError("feature file " + path.string() + " has " + std::to_string(m.cols) + " columns, expected " +
                    std::to_string(expected_cols));
  return m;
}

}  // namespace wi
