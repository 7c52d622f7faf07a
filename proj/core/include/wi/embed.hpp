#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wi/sampling.hpp"

namespace wi {

struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const FeatureVector&) const = default;
};

/// Patch embeddings of one document, row-major rows x cols.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::string document_id;

  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

/// Fully-connected ReLU network with a linear output layer. All parameters
/// live in one flat vector: per layer, the out x in weight matrix (row-major)
/// followed by the bias.
class MlpExtractor {
 public:
  MlpExtractor() = default;
  /// Zero-initialised parameters.
  explicit MlpExtractor(std::vector<int> layer_dims);

  const std::vector<int>& layer_dims() const { return dims_; }
  std::size_t layer_count() const { return dims_.size() - 1; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }

  std::span<const double> params() const { return params_; }
  /// Any mutable access invalidates outstanding forward caches.
  std::span<double> mutable_params() {
    ++generation_;
    return params_;
  }

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(dims_[layer]) * dims_[layer + 1];
  }
  std::uint64_t generation() const { return generation_; }

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  std::uint64_t generation_ = 0;
};

/// Glorot-uniform weights, zero biases; deterministic per seed.
MlpExtractor init_extractor(const std::vector<int>& layer_dims, std::uint64_t seed);

/// Activations recorded by forward() for use by backward().
struct ForwardCache {
  /// activations[0] is the input, activations[l + 1] the output of layer l
  /// (post-ReLU for hidden layers).
  std::vector<std::vector<double>> activations;
  std::uint64_t generation = 0;
  std::size_t param_count = 0;
};

FeatureVector forward(const MlpExtractor& e, std::span<const double> input, ForwardCache* cache = nullptr);

/// Gradients laid out like MlpExtractor::params().
struct MlpGradients {
  std::vector<double> params;
  std::vector<double> input;
};

MlpGradients backward(const MlpExtractor& e, const ForwardCache& cache, std::span<const double> output_gradient);

/// Adds parameter gradients into param_grads; writes the input gradient when
/// input_grad is non-null.
void backward_accumulate(const MlpExtractor& e, const ForwardCache& cache, std::span<const double> output_gradient,
                         std::span<double> param_grads, std::vector<double>* input_grad = nullptr);

/// Activations of a batch forward pass; activations[l] is rows x dims[l].
struct BatchCache {
  std::size_t rows = 0;
  std::vector<std::vector<double>> activations;
  std::uint64_t generation = 0;
  std::size_t param_count = 0;
};

/// Row-major rows x input_dim in, rows x output_dim out. Each row's result is
/// bit-identical to forward() on that row alone.
std::vector<double> forward_batch(const MlpExtractor& e, std::span<const double> inputs, std::size_t rows,
                                  BatchCache* cache = nullptr);

/// Adds the parameter gradients of all rows (rows x output_dim gradients) in
/// row order, matching repeated backward_accumulate calls.
void backward_batch(const MlpExtractor& e, const BatchCache& cache, std::span<const double> output_grads,
                    std::span<double> param_grads);

/// Row i = forward(standardize(patch i)).
EmbeddingMatrix embed_document(const MlpExtractor& e, const std::vector<Patch>& patches,
                               const std::string& document_id = {});

/// Feature file: "WIFV1\n", "rows cols\n", row-major little-endian float32.
void export_features(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix import_features(const std::filesystem::path& path);
EmbeddingMatrix import_features(const std::filesystem::path& path, std::size_t expected_cols);

}  // namespace wi
