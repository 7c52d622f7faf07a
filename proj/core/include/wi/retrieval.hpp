#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "wi/embed.hpp"

namespace wi {

/// Column-wise mean of the patch embeddings.
FeatureVector mean_pool(const EmbeddingMatrix& m);

enum class DistanceMetric { euclidean, cosine };

std::string to_string(DistanceMetric m);
DistanceMetric distance_metric_from_string(const std::string& s);

struct DistanceMatrix {
  std::size_t size = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
};

/// Symmetric with a zero diagonal; cosine distances are 1 - cos, exactly 0
/// between identical vectors.
DistanceMatrix distance_matrix(const std::vector<FeatureVector>& docs, DistanceMetric metric);

struct RetrievalReport {
  std::vector<std::string> labels;
  /// rankings[q] lists every other document, nearest first (ties by index).
  std::vector<std::vector<std::size_t>> rankings;
  /// Per-query AP; queries without a same-writer partner are excluded.
  std::vector<double> average_precision;
  std::vector<bool> excluded;
  std::size_t evaluated_queries = 0;
  std::size_t excluded_queries = 0;
  std::map<int, double> top_k;
  std::map<int, double> precision_at;
  double mean_average_precision = 0.0;

  double top1() const { return top_k.at(1); }
};

/// Leave-one-out retrieval over a square distance matrix.
RetrievalReport leave_one_out_retrieval(const DistanceMatrix& dist, const std::vector<std::string>& labels,
                                        const std::vector<int>& top_ks = {1, 5},
                                        const std::vector<int>& precision_ks = {2});

}  // namespace wi
