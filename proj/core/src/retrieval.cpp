#include "wi/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wi/error.hpp"

namespace wi {

FeatureVector mean_pool(const EmbeddingMatrix& m) {
  if (m.rows == 0) throw DataError("mean_pool: empty embedding matrix " + m.document_id);
  FeatureVector out{std::vector<double>(m.cols, 0.0)};
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out.values[c] += m.data[r * m.cols + c];
  for (double& v : out.values) v /= static_cast<double>(m.rows);
  return out;
}

std::string to_string(DistanceMetric m) { return m == DistanceMetric::cosine ? "cosine" : "euclidean"; }

DistanceMetric distance_metric_from_string(const std::string& s) {
  if (s == "euclidean") return DistanceMetric::euclidean;
  if (s == "cosine") return DistanceMetric::cosine;
  throw ConfigError("unknown distance metric '" + s + "' (expected euclidean|cosine)");
}

DistanceMatrix distance_matrix(const std::vector<FeatureVector>& docs, DistanceMetric metric) {
  if (docs.size() < 2) throw DataError("distance_matrix: need at least 2 documents");
  const std::size_t dim = docs.front().size();
  for (const auto& d : docs)
    if (d.size() != dim) throw DataError("distance_matrix: feature dimensions differ");

  std::vector<double> norms(docs.size(), 0.0);
  if (metric == DistanceMetric::cosine) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      norms[i] = std::sqrt(std::inner_product(docs[i].values.begin(), docs[i].values.end(), docs[i].values.begin(), 0.0));
      if (norms[i] == 0.0) throw NumericError("distance_matrix: zero vector under cosine metric (document " +
                                              std::to_string(i) + ")");
    }
  }
  DistanceMatrix out{docs.size(), std::vector<double>(docs.size() * docs.size(), 0.0)};
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::size_t j = i + 1; j < docs.size(); ++j) {
      const auto& a = docs[i].values;
      const auto& b = docs[j].values;
      double d = 0.0;
      if (metric == DistanceMetric::euclidean) {
        for (std::size_t k = 0; k < dim; ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
        d = std::sqrt(d);
      } else if (a != b) {
        d = 1.0 - std::inner_product(a.begin(), a.end(), b.begin(), 0.0) / (norms[i] * norms[j]);
      }
      out.values[i * out.size + j] = d;
      out.values[j * out.size + i] = d;
    }
  }
  return out;
}

RetrievalReport leave_one_out_retrieval(const DistanceMatrix& dist, const std::vector<std::string>& labels,
                                        const std::vector<int>& top_ks, const std::vector<int>& precision_ks) {
  const std::size_t n = dist.size;
  if (dist.values.size() != n * n) throw DataError("retrieval: distance matrix is not square");
  if (labels.size() != n)
    throw DataError("retrieval: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " documents");

  RetrievalReport rep;
  rep.labels = labels;
  rep.rankings.resize(n);
  rep.average_precision.assign(n, 0.0);
  rep.excluded.assign(n, false);
  std::map<int, std::size_t> hits;
  std::map<int, double> precision_sum;
  double ap_sum = 0.0;

  for (std::size_t q = 0; q < n; ++q) {
    auto& rank = rep.rankings[q];
    for (std::size_t j = 0; j < n; ++j)
      if (j != q) rank.push_back(j);
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
      const double da = dist.at(q, a), db = dist.at(q, b);
      if (da != db) return da < db;
      return a < b;
    });

    std::size_t relevant = 0;
    for (std::size_t j : rank) relevant += labels[j] == labels[q];
    if (relevant == 0) {
      rep.excluded[q] = true;
      ++rep.excluded_queries;
      continue;
    }
    ++rep.evaluated_queries;

    double ap = 0.0;
    std::size_t seen = 0;
    for (std::size_t i = 0; i < rank.size(); ++i) {
      if (labels[rank[i]] != labels[q]) continue;
      ++seen;
      ap += static_cast<double>(seen) / static_cast<double>(i + 1);
    }
    ap /= static_cast<double>(relevant);
    rep.average_precision[q] = ap;
    ap_sum += ap;

    for (int k : top_ks) {
      const std::size_t lim = std::min<std::size_t>(k, rank.size());
      bool hit = false;
      for (std::size_t i = 0; i < lim && !hit; ++i) hit = labels[rank[i]] == labels[q];
      hits[k] += hit;
    }
    for (int k : precision_ks) {
      std::size_t good = 0;
      const std::size_t lim = std::min<std::size_t>(k, rank.size());
      for (std::size_t i = 0; i < lim; ++i) good += labels[rank[i]] == labels[q];
      precision_sum[k] += static_cast<double>(good) / static_cast<double>(k);
    }
  }

  const double denom = rep.evaluated_queries > 0 ? static_cast<double>(rep.evaluated_queries) : 1.0;
  for (int k : top_ks) rep.top_k[k] = static_cast<double>(hits[k]) / denom;
  for (int k : precision_ks) rep.precision_at[k] = precision_sum[k] / denom;
  rep.mean_average_precision = ap_sum / denom;
  return rep;
}

}  // namespace wi
