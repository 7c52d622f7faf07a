#include "wi/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wi/error.hpp"

namespace wi {

void symmetric_eigen(std::vector<double> a, std::size_t n, std::vector<double>& eigenvalues,
                     std::vector<double>& eigenvectors) {
  if (a.size() != n * n) throw ConfigError("symmetric_eigen: shape mismatch");
  // v holds eigenvectors as columns during the sweeps.
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  auto A = [&](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };

  double total = 0.0;
  for (double x : a) total += x * x;
  const double tol = 1e-30 * std::max(total, 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off <= tol) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return A(i, i) > A(j, j); });
  eigenvalues.resize(n);
  eigenvectors.assign(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    eigenvalues[r] = A(order[r], order[r]);
    for (std::size_t k = 0; k < n; ++k) eigenvectors[r * n + k] = v[k * n + order[r]];
  }
}

PcaModel pca_fit(const EmbeddingMatrix& data, std::size_t dims) {
  const std::size_t n = data.rows, d = data.cols;
  if (n < 2) throw DataError("pca_fit: need at least 2 rows");
  if (dims < 1 || dims > std::min(n - 1, d))
    throw ConfigError("pca_fit: dims " + std::to_string(dims) + " exceeds min(rows - 1, cols) = " +
                      std::to_string(std::min(n - 1, d)));

  PcaModel m;
  m.cols = d;
  m.dims = dims;
  m.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) m.mean[c] += data.data[r * d + c];
  for (double& v : m.mean) v /= static_cast<double>(n);

  std::vector<double> cov(d * d, 0.0), centred(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) centred[c] = data.data[r * d + c] - m.mean[c];
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centred[i];
      if (ci == 0.0) continue;
      for (std::size_t j = i; j < d; ++j) cov[i * d + j] += ci * centred[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov[i * d + j] /= static_cast<double>(n - 1);
      cov[j * d + i] = cov[i * d + j];
    }

  std::vector<double> values, vectors;
  symmetric_eigen(std::move(cov), d, values, vectors);
  for (double& v : values) v = std::max(v, 0.0);
  const double total = std::accumulate(values.begin(), values.end(), 0.0);

  m.components.assign(vectors.begin(), vectors.begin() + static_cast<std::ptrdiff_t>(dims * d));
  for (std::size_t r = 0; r < dims; ++r) {
    double* row = &m.components[r * d];
    std::size_t arg = 0;
    for (std::size_t k = 1; k < d; ++k)
      if (std::abs(row[k]) > std::abs(row[arg])) arg = k;
    if (row[arg] < 0.0)
      for (std::size_t k = 0; k < d; ++k) row[k] = -row[k];
    m.explained_variance.push_back(values[r]);
    m.explained_ratio.push_back(total > 0.0 ? values[r] / total : 0.0);
  }
  return m;
}

EmbeddingMatrix pca_project(const PcaModel& model, const EmbeddingMatrix& data) {
  if (data.cols != model.cols)
    throw DataError("pca_project: data has " + std::to_string(data.cols) + " columns, model expects " +
                    std::to_string(model.cols));
  EmbeddingMatrix out;
  out.rows = data.rows;
  out.cols = model.dims;
  out.document_id = data.document_id;
  out.data.assign(out.rows * out.cols, 0.0);
  std::vector<double> centred(model.cols);
  for (std::size_t r = 0; r < data.rows; ++r) {
    for (std::size_t c = 0; c < model.cols; ++c) centred[c] = data.data[r * model.cols + c] - model.mean[c];
    for (std::size_t k = 0; k < model.dims; ++k) {
      const double* comp = &model.components[k * model.cols];
      double acc = 0.0;
      for (std::size_t c = 0; c < model.cols; ++c) acc += comp[c] * centred[c];
      out.data[r * out.cols + k] = acc;
    }
  }
  return out;
}

}  // namespace wi
