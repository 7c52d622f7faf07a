#pragma once

#include <vector>

#include "wi/embed.hpp"

namespace wi {

struct PcaModel {
  std::vector<double> mean;
  /// dims x cols, orthonormal rows in descending eigenvalue order. Each row's
  /// largest-magnitude entry is positive.
  std::vector<double> components;
  /// Eigenvalues of the retained components.
  std::vector<double> explained_variance;
  /// Retained eigenvalues over the total variance (0 when total is 0).
  std::vector<double> explained_ratio;
  std::size_t cols = 0;
  std::size_t dims = 0;
};

/// Eigen-decomposition of a symmetric n x n matrix (row-major) by cyclic
/// Jacobi rotations. Returns eigenvalues descending and eigenvectors as rows.
void symmetric_eigen(std::vector<double> a, std::size_t n, std::vector<double>& eigenvalues,
                     std::vector<double>& eigenvectors);

/// Fits on the rows of `data`; requires 2 <= rows and dims <= min(rows - 1, cols).
PcaModel pca_fit(const EmbeddingMatrix& data, std::size_t dims);

EmbeddingMatrix pca_project(const PcaModel& model, const EmbeddingMatrix& data);

}  // namespace wi
