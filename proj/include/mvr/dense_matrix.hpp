#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace mvr {

/// Row-major dense matrix of 64-bit floats. The universal value carrier:
/// feature batches, embeddings, weights, and per-column parameter vectors
/// (stored as 1xN) all live in this type.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // rows * cols, row-major

  DenseMatrix() = default;
  DenseMatrix(int r, int c, double fill = 0.0);

  static DenseMatrix identity(int n);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> data);

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return values.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return values.data() + static_cast<std::size_t>(r) * cols; }

  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
  std::size_t size() const { return values.size(); }
  std::string shape_str() const;
};

/// Standard matrix product. Throws on inner-dimension mismatch.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix transpose(const DenseMatrix& a);

/// New matrix whose i-th row is a.row(rows[i]); indices may repeat.
DenseMatrix gather_rows(const DenseMatrix& a, const std::vector<int>& rows);

/// Squared Euclidean distances between all row pairs: out(i,j) = ||e1_i - e2_j||^2.
/// Uses the ||u||^2 + ||v||^2 - 2 u.v expansion, clamped at zero from below.
DenseMatrix pairwise_sq_dist(const DenseMatrix& e1, const DenseMatrix& e2);

// Elementwise helpers. Shapes must match where two matrices are involved.
void add_inplace(DenseMatrix& a, const DenseMatrix& b);
void axpy_inplace(DenseMatrix& a, double alpha, const DenseMatrix& b);  // a += alpha * b
void scale_inplace(DenseMatrix& a, double alpha);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);

bool all_finite(const DenseMatrix& a);

/// Throws std::runtime_error naming `context` if any entry is NaN/Inf.
void check_finite(const DenseMatrix& a, const std::string& context);

double sq_dist(const double* u, const double* v, int dim);

}  // namespace mvr
