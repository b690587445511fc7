#include "mvr/dense_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvr {

DenseMatrix::DenseMatrix(int r, int c, double fill)
    : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {
  if (r < 0 || c < 0) throw std::invalid_argument("DenseMatrix: negative dimension");
}

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> data) {
  DenseMatrix m(static_cast<int>(data.size()),
                data.size() ? static_cast<int>(data.begin()->size()) : 0);
  int r = 0;
  for (const auto& rowdata : data) {
    if (static_cast<int>(rowdata.size()) != m.cols)
      throw std::invalid_argument("DenseMatrix::from_rows: ragged rows");
    int c = 0;
    for (double v : rowdata) m.at(r, c++) = v;
    ++r;
  }
  return m;
}

std::string DenseMatrix::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: dimension mismatch " + a.shape_str() + " * " + b.shape_str());
  DenseMatrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

DenseMatrix gather_rows(const DenseMatrix& a, const std::vector<int>& rows) {
  DenseMatrix out(static_cast<int>(rows.size()), a.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows)
      throw std::out_of_range("gather_rows: index " + std::to_string(rows[i]) +
                              " outside 0.." + std::to_string(a.rows - 1));
    std::copy(a.row(rows[i]), a.row(rows[i]) + a.cols, out.row(static_cast<int>(i)));
  }
  return out;
}

DenseMatrix pairwise_sq_dist(const DenseMatrix& e1, const DenseMatrix& e2) {
  if (e1.cols != e2.cols)
    throw std::invalid_argument("pairwise_sq_dist: dimension mismatch " + e1.shape_str() +
                                " vs " + e2.shape_str());
  std::vector<double> n1(e1.rows), n2(e2.rows);
  for (int i = 0; i < e1.rows; ++i) {
    const double* r = e1.row(i);
    double s = 0.0;
    for (int k = 0; k < e1.cols; ++k) s += r[k] * r[k];
    n1[i] = s;
  }
  for (int j = 0; j < e2.rows; ++j) {
    const double* r = e2.row(j);
    double s = 0.0;
    for (int k = 0; k < e2.cols; ++k) s += r[k] * r[k];
    n2[j] = s;
  }
  DenseMatrix dots = matmul(e1, transpose(e2));
  DenseMatrix out(e1.rows, e2.rows);
  for (int i = 0; i < e1.rows; ++i)
    for (int j = 0; j < e2.rows; ++j) {
      double d = n1[i] + n2[j] - 2.0 * dots.at(i, j);
      out.at(i, j) = d > 0.0 ? d : 0.0;
    }
  return out;
}

void add_inplace(DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
}

void axpy_inplace(DenseMatrix& a, double alpha, const DenseMatrix& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("axpy: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += alpha * b.values[i];
}

void scale_inplace(DenseMatrix& a, double alpha) {
  for (double& v : a.values) v *= alpha;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("hadamard: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= b.values[i];
  return out;
}

bool all_finite(const DenseMatrix& a) {
  for (double v : a.values)
    if (!std::isfinite(v)) return false;
  return true;
}

void check_finite(const DenseMatrix& a, const std::string& context) {
  if (!all_finite(a)) throw std::runtime_error(context + ": non-finite values");
}

double sq_dist(const double* u, const double* v, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) {
    double d = u[k] - v[k];
    s += d * d;
  }
  return s;
}

}  // namespace mvr
