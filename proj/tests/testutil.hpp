#pragma once

#include <cmath>
#include <functional>

#include "mvr/dense_matrix.hpp"
#include "mvr/rng.hpp"

namespace mvr::testutil {

/// Central finite differences of a scalar-valued function w.r.t. one tensor.
/// `f` must read the current contents of `x` on every call.
inline DenseMatrix finite_diff(const std::function<double()>& f, DenseMatrix& x,
                               double h = 1e-5) {
  DenseMatrix g(x.rows, x.cols);
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    const double orig = x.values[i];
    x.values[i] = orig + h;
    const double fp = f();
    x.values[i] = orig - h;
    const double fm = f();
    x.values[i] = orig;
    g.values[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Norm-based relative error ||a-b|| / (||a|| + ||b||). When both norms sit
/// below `floor` the difference is indistinguishable from central-difference
/// rounding noise (~eps*|loss|/h), so the gradients are treated as matching
/// zeros. Matters for parameters with no effect, e.g. a bias feeding a
/// train-mode batchnorm.
inline double grad_rel_err(const DenseMatrix& a, const DenseMatrix& b,
                           double floor = 1e-7) {
  double diff2 = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    diff2 += d * d;
    na2 += a.values[i] * a.values[i];
    nb2 += b.values[i] * b.values[i];
  }
  const double den = std::sqrt(na2) + std::sqrt(nb2);
  if (den < floor) return 0.0;
  return std::sqrt(diff2) / den;
}

inline DenseMatrix random_matrix(int rows, int cols, RngStream& rng, double scale = 1.0) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values) v = scale * rng.next_gaussian();
  return m;
}

/// Sum of an elementwise product — turns any tensor output into a scalar loss
/// whose upstream gradient is exactly `weights`.
inline double weighted_sum(const DenseMatrix& y, const DenseMatrix& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.values.size(); ++i) s += y.values[i] * weights.values[i];
  return s;
}

}  // namespace mvr::testutil
