#include "mvr/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace mvr {

FcResult fc_forward(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& b,
                    Activation act) {
  if (x.cols != w.rows)
    throw std::invalid_argument("fc_forward: input/weight mismatch " + x.shape_str() + " vs " +
                                w.shape_str());
  if (b.rows != 1 || b.cols != w.cols)
    throw std::invalid_argument("fc_forward: bias shape " + b.shape_str() + ", expected 1x" +
                                std::to_string(w.cols));
  DenseMatrix pre = matmul(x, w);
  for (int i = 0; i < pre.rows; ++i) {
    double* row = pre.row(i);
    for (int j = 0; j < pre.cols; ++j) row[j] += b.at(0, j);
  }
  DenseMatrix y = pre;
  if (act == Activation::relu)
    for (double& v : y.values) v = v > 0.0 ? v : 0.0;
  return {std::move(y), FcCache{x, w, std::move(pre), act}};
}

FcGrads fc_backward(const DenseMatrix& dy, const FcCache& cache) {
  if (dy.rows != cache.pre.rows || dy.cols != cache.pre.cols)
    throw std::invalid_argument("fc_backward: upstream shape " + dy.shape_str() +
                                " does not match cached output " + cache.pre.shape_str());
  DenseMatrix dpre = dy;
  if (cache.act == Activation::relu) {
    // subgradient 0 where the pre-activation was <= 0
    for (std::size_t i = 0; i < dpre.values.size(); ++i)
      if (cache.pre.values[i] <= 0.0) dpre.values[i] = 0.0;
  }
  FcGrads g;
  g.dw = matmul(transpose(cache.x), dpre);
  g.dx = matmul(dpre, transpose(cache.w));
  g.db = DenseMatrix(1, dpre.cols);
  for (int i = 0; i < dpre.rows; ++i) {
    const double* row = dpre.row(i);
    for (int j = 0; j < dpre.cols; ++j) g.db.at(0, j) += row[j];
  }
  return g;
}

BatchNormResult batchnorm_forward(const DenseMatrix& x, const DenseMatrix& gamma,
                                  const DenseMatrix& beta, const DenseMatrix& running_mean,
                                  const DenseMatrix& running_var, Mode mode, double momentum,
                                  double eps) {
  const int d = x.cols;
  if (gamma.cols != d || beta.cols != d || gamma.rows != 1 || beta.rows != 1)
    throw std::invalid_argument("batchnorm: gamma/beta must be 1x" + std::to_string(d));
  if (running_mean.cols != d || running_var.cols != d)
    throw std::invalid_argument("batchnorm: running stats must be 1x" + std::to_string(d));

  BatchNormCache cache;
  cache.mode = mode;
  cache.gamma = gamma;
  cache.inv_std = DenseMatrix(1, d);
  cache.xhat = DenseMatrix(x.rows, d);

  if (mode == Mode::train) {
    if (x.rows < 2)
      throw std::invalid_argument("batchnorm: train mode needs a batch of >= 2 rows, got " +
                                  std::to_string(x.rows));
    DenseMatrix mean(1, d), var(1, d);
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int i = 0; i < x.rows; ++i) s += x.at(i, j);
      mean.at(0, j) = s / x.rows;
    }
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int i = 0; i < x.rows; ++i) {
        double c = x.at(i, j) - mean.at(0, j);
        s += c * c;
      }
      var.at(0, j) = s / x.rows;  // population variance
    }
    for (int j = 0; j < d; ++j) cache.inv_std.at(0, j) = 1.0 / std::sqrt(var.at(0, j) + eps);
    for (int i = 0; i < x.rows; ++i)
      for (int j = 0; j < d; ++j)
        cache.xhat.at(i, j) = (x.at(i, j) - mean.at(0, j)) * cache.inv_std.at(0, j);

    cache.new_running_mean = DenseMatrix(1, d);
    cache.new_running_var = DenseMatrix(1, d);
    for (int j = 0; j < d; ++j) {
      cache.new_running_mean.at(0, j) =
          momentum * running_mean.at(0, j) + (1.0 - momentum) * mean.at(0, j);
      cache.new_running_var.at(0, j) =
          momentum * running_var.at(0, j) + (1.0 - momentum) * var.at(0, j);
    }
  } else {
    for (int j = 0; j < d; ++j)
      cache.inv_std.at(0, j) = 1.0 / std::sqrt(running_var.at(0, j) + eps);
    for (int i = 0; i < x.rows; ++i)
      for (int j = 0; j < d; ++j)
        cache.xhat.at(i, j) = (x.at(i, j) - running_mean.at(0, j)) * cache.inv_std.at(0, j);
    cache.new_running_mean = running_mean;
    cache.new_running_var = running_var;
  }

  DenseMatrix y(x.rows, d);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < d; ++j) y.at(i, j) = gamma.at(0, j) * cache.xhat.at(i, j) + beta.at(0, j);
  return {std::move(y), std::move(cache)};
}

BatchNormGrads batchnorm_backward(const DenseMatrix& dy, const BatchNormCache& cache) {
  const DenseMatrix& xhat = cache.xhat;
  if (dy.rows != xhat.rows || dy.cols != xhat.cols)
    throw std::invalid_argument("batchnorm_backward: upstream shape " + dy.shape_str() +
                                " does not match cached batch " + xhat.shape_str());
  const int b = dy.rows, d = dy.cols;
  BatchNormGrads g;
  g.dgamma = DenseMatrix(1, d);
  g.dbeta = DenseMatrix(1, d);
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < d; ++j) {
      g.dgamma.at(0, j) += dy.at(i, j) * xhat.at(i, j);
      g.dbeta.at(0, j) += dy.at(i, j);
    }
  g.dx = DenseMatrix(b, d);
  if (cache.mode == Mode::train) {
    // dxhat = dy * gamma; dx folds in the dependence of the batch mean and
    // variance on every row.
    for (int j = 0; j < d; ++j) {
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int i = 0; i < b; ++i) {
        double dxh = dy.at(i, j) * cache.gamma.at(0, j);
        sum_dxhat += dxh;
        sum_dxhat_xhat += dxh * xhat.at(i, j);
      }
      double scale = cache.inv_std.at(0, j) / b;
      for (int i = 0; i < b; ++i) {
        double dxh = dy.at(i, j) * cache.gamma.at(0, j);
        g.dx.at(i, j) = scale * (b * dxh - sum_dxhat - xhat.at(i, j) * sum_dxhat_xhat);
      }
    }
  } else {
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < d; ++j)
        g.dx.at(i, j) = dy.at(i, j) * cache.gamma.at(0, j) * cache.inv_std.at(0, j);
  }
  return g;
}

DropoutResult dropout_forward(const DenseMatrix& x, double p, Mode mode, RngStream& rng) {
  if (p < 0.0 || p >= 1.0)
    throw std::invalid_argument("dropout: p must be in [0, 1), got " + std::to_string(p));
  DropoutResult out;
  out.mask = DenseMatrix(x.rows, x.cols, 1.0);
  if (mode == Mode::train && p > 0.0) {
    const double keep_scale = 1.0 / (1.0 - p);
    for (double& m : out.mask.values) m = rng.next_double() < p ? 0.0 : keep_scale;
  }
  out.y = hadamard(x, out.mask);
  return out;
}

DenseMatrix dropout_backward(const DenseMatrix& dy, const DenseMatrix& mask) {
  return hadamard(dy, mask);
}

}  // namespace mvr
