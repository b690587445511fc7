#pragma once

#include "mvr/dense_matrix.hpp"
#include "mvr/rng.hpp"

namespace mvr {

enum class Activation { linear, relu };
enum class Mode { train, infer };

// ---------------------------------------------------------------------------
// Fully-connected layer
// ---------------------------------------------------------------------------

struct FcCache {
  DenseMatrix x;    // input batch
  DenseMatrix w;    // weights at forward time
  DenseMatrix pre;  // x*w + b, before activation
  Activation act = Activation::linear;
};

struct FcResult {
  DenseMatrix y;
  FcCache cache;
};

/// y = act(x*w + b), b broadcast per row. b is 1 x Dout.
FcResult fc_forward(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& b,
                    Activation act);

struct FcGrads {
  DenseMatrix dx;
  DenseMatrix dw;
  DenseMatrix db;  // 1 x Dout
};

/// Exact gradients of fc_forward. ReLU uses subgradient 0 at input exactly 0.
FcGrads fc_backward(const DenseMatrix& dy, const FcCache& cache);

// ---------------------------------------------------------------------------
// Batch normalization (per column)
// ---------------------------------------------------------------------------

struct BatchNormCache {
  Mode mode = Mode::train;
  DenseMatrix xhat;     // normalized input
  DenseMatrix inv_std;  // 1 x D
  DenseMatrix gamma;    // 1 x D
  // Updated running statistics (train mode); the caller decides when to
  // commit them to the persistent parameters.
  DenseMatrix new_running_mean;
  DenseMatrix new_running_var;
};

struct BatchNormResult {
  DenseMatrix y;
  BatchNormCache cache;
};

/// Train mode normalizes by batch mean / population variance, then applies
/// gamma/beta, and computes running stats updated as
///   running = momentum * running + (1 - momentum) * batch.
/// Infer mode normalizes by the running stats only. Train mode requires a
/// batch of at least 2 rows.
BatchNormResult batchnorm_forward(const DenseMatrix& x, const DenseMatrix& gamma,
                                  const DenseMatrix& beta, const DenseMatrix& running_mean,
                                  const DenseMatrix& running_var, Mode mode, double momentum,
                                  double eps);

struct BatchNormGrads {
  DenseMatrix dx;
  DenseMatrix dgamma;  // 1 x D
  DenseMatrix dbeta;   // 1 x D
};

BatchNormGrads batchnorm_backward(const DenseMatrix& dy, const BatchNormCache& cache);

// ---------------------------------------------------------------------------
// Dropout (inverted: survivors scaled by 1/(1-p) at train time)
// ---------------------------------------------------------------------------

struct DropoutResult {
  DenseMatrix y;
  DenseMatrix mask;  // multipliers: 0 or 1/(1-p); all ones in infer mode
};

/// Requires 0 <= p < 1. Infer mode is the identity.
DropoutResult dropout_forward(const DenseMatrix& x, double p, Mode mode, RngStream& rng);

DenseMatrix dropout_backward(const DenseMatrix& dy, const DenseMatrix& mask);

}  // namespace mvr
