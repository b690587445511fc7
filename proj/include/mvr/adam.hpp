#pragma once

#include <vector>

#include "mvr/dense_matrix.hpp"

namespace mvr {

/// Adam optimizer state for an ordered set of parameter tensors.
/// Single-owner: only the training loop advances it.
struct AdamState {
  std::vector<DenseMatrix> m;  // first moments, parallel to the parameter list
  std::vector<DenseMatrix> v;  // second moments
  long long t = 0;             // completed steps
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 1e-6;
};

AdamState make_adam_state(const std::vector<const DenseMatrix*>& params, double lr,
                          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// One bias-corrected Adam update over all tensors; increments state.t.
/// Throws on shape mismatch or non-finite gradients.
void adam_step(const std::vector<DenseMatrix*>& params,
               const std::vector<const DenseMatrix*>& grads, AdamState& state);

}  // namespace mvr
