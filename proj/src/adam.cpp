#include "mvr/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace mvr {

AdamState make_adam_state(const std::vector<const DenseMatrix*>& params, double lr, double beta1,
                          double beta2, double eps) {
  AdamState s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const DenseMatrix* p : params) {
    s.m.emplace_back(p->rows, p->cols);
    s.v.emplace_back(p->rows, p->cols);
  }
  return s;
}

void adam_step(const std::vector<DenseMatrix*>& params,
               const std::vector<const DenseMatrix*>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.m[i]))
      throw std::invalid_argument("adam_step: shape mismatch at tensor " + std::to_string(i) +
                                  ": " + params[i]->shape_str() + " vs " + grads[i]->shape_str());
    if (!all_finite(*grads[i]))
      throw std::runtime_error("adam_step: non-finite gradient at tensor " + std::to_string(i));
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    DenseMatrix& p = *params[i];
    const DenseMatrix& g = *grads[i];
    DenseMatrix& m = state.m[i];
    DenseMatrix& v = state.v[i];
    for (std::size_t k = 0; k < p.values.size(); ++k) {
      m.values[k] = state.beta1 * m.values[k] + (1.0 - state.beta1) * g.values[k];
      v.values[k] = state.beta2 * v.values[k] + (1.0 - state.beta2) * g.values[k] * g.values[k];
      double mhat = m.values[k] / bc1;
      double vhat = v.values[k] / bc2;
      p.values[k] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace mvr
