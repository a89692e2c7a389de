#include "dcq/optimizer.hpp"

#include <string>

namespace dcq {

OptimizerState OptimizerState::zeros_like(std::span<const Tensor> params) {
  OptimizerState s;
  for (const Tensor& p : params) s.velocity.push_back(Tensor::Zero(p.rows(), p.cols()));
  return s;
}

std::size_t OptimizerState::bytes() const {
  std::size_t n = 0;
  for (const Tensor& v : velocity) n += static_cast<std::size_t>(v.size()) * sizeof(double);
  return n;
}

void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads, OptimizerState& state, double lr,
                       double momentum, std::span<const double> weight_decay) {
  if (grads.size() != params.size() || state.velocity.size() != params.size() || weight_decay.size() != params.size()) {
    throw ShapeError("sgd_momentum_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " + std::to_string(state.velocity.size()) +
                     " velocity buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i], grads[i], "sgd_momentum_step");
    require_same_shape(params[i], state.velocity[i], "sgd_momentum_step");
    Tensor& v = state.velocity[i];
    v = momentum * v + (grads[i] + weight_decay[i] * params[i]);
    params[i] -= lr * v;
  }
}

void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads, OptimizerState& state, double lr,
                       double momentum, double weight_decay) {
  const std::vector<double> wd(params.size(), weight_decay);
  sgd_momentum_step(params, grads, state, lr, momentum, wd);
}

}  // namespace dcq
