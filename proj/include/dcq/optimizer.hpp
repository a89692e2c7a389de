#pragma once

#include <span>
#include <vector>

#include "dcq/tensor.hpp"

namespace dcq {

/// One velocity buffer per optimized tensor.
struct OptimizerState {
  std::vector<Tensor> velocity;

  static OptimizerState zeros_like(std::span<const Tensor> params);
  std::size_t bytes() const;
};

/// g' = g + wd*theta; v = momentum*v + g'; theta -= lr*v.
/// `weight_decay` holds one coefficient per tensor.
void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads, OptimizerState& state, double lr,
                       double momentum, std::span<const double> weight_decay);

void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads, OptimizerState& state, double lr,
                       double momentum, double weight_decay);

}  // namespace dcq
