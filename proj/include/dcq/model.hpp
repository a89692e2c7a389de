#pragma once

// Feature extractor: an MLP of (matmul -> bias -> PReLU) hidden layers and a
// linear output layer producing raw, unnormalized embeddings.

#include <cstdint>
#include <string>
#include <vector>

#include "dcq/tape.hpp"

namespace dcq {

/// Parameters stored flat as [W0, b0, a0, W1, b1, a1, ...]. Weights are
/// in x out, biases 1 x out, slopes 1 x 1. Every layer carries a slope so the
/// parameter count is sum(in*out + out + 1); the output layer's slope is not
/// applied.
struct MlpParams {
  std::vector<Index> dims;
  std::vector<Tensor> tensors;

  std::size_t layer_count() const { return dims.size() - 1; }
  Tensor& weight(std::size_t l) { return tensors[3 * l]; }
  const Tensor& weight(std::size_t l) const { return tensors[3 * l]; }
  Tensor& bias(std::size_t l) { return tensors[3 * l + 1]; }
  const Tensor& bias(std::size_t l) const { return tensors[3 * l + 1]; }
  double& slope(std::size_t l) { return tensors[3 * l + 2](0, 0); }
  double slope(std::size_t l) const { return tensors[3 * l + 2](0, 0); }

  Index input_dim() const { return dims.front(); }
  Index embed_dim() const { return dims.back(); }
  std::size_t parameter_count() const;
  // Weights decay; biases and slopes do not.
  static bool decays(std::size_t tensor_index) { return tensor_index % 3 == 0; }
  std::string tensor_name(std::size_t tensor_index) const;
};

inline constexpr double kInitialSlope = 0.25;

/// Gaussian weights scaled by 1/sqrt(fan_in), zero biases, slopes 0.25.
MlpParams init_extractor(const std::vector<Index>& dims, std::uint64_t seed);

bool same_shapes(const MlpParams& a, const MlpParams& b);

/// Parameter handles of an MlpParams registered on a tape.
struct MlpVars {
  std::vector<Var> tensors;
};

MlpVars bind_parameters(Tape& tape, const MlpParams& params);
MlpVars bind_constants(Tape& tape, const MlpParams& params);

Var extract_features(Tape& tape, const MlpParams& params, const MlpVars& vars, Var x);

/// Inference forward pass; bit-identical to the taped one.
Tensor extract_features(const MlpParams& params, const Tensor& x);

}  // namespace dcq
