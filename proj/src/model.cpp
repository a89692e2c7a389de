#include "dcq/model.hpp"

#include <cmath>

#include "dcq/rng.hpp"

namespace dcq {

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

std::string MlpParams::tensor_name(std::size_t i) const {
  static const char* kinds[] = {"weight", "bias", "slope"};
  return "layer" + std::to_string(i / 3) + "." + kinds[i % 3];
}

MlpParams init_extractor(const std::vector<Index>& dims, std::uint64_t seed) {
  if (dims.size() < 3) throw ConfigError("extractor needs an input, at least one hidden layer and an output");
  for (Index d : dims) {
    if (d < 1) throw ConfigError("layer widths must be positive");
  }
  if (dims.back() < 2) throw ConfigError("embedding dimension must be at least 2");
  MlpParams p;
  p.dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Index in = dims[l];
    const Index out = dims[l + 1];
    CounterStream stream(seed, Stream::init, static_cast<std::uint32_t>(l));
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w(in, out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = scale * stream.normal();
    p.tensors.push_back(std::move(w));
    p.tensors.push_back(Tensor::Zero(1, out));
    p.tensors.push_back(Tensor::Constant(1, 1, kInitialSlope));
  }
  return p;
}

bool same_shapes(const MlpParams& a, const MlpParams& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].rows() != b.tensors[i].rows() || a.tensors[i].cols() != b.tensors[i].cols()) return false;
  }
  return true;
}

MlpVars bind_parameters(Tape& tape, const MlpParams& params) {
  MlpVars v;
  for (const Tensor& t : params.tensors) v.tensors.push_back(tape.parameter(t));
  return v;
}

MlpVars bind_constants(Tape& tape, const MlpParams& params) {
  MlpVars v;
  for (const Tensor& t : params.tensors) v.tensors.push_back(tape.constant(t));
  return v;
}

Var extract_features(Tape& tape, const MlpParams& params, const MlpVars& vars, Var x) {
  if (tape.value(x).cols() != params.input_dim()) {
    throw ShapeError("extract_features: input " + shape_string(tape.value(x)) + " but extractor expects width " +
                     std::to_string(params.input_dim()));
  }
  Var h = x;
  const std::size_t layers = params.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    h = add_row(tape, matmul(tape, h, vars.tensors[3 * l]), vars.tensors[3 * l + 1]);
    if (l + 1 < layers) h = prelu(tape, h, vars.tensors[3 * l + 2]);
  }
  return h;
}

Tensor extract_features(const MlpParams& params, const Tensor& x) {
  if (x.cols() != params.input_dim()) {
    throw ShapeError("extract_features: input " + shape_string(x) + " but extractor expects width " +
                     std::to_string(params.input_dim()));
  }
  Tensor h = x;
  const std::size_t layers = params.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    Tensor z = h * params.weight(l);
    z = z.rowwise() + params.bias(l).row(0);
    h = (l + 1 < layers) ? prelu(z, params.slope(l)) : std::move(z);
  }
  return h;
}

}  // namespace dcq
