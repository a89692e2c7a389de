#include "dcq/baseline.hpp"

#include <cmath>
#include <string>

#include "dcq/rng.hpp"

namespace dcq {

FcHead init_head(Index embed_dim, Index classes, std::uint64_t seed) {
  if (embed_dim < 1 || classes < 1) throw ConfigError("head dimensions must be positive");
  FcHead h;
  h.weight.resize(embed_dim, classes);
  CounterStream stream(seed, Stream::head, 0u);
  const double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  for (Index i = 0; i < h.weight.size(); ++i) h.weight.data()[i] = scale * stream.normal();
  return h;
}

LossResult fc_cosface_loss(Tape& tape, Var features, Var head_weight, std::span<const Index> y, double s, double m) {
  if (!(s > 0.0)) throw ConfigError("scale must be positive");
  if (!(m >= 0.0)) throw ConfigError("margin must be non-negative");
  const Index classes = tape.value(head_weight).cols();
  for (Index label : y) {
    if (label < 0 || label >= classes) {
      throw IndexError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  const Var fn = l2_normalize_rows(tape, features);
  const Var wn = transpose(tape, l2_normalize_rows(tape, transpose(tape, head_weight)));
  const Var cosine = matmul(tape, fn, wn);
  const Var scaled = scale(tape, subtract_at(tape, cosine, y, m), s);
  LossResult r{Var{}, softmax_cross_entropy(tape, scaled, y), scaled};
  r.loss = r.ce.loss;
  return r;
}

HeadClassFilter filter_head_classes(std::span<const int> counts, int min_instances) {
  if (min_instances < 1) throw ConfigError("min_instances must be at least 1");
  HeadClassFilter f;
  f.label_of_class.assign(counts.size(), -1);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] >= min_instances) {
      f.label_of_class[c] = static_cast<Index>(f.retained.size());
      f.retained.push_back(static_cast<Index>(c));
      f.counts.push_back(counts[c]);
    }
  }
  if (f.retained.empty()) {
    throw ConfigError("no class has at least " + std::to_string(min_instances) + " instances");
  }
  return f;
}

}  // namespace dcq
