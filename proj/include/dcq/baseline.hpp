#pragma once

// Full fully-connected CosFace head and the head-classes-only filter.

#include <cstdint>
#include <span>
#include <vector>

#include "dcq/class_queue.hpp"
#include "dcq/tape.hpp"

namespace dcq {

struct FcHead {
  Tensor weight;  // D x C, one column per training class

  Index classes() const { return weight.cols(); }
  Index embed_dim() const { return weight.rows(); }
};

/// Gaussian columns scaled by 1/sqrt(D).
FcHead init_head(Index embed_dim, Index classes, std::uint64_t seed);

/// CosFace over all head columns: cos = normalize(f) . normalize_cols(W),
/// margin m at the target column, scale s, cross entropy (batch mean).
/// Gradients reach both `features` and `head_weight`.
LossResult fc_cosface_loss(Tape& tape, Var features, Var head_weight, std::span<const Index> y, double s, double m);

struct HeadClassFilter {
  std::vector<Index> retained;        // dense label -> original class
  std::vector<Index> label_of_class;  // original class -> dense label, -1 if dropped
  std::vector<int> counts;            // per dense label
};

HeadClassFilter filter_head_classes(std::span<const int> counts, int min_instances);

}  // namespace dcq
