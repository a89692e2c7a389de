#pragma once

// Dynamic class queue: an EMA-shadowed weight generator, a FIFO ring of
// generated class weights with their labels, and the masked subset CosFace
// loss computed against it.

#include <cstdint>
#include <span>
#include <vector>

#include "dcq/model.hpp"
#include "dcq/tape.hpp"

namespace dcq {

/// Shadow copy of the extractor, updated as shadow = alpha*shadow + (1-alpha)*extractor.
struct EmaGenerator {
  MlpParams shadow;
  double alpha = 0.999;

  static EmaGenerator from_extractor(const MlpParams& extractor, double alpha);
};

void ema_update(EmaGenerator& gen, const MlpParams& extractor);

/// Forward through the shadow parameters without a tape, rows L2-normalized.
Tensor generate_class_weights(const EmaGenerator& gen, const Tensor& x_w);

inline constexpr std::int64_t kEmptySlot = -1;
inline constexpr double kMaskLogit = -1e9;

/// Ring of K unit-norm class weights (stored as D x K columns) and labels.
class ClassQueue {
 public:
  ClassQueue() = default;
  ClassQueue(Index embed_dim, Index capacity);

  /// Overwrites the B oldest slots with the rows of w (B x D) and labels y.
  void enqueue(const Tensor& w, std::span<const Index> y);

  Index capacity() const { return weights_.cols(); }
  Index embed_dim() const { return weights_.rows(); }
  Index cursor() const { return cursor_; }
  std::uint64_t enqueued() const { return enqueued_; }
  const Tensor& weights() const { return weights_; }
  const std::vector<std::int64_t>& labels() const { return labels_; }
  Index filled() const;

  /// Labels from oldest to newest, skipping empty slots.
  std::vector<std::int64_t> fifo_labels() const;

  /// Raw state access for checkpoints.
  static ClassQueue restore(Tensor weights, std::vector<std::int64_t> labels, Index cursor, std::uint64_t enqueued);

 private:
  Tensor weights_;
  std::vector<std::int64_t> labels_;
  Index cursor_ = 0;
  std::uint64_t enqueued_ = 0;
};

struct DcqLogits {
  Var positive;  // B x 1
  Var negative;  // B x K, masked entries at kMaskLogit
};

/// Positive logits <f_i/|f_i|, w_pos_i> and negative logits against every
/// queue column; queue slots sharing y[i] or still empty are masked.
DcqLogits dcq_logits_with_mask(Tape& tape, Var features, const Tensor& w_pos, const ClassQueue& queue,
                               std::span<const Index> y);

struct LossResult {
  Var loss;
  CrossEntropy<double> ce;
  Var logits;  // scaled logits fed to the softmax
};

/// Cross entropy of s * [l_pos - m, l_neg] with target column 0, batch mean.
LossResult dcq_cosface_loss(Tape& tape, const DcqLogits& logits, double s, double m);

}  // namespace dcq
