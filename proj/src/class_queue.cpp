#include "dcq/class_queue.hpp"

#include <string>

namespace dcq {

EmaGenerator EmaGenerator::from_extractor(const MlpParams& extractor, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("EMA momentum must lie in [0, 1]");
  return EmaGenerator{extractor, alpha};
}

void ema_update(EmaGenerator& gen, const MlpParams& extractor) {
  if (!same_shapes(gen.shadow, extractor)) throw ContractError("ema_update: generator and extractor shapes differ");
  const double a = gen.alpha;
  for (std::size_t i = 0; i < extractor.tensors.size(); ++i) {
    gen.shadow.tensors[i] = a * gen.shadow.tensors[i] + (1.0 - a) * extractor.tensors[i];
  }
}

Tensor generate_class_weights(const EmaGenerator& gen, const Tensor& x_w) {
  return l2_normalize_rows(extract_features(gen.shadow, x_w));
}

ClassQueue::ClassQueue(Index embed_dim, Index capacity)
    : weights_(Tensor::Zero(embed_dim, capacity)), labels_(static_cast<std::size_t>(capacity), kEmptySlot) {
  if (capacity < 1) throw ConfigError("queue capacity must be positive");
}

void ClassQueue::enqueue(const Tensor& w, std::span<const Index> y) {
  const Index b = w.rows();
  if (b > capacity()) {
    throw ConfigError("batch of " + std::to_string(b) + " does not fit a queue of " + std::to_string(capacity()));
  }
  if (w.cols() != embed_dim()) throw ShapeError("enqueue: weights " + shape_string(w) + " vs queue dim " + std::to_string(embed_dim()));
  if (static_cast<Index>(y.size()) != b) throw ShapeError("enqueue: one label per weight row required");
  for (Index i = 0; i < b; ++i) {
    weights_.col(cursor_) = w.row(i).transpose();
    labels_[static_cast<std::size_t>(cursor_)] = y[static_cast<std::size_t>(i)];
    cursor_ = (cursor_ + 1) % capacity();
  }
  enqueued_ += static_cast<std::uint64_t>(b);
}

Index ClassQueue::filled() const {
  Index n = 0;
  for (auto l : labels_) n += (l != kEmptySlot);
  return n;
}

std::vector<std::int64_t> ClassQueue::fifo_labels() const {
  std::vector<std::int64_t> out;
  for (Index k = 0; k < capacity(); ++k) {
    const auto l = labels_[static_cast<std::size_t>((cursor_ + k) % capacity())];
    if (l != kEmptySlot) out.push_back(l);
  }
  return out;
}

ClassQueue ClassQueue::restore(Tensor weights, std::vector<std::int64_t> labels, Index cursor, std::uint64_t enqueued) {
  if (static_cast<Index>(labels.size()) != weights.cols()) throw ShapeError("queue labels and weights disagree");
  if (cursor < 0 || cursor >= weights.cols()) throw IndexError("queue cursor out of range");
  ClassQueue q;
  q.weights_ = std::move(weights);
  q.labels_ = std::move(labels);
  q.cursor_ = cursor;
  q.enqueued_ = enqueued;
  return q;
}

DcqLogits dcq_logits_with_mask(Tape& tape, Var features, const Tensor& w_pos, const ClassQueue& queue,
                               std::span<const Index> y) {
  const Tensor& f = tape.value(features);
  require_same_shape(f, w_pos, "dcq_logits_with_mask");
  if (f.cols() != queue.embed_dim()) throw ShapeError("dcq_logits_with_mask: feature width differs from queue");
  if (static_cast<Index>(y.size()) != f.rows()) throw ShapeError("dcq_logits_with_mask: one label per row required");

  const Var fn = l2_normalize_rows(tape, features);
  DcqLogits out;
  out.positive = rowwise_dot(tape, fn, tape.constant(w_pos));
  const Var raw = matmul(tape, fn, tape.constant(queue.weights()));

  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask(f.rows(), queue.capacity());
  const auto& labels = queue.labels();
  for (Index i = 0; i < f.rows(); ++i) {
    for (Index k = 0; k < queue.capacity(); ++k) {
      const auto l = labels[static_cast<std::size_t>(k)];
      mask(i, k) = l == kEmptySlot || l == y[static_cast<std::size_t>(i)];
    }
  }
  out.negative = masked_fill(tape, raw, mask, kMaskLogit);
  return out;
}

LossResult dcq_cosface_loss(Tape& tape, const DcqLogits& logits, double s, double m) {
  if (!(s > 0.0)) throw ConfigError("scale must be positive");
  if (!(m >= 0.0)) throw ConfigError("margin must be non-negative");
  const Var joined = concat_cols(tape, logits.positive, logits.negative);
  const std::vector<Index> zeros(static_cast<std::size_t>(tape.value(joined).rows()), 0);
  const Var scaled = scale(tape, subtract_at(tape, joined, std::span<const Index>(zeros), m), s);
  LossResult r{Var{}, softmax_cross_entropy(tape, scaled, std::span<const Index>(zeros)), scaled};
  r.loss = r.ce.loss;
  return r;
}

}  // namespace dcq
