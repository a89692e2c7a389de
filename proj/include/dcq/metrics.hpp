#pragma once

// Verification / identification metrics and the tail-alignment diagnostic.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcq/baseline.hpp"
#include "dcq/model.hpp"
#include "dcq/synthdata.hpp"

namespace dcq {

struct VerificationResult {
  double accuracy = 0.0;
  double threshold = 0.0;  // pairs with distance < threshold are declared genuine
};

/// Best accuracy over thresholds at every midpoint of the sorted distances
/// (plus one below the minimum and one above the maximum); the smallest
/// threshold wins ties.
VerificationResult verification_accuracy(std::span<const double> distances, const std::vector<bool>& genuine);

/// Cosine distance (1 - cos) between the embeddings of each protocol pair.
VerificationResult verification_accuracy(const Tensor& embeddings, const EvalProtocol& protocol);

/// Per probe: does its nearest gallery entry (cosine, lowest index on ties) share its label?
std::vector<bool> identification_hits(const Tensor& probes, const Tensor& gallery, std::span<const Index> probe_labels,
                                      std::span<const Index> gallery_labels);

double identification_rank1(const Tensor& probes, const Tensor& gallery, std::span<const Index> probe_labels,
                            std::span<const Index> gallery_labels);

struct EvalMetrics {
  double ver_acc = 0.0;
  double ver_threshold = 0.0;
  double id_rank1 = 0.0;
  double tail_rank1 = 0.0;  // NaN when no probe belongs to a tail class
  Index tail_probes = 0;
};

/// `embeddings` has one row per protocol sample. `counts` gives training
/// instances per class; probes of classes with fewer than `tail_threshold`
/// instances form the tail subset.
EvalMetrics evaluate_embeddings(const Tensor& embeddings, const EvalProtocol& protocol, std::span<const int> counts,
                                int tail_threshold = 10);

inline constexpr std::array<int, 3> kAlignmentBucketEdges{5, 10, 50};

struct AlignmentBucket {
  std::string name;
  int lower = 0;   // inclusive
  int upper = 0;   // exclusive, 0 for unbounded
  Index classes = 0;
  std::optional<double> mean_cosine;  // absent for an empty bucket
};

struct AlignmentReport {
  std::vector<AlignmentBucket> buckets;
};

/// Mean cosine between each head column and the normalized mean of its
/// class's normalized training embeddings, averaged per instance-count bucket.
/// `identities[c]` maps head column c to a universe identity (empty: identity map)
/// and `counts[c]` is that column's training instance count.
AlignmentReport tail_alignment_diagnostic(const FcHead& head, const IdentityUniverse& universe,
                                          std::span<const int> counts, const MlpParams& extractor,
                                          std::span<const Index> identities = {});

}  // namespace dcq
