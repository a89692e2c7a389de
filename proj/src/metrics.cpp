#include "dcq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dcq {

VerificationResult verification_accuracy(std::span<const double> distances, const std::vector<bool>& genuine) {
  if (distances.empty()) throw ContractError("verification_accuracy: empty protocol");
  if (genuine.size() != distances.size()) throw ShapeError("verification_accuracy: one label per distance required");
  const std::size_t n = distances.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });
  std::vector<double> sorted(n);
  // genuine_before[k]: genuine pairs among the k smallest distances
  std::vector<std::size_t> genuine_before(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) {
    sorted[k] = distances[order[k]];
    genuine_before[k + 1] = genuine_before[k] + (genuine[order[k]] ? 1 : 0);
  }
  const std::size_t total_genuine = genuine_before[n];
  auto accuracy_at = [&](double t) {
    const auto below = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
    const std::size_t tp = genuine_before[below];
    const std::size_t tn = (n - below) - (total_genuine - tp);
    return static_cast<double>(tp + tn) / static_cast<double>(n);
  };

  std::vector<double> thresholds;
  thresholds.reserve(n + 1);
  thresholds.push_back(sorted.front() - 1.0);
  for (std::size_t k = 0; k + 1 < n; ++k) thresholds.push_back(0.5 * (sorted[k] + sorted[k + 1]));
  thresholds.push_back(sorted.back() + 1.0);

  VerificationResult best{-1.0, 0.0};
  for (double t : thresholds) {
    const double acc = accuracy_at(t);
    if (acc > best.accuracy) best = {acc, t};
  }
  return best;
}

namespace {

std::vector<double> pair_distances(const Tensor& normalized, const EvalProtocol& protocol) {
  std::vector<double> d;
  d.reserve(protocol.pairs.size());
  for (const auto& p : protocol.pairs) d.push_back(1.0 - normalized.row(p.first).dot(normalized.row(p.second)));
  return d;
}

Tensor gather_rows(const Tensor& x, std::span<const Index> rows) {
  Tensor out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

}  // namespace

VerificationResult verification_accuracy(const Tensor& embeddings, const EvalProtocol& protocol) {
  if (embeddings.rows() != static_cast<Index>(protocol.samples.size())) {
    throw ShapeError("verification_accuracy: one embedding per protocol sample required");
  }
  const Tensor normalized = l2_normalize_rows(embeddings);
  std::vector<bool> genuine;
  genuine.reserve(protocol.pairs.size());
  for (const auto& p : protocol.pairs) genuine.push_back(p.genuine);
  const auto d = pair_distances(normalized, protocol);
  return verification_accuracy(d, genuine);
}

std::vector<bool> identification_hits(const Tensor& probes, const Tensor& gallery, std::span<const Index> probe_labels,
                                      std::span<const Index> gallery_labels) {
  if (gallery.rows() == 0) throw ContractError("identification_rank1: empty gallery");
  if (probes.cols() != gallery.cols()) throw ShapeError("identification: probe and gallery widths differ");
  if (static_cast<Index>(probe_labels.size()) != probes.rows() ||
      static_cast<Index>(gallery_labels.size()) != gallery.rows()) {
    throw ShapeError("identification: one label per embedding required");
  }
  const Tensor sim = l2_normalize_rows(probes) * l2_normalize_rows(gallery).transpose();
  std::vector<bool> hits(static_cast<std::size_t>(probes.rows()));
  for (Index p = 0; p < sim.rows(); ++p) {
    Index best = 0;
    for (Index g = 1; g < sim.cols(); ++g) {
      if (sim(p, g) > sim(p, best)) best = g;
    }
    hits[static_cast<std::size_t>(p)] = gallery_labels[static_cast<std::size_t>(best)] == probe_labels[static_cast<std::size_t>(p)];
  }
  return hits;
}

double identification_rank1(const Tensor& probes, const Tensor& gallery, std::span<const Index> probe_labels,
                            std::span<const Index> gallery_labels) {
  const auto hits = identification_hits(probes, gallery, probe_labels, gallery_labels);
  if (hits.empty()) return 0.0;
  return static_cast<double>(std::count(hits.begin(), hits.end(), true)) / static_cast<double>(hits.size());
}

EvalMetrics evaluate_embeddings(const Tensor& embeddings, const EvalProtocol& protocol, std::span<const int> counts,
                                int tail_threshold) {
  EvalMetrics m;
  if (!protocol.pairs.empty()) {
    const auto v = verification_accuracy(embeddings, protocol);
    m.ver_acc = v.accuracy;
    m.ver_threshold = v.threshold;
  }
  m.tail_rank1 = std::numeric_limits<double>::quiet_NaN();
  if (protocol.probes.empty()) return m;
  const auto probe_labels = protocol.labels_of(protocol.probes);
  const auto gallery_labels = protocol.labels_of(protocol.gallery);
  const auto hits = identification_hits(gather_rows(embeddings, protocol.probes), gather_rows(embeddings, protocol.gallery),
                                        probe_labels, gallery_labels);
  Index hit_total = 0, tail_hits = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    hit_total += hits[i];
    const Index id = probe_labels[i];
    const bool tail = id < static_cast<Index>(counts.size()) && counts[static_cast<std::size_t>(id)] < tail_threshold;
    if (tail) {
      ++m.tail_probes;
      tail_hits += hits[i];
    }
  }
  m.id_rank1 = static_cast<double>(hit_total) / static_cast<double>(hits.size());
  if (m.tail_probes > 0) m.tail_rank1 = static_cast<double>(tail_hits) / static_cast<double>(m.tail_probes);
  return m;
}

AlignmentReport tail_alignment_diagnostic(const FcHead& head, const IdentityUniverse& universe,
                                          std::span<const int> counts, const MlpParams& extractor,
                                          std::span<const Index> identities) {
  if (static_cast<Index>(counts.size()) != head.classes()) {
    throw ShapeError("tail_alignment_diagnostic: one count per head column required");
  }
  if (!identities.empty() && identities.size() != counts.size()) {
    throw ShapeError("tail_alignment_diagnostic: one identity per head column required");
  }
  AlignmentReport report;
  const int edges[] = {0, kAlignmentBucketEdges[0], kAlignmentBucketEdges[1], kAlignmentBucketEdges[2], 0};
  for (int b = 0; b < 4; ++b) {
    AlignmentBucket bucket;
    bucket.lower = edges[b];
    bucket.upper = edges[b + 1];
    bucket.name = bucket.upper == 0 ? ">=" + std::to_string(bucket.lower)
                  : bucket.lower == 0 ? "<" + std::to_string(bucket.upper)
                                      : std::to_string(bucket.lower) + "-" + std::to_string(bucket.upper - 1);
    report.buckets.push_back(bucket);
  }
  std::vector<double> sums(report.buckets.size(), 0.0);
  const Tensor w = l2_normalize_rows(Tensor(head.weight.transpose()));
  for (Index c = 0; c < head.classes(); ++c) {
    const int count = counts[static_cast<std::size_t>(c)];
    const Index identity = identities.empty() ? c : identities[static_cast<std::size_t>(c)];
    Tensor x(count, universe.d_in);
    for (int k = 0; k < count; ++k) x.row(k) = draw_instance(universe, identity, k);
    const Tensor e = l2_normalize_rows(extract_features(extractor, x));
    const Tensor mean = l2_normalize_rows(Tensor(e.colwise().mean()));
    const double cosine = std::clamp(mean.row(0).dot(w.row(c)), -1.0, 1.0);
    std::size_t b = 0;
    while (b + 1 < report.buckets.size() && count >= report.buckets[b].upper) ++b;
    report.buckets[b].classes += 1;
    sums[b] += cosine;
  }
  for (std::size_t b = 0; b < report.buckets.size(); ++b) {
    if (report.buckets[b].classes > 0) {
      report.buckets[b].mean_cosine = sums[b] / static_cast<double>(report.buckets[b].classes);
    }
  }
  return report;
}

}  // namespace dcq
