#pragma once

// Synthetic long-tailed identity data: unit-sphere identity centers, Zipf
// instance counts, query/reference pair batches and evaluation protocols.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcq/tensor.hpp"

namespace dcq {

/// Training identities [0, classes) followed by a reserved range used only for
/// evaluation distractors.
struct IdentityUniverse {
  Index classes = 0;
  Index reserved = 0;
  Index d_in = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  Tensor centers;  // (classes + reserved) x d_in, unit rows

  Index total_identities() const { return classes + reserved; }
};

IdentityUniverse build_universe(Index classes, Index d_in, double sigma, std::uint64_t seed, Index reserved = 0);

struct LongTailSpec {
  double zipf_exponent = 1.0;
  int min_count = 1;
  int max_count = 100;
};

/// Count for rank r (1-based) is round(max_count * r^-exponent) clamped to [min_count, max_count].
std::vector<int> assign_longtail_counts(const LongTailSpec& spec, Index classes);

struct LongTailSummary {
  Index classes = 0;
  std::int64_t total_instances = 0;
  double mean_count = 0.0;
  double tail_fraction = 0.0;  // share of identities with fewer than tail_threshold instances
  int tail_threshold = 10;
  std::map<int, Index> histogram;
};

LongTailSummary summarize_counts(std::span<const int> counts, int tail_threshold = 10);
nlohmann::json to_json(const LongTailSummary& s);

/// Training instance `instance` of `identity` (1 x d_in): center + sigma * noise.
Tensor draw_instance(const IdentityUniverse& universe, Index identity, Index instance);
/// Same, rejecting instance indices outside the identity's count.
Tensor draw_instance(const IdentityUniverse& universe, std::span<const int> counts, Index identity, Index instance);
/// Unseen instance of `identity` from the evaluation noise stream.
Tensor draw_holdout_instance(const IdentityUniverse& universe, Index identity, Index index);

enum class Sampling { instance, class_uniform };

std::string to_string(Sampling s);
Sampling parse_sampling(const std::string& s);

struct PairBatch {
  Tensor x_t;              // B x d_in queries
  Tensor x_w;              // B x d_in references
  std::vector<Index> y;    // training labels
  std::vector<Index> query_instance;
  std::vector<Index> reference_instance;  // -1 when drawn with fresh noise
};

/// Draws PairBatches for a label set. `identities[label]` maps training labels
/// to universe identities; empty means the identity map.
class PairSampler {
 public:
  PairSampler(const IdentityUniverse& universe, std::vector<int> counts, std::vector<Index> identities, Sampling mode);

  /// Batch number `step` of the stream keyed by `seed`.
  PairBatch sample(Index batch_size, std::uint64_t seed, std::uint64_t step) const;

  Index label_count() const { return static_cast<Index>(counts_.size()); }
  std::int64_t total_instances() const { return cumulative_.empty() ? 0 : cumulative_.back(); }
  const std::vector<int>& counts() const { return counts_; }
  Index identity_of(Index label) const;

 private:
  const IdentityUniverse* universe_;
  std::vector<int> counts_;
  std::vector<Index> identities_;
  std::vector<std::int64_t> cumulative_;
  Sampling mode_;
};

struct SamplerState {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

/// One batch from `state`, advancing its step.
PairBatch make_pair_batch(const IdentityUniverse& universe, std::span<const int> counts, Index batch_size, Sampling mode,
                          SamplerState& state);

struct EvalSample {
  Index identity = 0;
  Index index = 0;  // holdout draw index
};

struct VerificationPair {
  Index first = 0;   // into EvalProtocol::samples
  Index second = 0;
  bool genuine = false;
};

struct EvalProtocol {
  std::vector<EvalSample> samples;
  std::vector<VerificationPair> pairs;
  std::vector<Index> probes;   // into samples
  std::vector<Index> gallery;  // into samples, enrolled mates first, then distractors
  std::vector<Index> distractor_labels;

  std::vector<Index> labels_of(std::span<const Index> members) const;
};

EvalProtocol build_eval_protocol(const IdentityUniverse& universe, Index n_pairs, Index n_probe, Index n_distractors,
                                 std::uint64_t seed);

/// Input vectors for every protocol sample, row i for samples[i].
Tensor materialize(const IdentityUniverse& universe, const EvalProtocol& protocol);

/// Binary dump: "DCQD", u32 version, u32 C, u32 d_in, u64 total, then
/// records (u32 identity, u32 instance, d_in f64).
void write_dataset(const std::string& path, const IdentityUniverse& universe, std::span<const int> counts);

struct DatasetRecord {
  std::uint32_t identity = 0;
  std::uint32_t instance = 0;
  std::vector<double> values;
};

struct DatasetFile {
  std::uint32_t version = 0;
  std::uint32_t classes = 0;
  std::uint32_t d_in = 0;
  std::vector<DatasetRecord> records;
};

DatasetFile read_dataset(const std::string& path);

inline constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace dcq
