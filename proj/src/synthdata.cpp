#include "dcq/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dcq/binary_io.hpp"
#include "dcq/errors.hpp"
#include "dcq/rng.hpp"

namespace dcq {

namespace {

std::uint32_t u32(Index v) { return static_cast<std::uint32_t>(v); }

Tensor noisy_copy(const IdentityUniverse& u, Index identity, CounterStream& stream) {
  Tensor x = u.centers.row(identity);
  if (u.sigma != 0.0) {
    for (Index j = 0; j < u.d_in; ++j) x(0, j) += u.sigma * stream.normal();
  } else {
    // keep the stream position independent of sigma
    for (Index j = 0; j < u.d_in; ++j) stream.normal();
  }
  return x;
}

void check_identity(const IdentityUniverse& u, Index identity) {
  if (identity < 0 || identity >= u.total_identities()) {
    throw IndexError("identity " + std::to_string(identity) + " outside universe of " +
                     std::to_string(u.total_identities()));
  }
}

}  // namespace

IdentityUniverse build_universe(Index classes, Index d_in, double sigma, std::uint64_t seed, Index reserved) {
  if (d_in < 2) throw ConfigError("d_in must be at least 2");
  if (classes < 1) throw ConfigError("at least one identity required");
  if (reserved < 0) throw ConfigError("reserved identity count must be non-negative");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
  IdentityUniverse u;
  u.classes = classes;
  u.reserved = reserved;
  u.d_in = d_in;
  u.sigma = sigma;
  u.seed = seed;
  u.centers.resize(classes + reserved, d_in);
  for (Index c = 0; c < classes + reserved; ++c) {
    CounterStream stream(seed, Stream::center, u32(c));
    double norm = 0.0;
    do {
      for (Index j = 0; j < d_in; ++j) u.centers(c, j) = stream.normal();
      norm = u.centers.row(c).norm();
    } while (norm == 0.0);
    u.centers.row(c) /= norm;
  }
  return u;
}

std::vector<int> assign_longtail_counts(const LongTailSpec& spec, Index classes) {
  if (spec.min_count < 1) throw ConfigError("min_count must be at least 1");
  if (spec.max_count < spec.min_count) throw ConfigError("max_count must be >= min_count");
  if (!(spec.zipf_exponent >= 0.0)) throw ConfigError("zipf exponent must be non-negative");
  std::vector<int> counts(static_cast<std::size_t>(classes));
  for (Index r = 0; r < classes; ++r) {
    const double raw = static_cast<double>(spec.max_count) * std::pow(static_cast<double>(r + 1), -spec.zipf_exponent);
    const double rounded = std::round(raw);
    counts[static_cast<std::size_t>(r)] =
        static_cast<int>(std::clamp(rounded, static_cast<double>(spec.min_count), static_cast<double>(spec.max_count)));
  }
  return counts;
}

LongTailSummary summarize_counts(std::span<const int> counts, int tail_threshold) {
  LongTailSummary s;
  s.classes = static_cast<Index>(counts.size());
  s.tail_threshold = tail_threshold;
  Index tail = 0;
  for (int c : counts) {
    s.total_instances += c;
    if (c < tail_threshold) ++tail;
    ++s.histogram[c];
  }
  if (!counts.empty()) {
    s.mean_count = static_cast<double>(s.total_instances) / static_cast<double>(counts.size());
    s.tail_fraction = static_cast<double>(tail) / static_cast<double>(counts.size());
  }
  return s;
}

nlohmann::json to_json(const LongTailSummary& s) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [count, n] : s.histogram) hist[std::to_string(count)] = n;
  return {{"classes", s.classes},         {"total_instances", s.total_instances}, {"mean_count", s.mean_count},
          {"tail_fraction", s.tail_fraction}, {"tail_threshold", s.tail_threshold}, {"histogram", hist}};
}

Tensor draw_instance(const IdentityUniverse& universe, Index identity, Index instance) {
  check_identity(universe, identity);
  if (instance < 0) throw IndexError("negative instance index");
  CounterStream stream(universe.seed, Stream::train_noise, u32(identity), u32(instance));
  return noisy_copy(universe, identity, stream);
}

Tensor draw_instance(const IdentityUniverse& universe, std::span<const int> counts, Index identity, Index instance) {
  if (identity < 0 || identity >= static_cast<Index>(counts.size())) {
    throw IndexError("identity " + std::to_string(identity) + " has no instance count");
  }
  if (instance < 0 || instance >= counts[static_cast<std::size_t>(identity)]) {
    throw IndexError("instance " + std::to_string(instance) + " out of range for identity " + std::to_string(identity) +
                     " with " + std::to_string(counts[static_cast<std::size_t>(identity)]) + " instances");
  }
  return draw_instance(universe, identity, instance);
}

Tensor draw_holdout_instance(const IdentityUniverse& universe, Index identity, Index index) {
  check_identity(universe, identity);
  CounterStream stream(universe.seed, Stream::holdout_noise, u32(identity), u32(index));
  return noisy_copy(universe, identity, stream);
}

std::string to_string(Sampling s) { return s == Sampling::instance ? "instance" : "class"; }

Sampling parse_sampling(const std::string& s) {
  if (s == "instance") return Sampling::instance;
  if (s == "class") return Sampling::class_uniform;
  throw ConfigError("sampling must be 'instance' or 'class', got '" + s + "'");
}

PairSampler::PairSampler(const IdentityUniverse& universe, std::vector<int> counts, std::vector<Index> identities,
                         Sampling mode)
    : universe_(&universe), counts_(std::move(counts)), identities_(std::move(identities)), mode_(mode) {
  if (counts_.empty()) throw ConfigError("pair sampler needs at least one label");
  if (!identities_.empty() && identities_.size() != counts_.size()) {
    throw ShapeError("identity map must have one entry per label");
  }
  cumulative_.reserve(counts_.size());
  std::int64_t acc = 0;
  for (std::size_t l = 0; l < counts_.size(); ++l) {
    if (counts_[l] < 1) throw ConfigError("every label needs at least one instance");
    check_identity(universe, identity_of(static_cast<Index>(l)));
    acc += counts_[l];
    cumulative_.push_back(acc);
  }
}

Index PairSampler::identity_of(Index label) const {
  return identities_.empty() ? label : identities_[static_cast<std::size_t>(label)];
}

PairBatch PairSampler::sample(Index batch_size, std::uint64_t seed, std::uint64_t step) const {
  const IdentityUniverse& u = *universe_;
  PairBatch batch;
  batch.x_t.resize(batch_size, u.d_in);
  batch.x_w.resize(batch_size, u.d_in);
  CounterStream stream(seed, Stream::batch, step);
  for (Index i = 0; i < batch_size; ++i) {
    Index label;
    if (mode_ == Sampling::instance) {
      const auto pick = static_cast<std::int64_t>(stream.below(static_cast<std::uint64_t>(cumulative_.back())));
      label = std::upper_bound(cumulative_.begin(), cumulative_.end(), pick) - cumulative_.begin();
    } else {
      label = static_cast<Index>(stream.below(counts_.size()));
    }
    const Index identity = identity_of(label);
    const int count = counts_[static_cast<std::size_t>(label)];
    const Index query = static_cast<Index>(stream.below(static_cast<std::uint64_t>(count)));
    batch.x_t.row(i) = draw_instance(u, identity, query);
    Index reference = -1;
    if (count >= 2) {
      reference = static_cast<Index>(stream.below(static_cast<std::uint64_t>(count - 1)));
      if (reference >= query) ++reference;
      batch.x_w.row(i) = draw_instance(u, identity, reference);
    } else {
      batch.x_w.row(i) = noisy_copy(u, identity, stream);
    }
    batch.y.push_back(label);
    batch.query_instance.push_back(query);
    batch.reference_instance.push_back(reference);
  }
  return batch;
}

PairBatch make_pair_batch(const IdentityUniverse& universe, std::span<const int> counts, Index batch_size, Sampling mode,
                          SamplerState& state) {
  PairSampler sampler(universe, std::vector<int>(counts.begin(), counts.end()), {}, mode);
  return sampler.sample(batch_size, state.seed, state.step++);
}

std::vector<Index> EvalProtocol::labels_of(std::span<const Index> members) const {
  std::vector<Index> out;
  out.reserve(members.size());
  for (Index m : members) out.push_back(samples[static_cast<std::size_t>(m)].identity);
  return out;
}

EvalProtocol build_eval_protocol(const IdentityUniverse& universe, Index n_pairs, Index n_probe, Index n_distractors,
                                 std::uint64_t seed) {
  if (n_pairs < 0 || n_probe < 0 || n_distractors < 0) throw ConfigError("protocol sizes must be non-negative");
  if (n_distractors > universe.reserved) {
    throw ConfigError("requested " + std::to_string(n_distractors) + " distractors but only " +
                      std::to_string(universe.reserved) + " reserved identities exist");
  }
  if (n_probe > universe.classes) {
    throw ConfigError("requested " + std::to_string(n_probe) + " probes from " + std::to_string(universe.classes) +
                      " training identities");
  }
  if (n_pairs > 0 && universe.classes < 2) throw ConfigError("impostor pairs need at least two training identities");

  EvalProtocol p;
  CounterStream stream(seed, Stream::protocol, 0u);
  // Each identity's holdout draws are numbered so no two members share one.
  std::vector<Index> next_draw(static_cast<std::size_t>(universe.total_identities()), 0);
  auto add_sample = [&](Index identity) {
    p.samples.push_back({identity, next_draw[static_cast<std::size_t>(identity)]++});
    return static_cast<Index>(p.samples.size() - 1);
  };

  const Index genuine = (n_pairs + 1) / 2;
  for (Index i = 0; i < n_pairs; ++i) {
    const bool is_genuine = i < genuine;
    const Index a = static_cast<Index>(stream.below(static_cast<std::uint64_t>(universe.classes)));
    Index b = a;
    if (!is_genuine) {
      b = static_cast<Index>(stream.below(static_cast<std::uint64_t>(universe.classes - 1)));
      if (b >= a) ++b;
    }
    const Index first = add_sample(a);
    const Index second = add_sample(b);
    p.pairs.push_back({first, second, is_genuine});
  }

  // Probe identities without replacement (partial Fisher-Yates).
  std::vector<Index> ids(static_cast<std::size_t>(universe.classes));
  std::iota(ids.begin(), ids.end(), Index{0});
  for (Index i = 0; i < n_probe; ++i) {
    const auto j = i + static_cast<Index>(stream.below(static_cast<std::uint64_t>(universe.classes - i)));
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
  }
  for (Index i = 0; i < n_probe; ++i) {
    const Index identity = ids[static_cast<std::size_t>(i)];
    p.gallery.push_back(add_sample(identity));
    p.probes.push_back(add_sample(identity));
  }
  for (Index d = 0; d < n_distractors; ++d) {
    const Index identity = universe.classes + d;
    p.distractor_labels.push_back(identity);
    p.gallery.push_back(add_sample(identity));
  }
  return p;
}

Tensor materialize(const IdentityUniverse& universe, const EvalProtocol& protocol) {
  Tensor x(static_cast<Index>(protocol.samples.size()), universe.d_in);
  for (std::size_t i = 0; i < protocol.samples.size(); ++i) {
    const auto& s = protocol.samples[i];
    x.row(static_cast<Index>(i)) = draw_holdout_instance(universe, s.identity, s.index);
  }
  return x;
}

void write_dataset(const std::string& path, const IdentityUniverse& universe, std::span<const int> counts) {
  if (static_cast<Index>(counts.size()) > universe.total_identities()) {
    throw ShapeError("more counts than identities in the universe");
  }
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0},
                                              [](std::uint64_t a, int c) { return a + static_cast<std::uint64_t>(c); });
  ByteWriter w;
  w.put_bytes("DCQD");
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint32_t>(u32(static_cast<Index>(counts.size())));
  w.put<std::uint32_t>(u32(universe.d_in));
  w.put<std::uint64_t>(total);
  for (std::size_t id = 0; id < counts.size(); ++id) {
    for (int k = 0; k < counts[id]; ++k) {
      const Tensor x = draw_instance(universe, static_cast<Index>(id), k);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(id));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
      for (Index j = 0; j < x.cols(); ++j) w.put_f64(x(0, j));
    }
  }
  write_file_atomic(path, w.bytes());
}

DatasetFile read_dataset(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes);
  if (r.get_bytes(4) != "DCQD") throw IntegrityError(path + ": not a DCQD dataset file");
  DatasetFile f;
  f.version = r.get<std::uint32_t>();
  if (f.version != kDatasetVersion) throw VersionError(path + ": unsupported dataset version " + std::to_string(f.version));
  f.classes = r.get<std::uint32_t>();
  f.d_in = r.get<std::uint32_t>();
  const auto total = r.get<std::uint64_t>();
  const std::uint64_t record_bytes = 8 + 8ull * f.d_in;
  if (r.remaining() != total * record_bytes) throw IntegrityError(path + ": record payload size mismatch");
  f.records.reserve(static_cast<std::size_t>(total));
  for (std::uint64_t i = 0; i < total; ++i) {
    DatasetRecord rec;
    rec.identity = r.get<std::uint32_t>();
    rec.instance = r.get<std::uint32_t>();
    rec.values.resize(f.d_in);
    for (auto& v : rec.values) v = r.get_f64();
    f.records.push_back(std::move(rec));
  }
  return f;
}

}  // namespace dcq
