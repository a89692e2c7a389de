#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dcq/binary_io.hpp"
#include "dcq/synthdata.hpp"
#include "test_util.hpp"

namespace dcq {
namespace {

TEST(Universe, SingleIdentityIsUnitVector) {
  const auto u = build_universe(1, 3, 0.1, 5);
  ASSERT_EQ(u.centers.rows(), 1);
  ASSERT_EQ(u.centers.cols(), 3);
  EXPECT_NEAR(u.centers.row(0).norm(), 1.0, 1e-12);
}

TEST(Universe, Deterministic) {
  EXPECT_EQ(build_universe(50, 8, 0.1, 9).centers, build_universe(50, 8, 0.1, 9).centers);
  EXPECT_NE(build_universe(50, 8, 0.1, 9).centers, build_universe(50, 8, 0.1, 10).centers);
}

TEST(Universe, ReservedIdentitiesAppendedWithoutChangingTrainingCenters) {
  const auto plain = build_universe(30, 8, 0.1, 9);
  const auto extended = build_universe(30, 8, 0.1, 9, 12);
  EXPECT_EQ(extended.centers.rows(), 42);
  EXPECT_EQ(extended.centers.topRows(30), plain.centers);
}

TEST(Universe, CentersAreNearlyOrthogonalOnAverage) {
  const auto u = build_universe(1000, 32, 0.1, 1);
  const Tensor g = u.centers * u.centers.transpose();
  const double n = 1000.0;
  const double mean_offdiag = (g.sum() - g.trace()) / (n * (n - 1));
  EXPECT_NEAR(mean_offdiag, 0.0, 0.05);
  for (Index i = 0; i < 1000; ++i) EXPECT_NEAR(u.centers.row(i).norm(), 1.0, 1e-12);
}

TEST(Universe, RejectsBadArguments) {
  EXPECT_THROW(build_universe(0, 8, 0.1, 1), ConfigError);
  EXPECT_THROW(build_universe(5, 1, 0.1, 1), ConfigError);
  EXPECT_THROW(build_universe(5, 8, -0.1, 1), ConfigError);
}

TEST(LongTail, FlatCounts) {
  const auto counts = assign_longtail_counts({0.0, 10, 10}, 25);
  EXPECT_TRUE(std::all_of(counts.begin(), counts.end(), [](int c) { return c == 10; }));
}

TEST(LongTail, SteepLimit) {
  const auto counts = assign_longtail_counts({60.0, 3, 500}, 100);
  EXPECT_EQ(counts[0], 500);
  EXPECT_TRUE(std::all_of(counts.begin() + 1, counts.end(), [](int c) { return c == 3; }));
}

TEST(LongTail, MatchesPowerLawAndStaysSorted) {
  const LongTailSpec spec{1.0, 2, 200};
  const auto counts = assign_longtail_counts(spec, 300);
  for (std::size_t r = 0; r < counts.size(); ++r) {
    const double raw = 200.0 * std::pow(static_cast<double>(r + 1), -1.0);
    const int expected = std::clamp(static_cast<int>(std::lround(raw)), 2, 200);
    EXPECT_EQ(counts[r], expected) << "rank " << r + 1;
  }
  EXPECT_TRUE(std::is_sorted(counts.rbegin(), counts.rend()));
}

TEST(LongTail, TailFractionByEnumeration) {
  const LongTailSpec spec{1.5, 2, 200};
  const auto counts = assign_longtail_counts(spec, 2000);
  Index tail = 0;
  for (Index r = 1; r <= 2000; ++r) {
    const double raw = 200.0 * std::pow(static_cast<double>(r), -1.5);
    if (std::clamp(std::round(raw), 2.0, 200.0) < 10.0) ++tail;
  }
  const auto summary = summarize_counts(counts);
  EXPECT_DOUBLE_EQ(summary.tail_fraction, static_cast<double>(tail) / 2000.0);
  EXPECT_GE(summary.tail_fraction, 0.8);
}

TEST(LongTail, SummaryHistogramAddsUp) {
  const auto counts = assign_longtail_counts({1.0, 2, 50}, 100);
  const auto s = summarize_counts(counts);
  Index classes = 0;
  std::int64_t total = 0;
  for (const auto& [count, n] : s.histogram) {
    classes += n;
    total += static_cast<std::int64_t>(count) * n;
  }
  EXPECT_EQ(classes, 100);
  EXPECT_EQ(total, s.total_instances);
  const auto j = to_json(s);
  EXPECT_EQ(j.at("classes").get<Index>(), 100);
}

TEST(LongTail, RejectsBadSpec) {
  EXPECT_THROW(assign_longtail_counts({1.0, 0, 5}, 10), ConfigError);
  EXPECT_THROW(assign_longtail_counts({1.0, 6, 5}, 10), ConfigError);
  EXPECT_THROW(assign_longtail_counts({-1.0, 1, 5}, 10), ConfigError);
}

TEST(Instances, ZeroSigmaGivesCenter) {
  const auto u = build_universe(5, 6, 0.0, 3);
  EXPECT_EQ(draw_instance(u, 2, 4), u.centers.row(2));
}

TEST(Instances, Deterministic) {
  const auto u = build_universe(5, 6, 0.3, 3);
  EXPECT_EQ(draw_instance(u, 1, 2), draw_instance(u, 1, 2));
  EXPECT_NE(draw_instance(u, 1, 2), draw_instance(u, 1, 3));
  EXPECT_NE(draw_instance(u, 1, 2), draw_holdout_instance(u, 1, 2));
}

TEST(Instances, MeanConvergesToCenter) {
  const double sigma = 0.5;
  const auto u = build_universe(3, 8, sigma, 5);
  Tensor mean = Tensor::Zero(1, 8);
  const int n = 10000;
  for (int i = 0; i < n; ++i) mean += draw_instance(u, 1, i);
  mean /= n;
  for (Index k = 0; k < 8; ++k) EXPECT_NEAR(mean(0, k), u.centers(1, k), 3.0 * sigma / 100.0);
}

TEST(Instances, CheckedOverloadRejectsOutOfRange) {
  const auto u = build_universe(3, 4, 0.1, 4);
  const std::vector<int> counts{2, 2, 2};
  EXPECT_NO_THROW(draw_instance(u, counts, 0, 1));
  EXPECT_THROW(draw_instance(u, counts, 0, 2), IndexError);
  EXPECT_THROW(draw_instance(u, counts, 3, 0), IndexError);
}

double class_zero_frequency(const PairSampler& sampler, Index draws) {
  Index zero = 0, total = 0;
  for (std::uint64_t step = 0; total < draws; ++step) {
    const auto batch = sampler.sample(100, 5, step);
    for (Index y : batch.y) zero += y == 0;
    total += static_cast<Index>(batch.y.size());
  }
  return static_cast<double>(zero) / static_cast<double>(total);
}

TEST(PairSampler, ClassModeIsUniformOverClasses) {
  const auto u = build_universe(10, 4, 0.1, 1);
  std::vector<int> counts{100, 50, 20, 10, 5, 3, 2, 2, 1, 1};
  const PairSampler sampler(u, counts, {}, Sampling::class_uniform);
  std::vector<Index> freq(10, 0);
  for (std::uint64_t step = 0; step < 1000; ++step) {
    for (Index y : sampler.sample(100, 9, step).y) ++freq[static_cast<std::size_t>(y)];
  }
  for (Index f : freq) EXPECT_NEAR(static_cast<double>(f) / 1e5, 0.1, 0.01);
}

TEST(PairSampler, InstanceModeFollowsCounts) {
  const auto u = build_universe(2, 4, 0.1, 1);
  const PairSampler sampler(u, {90, 10}, {}, Sampling::instance);
  EXPECT_NEAR(class_zero_frequency(sampler, 100000), 0.9, 0.02);
}

TEST(PairSampler, PairsShareLabelsAndDifferWhenPossible) {
  const auto u = build_universe(20, 6, 0.2, 1);
  const auto counts = assign_longtail_counts({1.0, 1, 20}, 20);
  const PairSampler sampler(u, counts, {}, Sampling::instance);
  for (std::uint64_t step = 0; step < 50; ++step) {
    const auto b = sampler.sample(16, 3, step);
    for (Index i = 0; i < 16; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const Index y = b.y[k];
      EXPECT_EQ(b.x_t.row(i), draw_instance(u, y, b.query_instance[k]));
      if (b.reference_instance[k] >= 0) {
        EXPECT_NE(b.reference_instance[k], b.query_instance[k]);
        EXPECT_EQ(b.x_w.row(i), draw_instance(u, y, b.reference_instance[k]));
      } else {
        EXPECT_EQ(counts[static_cast<std::size_t>(y)], 1);
      }
    }
  }
}

TEST(PairSampler, DeterministicPerStep) {
  const auto u = build_universe(20, 6, 0.2, 1);
  const PairSampler sampler(u, assign_longtail_counts({1.0, 2, 20}, 20), {}, Sampling::instance);
  const auto a = sampler.sample(8, 3, 17), b = sampler.sample(8, 3, 17), c = sampler.sample(8, 3, 18);
  EXPECT_EQ(a.x_t, b.x_t);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.x_t, c.x_t);
}

TEST(PairSampler, IdentityMapping) {
  const auto u = build_universe(10, 4, 0.0, 1);
  const PairSampler sampler(u, {3, 3}, {7, 2}, Sampling::instance);
  const auto b = sampler.sample(20, 1, 0);
  for (Index i = 0; i < 20; ++i) {
    const Index id = sampler.identity_of(b.y[static_cast<std::size_t>(i)]);
    EXPECT_EQ(b.x_t.row(i), u.centers.row(id));
  }
}

TEST(PairSampler, MakePairBatchAdvancesState) {
  const auto u = build_universe(5, 4, 0.1, 1);
  const std::vector<int> counts{3, 3, 3, 3, 3};
  SamplerState state{4, 0};
  const auto first = make_pair_batch(u, counts, 6, Sampling::instance, state);
  EXPECT_EQ(state.step, 1u);
  const PairSampler sampler(u, counts, {}, Sampling::instance);
  EXPECT_EQ(first.x_t, sampler.sample(6, 4, 0).x_t);
}

TEST(Protocol, PairsAndLabels) {
  const auto u = build_universe(50, 8, 0.1, 2, 30);
  const auto p = build_eval_protocol(u, 200, 20, 30, 2);
  ASSERT_EQ(p.pairs.size(), 200u);
  Index genuine = 0;
  for (const auto& pair : p.pairs) {
    const Index a = p.samples[static_cast<std::size_t>(pair.first)].identity;
    const Index b = p.samples[static_cast<std::size_t>(pair.second)].identity;
    if (pair.genuine) {
      ++genuine;
      EXPECT_EQ(a, b);
      EXPECT_NE(pair.first, pair.second);
    } else {
      EXPECT_NE(a, b);
    }
    EXPECT_LT(a, 50);
    EXPECT_LT(b, 50);
  }
  EXPECT_EQ(genuine, 100);
}

TEST(Protocol, DistractorsAreNeverTrainingIdentities) {
  const auto u = build_universe(50, 8, 0.1, 2, 30);
  const auto p = build_eval_protocol(u, 10, 20, 30, 2);
  ASSERT_EQ(p.distractor_labels.size(), 30u);
  for (Index d : p.distractor_labels) EXPECT_GE(d, 50);
  const auto probe_labels = p.labels_of(p.probes);
  const std::set<Index> probe_set(probe_labels.begin(), probe_labels.end());
  EXPECT_EQ(probe_set.size(), 20u);
  const auto gallery_labels = p.labels_of(p.gallery);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(gallery_labels[i], probe_labels[i]);
  EXPECT_NE(p.probes, std::vector<Index>(p.gallery.begin(), p.gallery.begin() + 20));
}

TEST(Protocol, RejectsOversizedRequests) {
  const auto u = build_universe(10, 8, 0.1, 2, 5);
  EXPECT_THROW(build_eval_protocol(u, 10, 11, 0, 1), ConfigError);
  EXPECT_THROW(build_eval_protocol(u, 10, 5, 6, 1), ConfigError);
  EXPECT_THROW(build_eval_protocol(build_universe(1, 8, 0.1, 2), 4, 0, 0, 1), ConfigError);
}

TEST(Protocol, MaterializeUsesHoldoutDraws) {
  const auto u = build_universe(10, 8, 0.1, 2, 5);
  const auto p = build_eval_protocol(u, 10, 3, 5, 1);
  const Tensor x = materialize(u, p);
  ASSERT_EQ(x.rows(), static_cast<Index>(p.samples.size()));
  for (std::size_t i = 0; i < p.samples.size(); ++i) {
    EXPECT_EQ(x.row(static_cast<Index>(i)), draw_holdout_instance(u, p.samples[i].identity, p.samples[i].index));
  }
}

TEST(Dataset, RoundTrip) {
  testing::TempDir dir("dataset");
  const auto u = build_universe(6, 4, 0.1, 2);
  const std::vector<int> counts{3, 2, 2, 1, 1, 1};
  const std::string path = (dir.path() / "d.bin").string();
  write_dataset(path, u, counts);
  const auto file = read_dataset(path);
  EXPECT_EQ(file.version, kDatasetVersion);
  EXPECT_EQ(file.classes, 6u);
  EXPECT_EQ(file.d_in, 4u);
  ASSERT_EQ(file.records.size(), 10u);
  for (const auto& r : file.records) {
    const Tensor x = draw_instance(u, r.identity, r.instance);
    for (Index k = 0; k < 4; ++k) EXPECT_EQ(r.values[static_cast<std::size_t>(k)], x(0, k));
  }
}

TEST(Dataset, TruncatedFileIsIntegrityError) {
  testing::TempDir dir("dataset_trunc");
  const auto u = build_universe(3, 4, 0.1, 2);
  const std::string path = (dir.path() / "d.bin").string();
  write_dataset(path, u, std::vector<int>{2, 2, 2});
  std::string bytes = read_file(path);
  bytes.resize(bytes.size() - 5);
  write_file_atomic(path, bytes);
  EXPECT_THROW(read_dataset(path), IntegrityError);
}

TEST(Sampling, ParsesNames) {
  EXPECT_EQ(parse_sampling("instance"), Sampling::instance);
  EXPECT_EQ(parse_sampling("class"), Sampling::class_uniform);
  EXPECT_EQ(to_string(Sampling::class_uniform), "class");
  EXPECT_THROW(parse_sampling("balanced"), ConfigError);
}

}  // namespace
}  // namespace dcq
