// SPDX-License-Identifier: Apache-2.0
#include "spx/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "spx/rng.hpp"

using namespace spx;

namespace {

Explanation make_expl(int rows, int cols, int cls, const std::vector<uint8_t>& mask) {
  Explanation e;
  e.rows = rows;
  e.cols = cols;
  e.target_class = cls;
  e.mask = mask;
  return e;
}

std::vector<Explanation> random_explanations(int n, int rows, int cols, int cls,
                                             uint64_t seed) {
  Rng rng(seed);
  std::vector<Explanation> out;
  for (int i = 0; i < n; ++i) {
    std::vector<uint8_t> mask(static_cast<size_t>(rows) * cols);
    for (auto& b : mask) b = static_cast<uint8_t>(rng.next() & 1);
    out.push_back(make_expl(rows, cols, cls, mask));
  }
  return out;
}

}  // namespace

TEST_CASE("aggregating copies of one mask reproduces the mask exactly") {
  const std::vector<uint8_t> mask{1, 0, 0, 1, 1, 0};
  std::vector<Explanation> expls(5, make_expl(2, 3, 1, mask));
  const auto agg = aggregate(expls, 1);
  CHECK(agg.n_explanations == 5);
  for (size_t i = 0; i < mask.size(); ++i)
    CHECK(agg.values[i] == static_cast<float>(mask[i]));
}

TEST_CASE("aggregation is order-independent and bounded in [0,1]") {
  auto expls = random_explanations(20, 8, 8, 0, 3);
  const auto a = aggregate(expls, 0);
  std::reverse(expls.begin(), expls.end());
  const auto b = aggregate(expls, 0);
  CHECK(a.values == b.values);
  float maxv = 0.0f;
  for (float v : a.values) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
    maxv = std::max(maxv, v);
  }
  CHECK(maxv == 1.0f);  // some pixel was selected at least once
}

TEST_CASE("aggregate rejects empty lists and mixed classes") {
  CHECK_THROWS_AS(aggregate({}, 0), std::invalid_argument);
  std::vector<Explanation> mixed{make_expl(2, 2, 0, {1, 0, 0, 0}),
                                 make_expl(2, 2, 1, {1, 0, 0, 0})};
  CHECK_THROWS_AS(aggregate(mixed, 0), std::invalid_argument);
}

TEST_CASE("all-empty masks produce an all-zero aggregate") {
  std::vector<Explanation> expls(3, make_expl(2, 2, 0, {0, 0, 0, 0}));
  const auto agg = aggregate(expls, 0);
  CHECK(std::all_of(agg.values.begin(), agg.values.end(),
                    [](float v) { return v == 0.0f; }));
}

TEST_CASE("partial accumulators merge to the same result as one pass") {
  const auto expls = random_explanations(17, 6, 6, 2, 9);
  const auto whole = aggregate(expls, 2);
  ExplanationAccumulator left(6, 6, 2), right(6, 6, 2);
  for (size_t i = 0; i < expls.size(); ++i)
    (i % 2 == 0 ? left : right).add(expls[i]);
  left.merge(right);
  const auto merged = left.finalize();
  CHECK(merged.values == whole.values);
  CHECK(merged.n_explanations == whole.n_explanations);
}

TEST_CASE("projection sums rows and ignores column order") {
  AggregatedExplanation agg;
  agg.rows = 224;
  agg.cols = 224;
  agg.class_id = 0;
  agg.n_explanations = 1;
  agg.values.assign(static_cast<size_t>(224) * 224, 1.0f);
  const auto uniform = project(agg);
  CHECK(uniform.kind == ProfileKind::kLimeProjection);
  REQUIRE(uniform.bins() == 224);
  for (double v : uniform.values) CHECK(v == doctest::Approx(224.0));

  Rng rng(4);
  for (auto& v : agg.values) v = static_cast<float>(rng.uniform());
  const auto base = project(agg);
  // Permute columns with a fixed cycle; the projection must not move.
  AggregatedExplanation permuted = agg;
  for (int r = 0; r < agg.rows; ++r)
    for (int c = 0; c < agg.cols; ++c)
      permuted.values[static_cast<size_t>(r) * 224 + (c + 37) % 224] =
          agg.values[static_cast<size_t>(r) * 224 + c];
  const auto moved = project(permuted);
  for (int k = 0; k < 224; ++k)
    CHECK(moved.values[static_cast<size_t>(k)] ==
          doctest::Approx(base.values[static_cast<size_t>(k)]).epsilon(1e-12));
}

TEST_CASE("derivative profile implements the absolute first difference") {
  FrequencyProfile w;
  w.kind = ProfileKind::kLimeProjection;
  w.values = {0, 0, 5, 5, 0};
  const auto d = derivative_profile(w);
  CHECK(d.kind == ProfileKind::kLimeDerivative);
  CHECK(d.values == std::vector<double>{0, 5, 0, 5});

  w.values = {3, 3, 3, 3};
  const auto flat = derivative_profile(w);
  CHECK(std::all_of(flat.values.begin(), flat.values.end(),
                    [](double v) { return v == 0.0; }));

  w.values = {1.0};
  CHECK_THROWS_AS(derivative_profile(w), std::invalid_argument);
}

TEST_CASE("derivative profile is positively homogeneous") {
  Rng rng(6);
  FrequencyProfile w;
  w.kind = ProfileKind::kLimeProjection;
  w.values.resize(64);
  for (auto& v : w.values) v = rng.uniform() * 10.0;
  const auto base = derivative_profile(w);
  for (double c : {0.0, 0.5, 3.0}) {
    FrequencyProfile scaled = w;
    for (auto& v : scaled.values) v *= c;
    const auto d = derivative_profile(scaled);
    for (size_t i = 0; i < d.values.size(); ++i)
      CHECK(d.values[i] == doctest::Approx(c * base.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("ensemble statistics") {
  FrequencyProfile a, b;
  a.kind = b.kind = ProfileKind::kLimeDerivative;
  a.values = {0, 2};
  b.values = {2, 0};
  const auto ens = ensemble_stats({a, b});
  CHECK(ens.n_models == 2);
  CHECK(ens.mean.kind == ProfileKind::kEnsembleMean);
  CHECK(ens.stddev.kind == ProfileKind::kEnsembleStd);
  CHECK(ens.mean.values == std::vector<double>{1, 1});
  CHECK(ens.stddev.values == std::vector<double>{1, 1});

  const auto same = ensemble_stats({a, a, a});
  CHECK(std::all_of(same.stddev.values.begin(), same.stddev.values.end(),
                    [](double v) { return v == 0.0; }));

  CHECK_THROWS_AS(ensemble_stats({a}), std::invalid_argument);
  FrequencyProfile wrong_kind = b;
  wrong_kind.kind = ProfileKind::kWelch;
  CHECK_THROWS_AS(ensemble_stats({a, wrong_kind}), std::invalid_argument);
  FrequencyProfile wrong_len = b;
  wrong_len.values.push_back(1.0);
  CHECK_THROWS_AS(ensemble_stats({a, wrong_len}), std::invalid_argument);
}

TEST_CASE("peak finding thresholds at median plus three MAD") {
  FrequencyProfile d;
  d.kind = ProfileKind::kLimeDerivative;
  d.values.assign(64, 0.1);
  // Jitter the floor so the MAD is nonzero but small.
  Rng rng(12);
  for (auto& v : d.values) v += 0.01 * rng.uniform();
  d.values[10] = 2.0;
  d.values[32] = 1.5;
  d.values[33] = 1.5;  // plateau counted once
  d.values[50] = 3.0;
  const auto peaks = find_profile_peaks(d);
  CHECK(peaks == std::vector<int>{10, 32, 50});
}

TEST_CASE("peak recall arithmetic") {
  CHECK(peak_recall({10, 50}, {9, 52, 80}, 2) == doctest::Approx(2.0 / 3.0));
  CHECK(peak_recall({}, {9}, 2) == 0.0);
  CHECK(peak_recall({1, 2}, {}, 2) == 1.0);
}

TEST_CASE("temporality score separates horizontal from vertical structure") {
  AggregatedExplanation horiz;
  horiz.rows = horiz.cols = 32;
  horiz.values.assign(1024, 0.0f);
  for (int r = 10; r < 14; ++r)
    for (int c = 0; c < 32; ++c) horiz.values[static_cast<size_t>(r) * 32 + c] = 1.0f;
  CHECK(temporality_score(horiz) < 0.05);

  AggregatedExplanation vert = horiz;
  vert.values.assign(1024, 0.0f);
  for (int r = 0; r < 32; ++r)
    for (int c = 10; c < 14; ++c) vert.values[static_cast<size_t>(r) * 32 + c] = 1.0f;
  CHECK(temporality_score(vert) > kTemporalityFlagThreshold);

  AggregatedExplanation flat = horiz;
  flat.values.assign(1024, 0.25f);
  CHECK(temporality_score(flat) == 0.0);
}

TEST_CASE("aggregated explanations round trip through the grid container") {
  const auto expls = random_explanations(7, 5, 4, 3, 21);
  const auto agg = aggregate(expls, 3);
  const auto dir = std::filesystem::temp_directory_path() / "spx_agg_tests";
  std::filesystem::create_directories(dir);
  agg.save(dir / "agg.spc1");
  const auto back = AggregatedExplanation::load(dir / "agg.spc1");
  CHECK(back.rows == agg.rows);
  CHECK(back.cols == agg.cols);
  CHECK(back.class_id == agg.class_id);
  CHECK(back.values == agg.values);
}
