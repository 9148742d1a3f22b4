#include <cmath>
#include <limits>
#include <map>

#include "alcorpus/errors.hpp"
#include "alcorpus/prescreen.hpp"
#include "alcorpus/random.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace alcorpus;

namespace {

DataSample sample(std::string id, std::string source, double alignment, double variance) {
  DataSample s;
  s.sample_id = std::move(id);
  s.source_id = std::move(source);
  s.speaker_embedding = {s.source_id, {0.0, 0.0}};
  s.duration_sec = 1.0;
  s.screening = {alignment, variance};
  return s;
}

std::vector<DataSample> random_pool(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DataSample> pool;
  for (int src = 0; src < 30; ++src) {
    const double var = rng.uniform(0, 2);
    const int n = 1 + static_cast<int>(rng.below(4));
    for (int u = 0; u < n; ++u)
      pool.push_back(sample("s" + std::to_string(src) + "-" + std::to_string(u), "src" + std::to_string(src),
                            rng.uniform(), var));
  }
  return pool;
}

}  // namespace

TEST_CASE("intra_group_variance examples") {
  const std::vector<std::vector<double>> same(4, {1.5, -2.0, 3.0});
  CHECK(intra_group_variance(same) == 0.0);

  const std::vector<std::vector<double>> two = {{0, 0}, {2, 0}};
  CHECK(intra_group_variance(two) == doctest::Approx(1.0));

  auto pts = oracle::gaussian_points(7, 3, 12);
  std::vector<std::vector<double>> group, scaled;
  for (std::size_t i = 0; i < 7; ++i) {
    group.emplace_back(pts.begin() + i * 3, pts.begin() + i * 3 + 3);
    scaled.push_back(group.back());
    for (double& v : scaled.back()) v *= -2.5;
  }
  CHECK(intra_group_variance(scaled) == doctest::Approx(6.25 * intra_group_variance(group)).epsilon(1e-12));

  CHECK_THROWS_AS(intra_group_variance(std::vector<std::vector<double>>{}), ValidationError);
  const std::vector<std::vector<double>> ragged = {{1, 2}, {1}};
  CHECK_THROWS_AS(intra_group_variance(ragged), ValidationError);
}

TEST_CASE("screen examples") {
  const auto pool = random_pool(1);
  const auto all = screen(pool, {});
  CHECK(all.kept.size() == pool.size());
  CHECK(all.rejected.empty());

  const std::vector<DataSample> one = {sample("a", "v", 0.1, 0.0)};
  const auto low = screen(one, {0.5, 1.0});
  REQUIRE(low.rejected.size() == 1);
  CHECK(low.rejected[0].reason == RejectReason::kLowAlignment);
  CHECK(reason_name(RejectReason::kLowAlignment) == "LOW_ALIGNMENT");

  // three samples of a group with the variance of {(0,0),(2,0)} = 1
  const std::vector<DataSample> group = {sample("a", "v", 0.9, 1.0), sample("b", "v", 0.9, 1.0),
                                         sample("c", "v", 0.9, 1.0)};
  const auto high = screen(group, {0.5, 0.5});
  CHECK(high.kept.empty());
  REQUIRE(high.rejected.size() == 3);
  for (const auto& r : high.rejected) CHECK(r.reason == RejectReason::kHighGroupVariance);
  CHECK(reason_name(RejectReason::kHighGroupVariance) == "HIGH_GROUP_VARIANCE");
}

TEST_CASE("screen properties on random pools") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto pool = random_pool(seed);
    std::size_t last_kept = pool.size() + 1;
    for (double a : {-1.0, 0.2, 0.4, 0.6, 0.8, 2.0}) {
      const ScreeningThresholds thr{a, 1.0};
      const auto res = screen(pool, thr);
      CHECK(res.kept.size() + res.rejected.size() == pool.size());
      CHECK(res.kept.size() <= last_kept);
      last_kept = res.kept.size();

      std::map<std::string, int> seen;
      for (const auto& s : res.kept) ++seen[s.sample_id];
      for (const auto& r : res.rejected) ++seen[r.sample.sample_id];
      CHECK(seen.size() == pool.size());
      for (const auto& [id, c] : seen) CHECK(c == 1);

      // a source's variance verdict is shared by all its samples
      std::map<std::string, bool> too_spread;
      for (const auto& s : pool) too_spread[s.source_id] = s.screening.group_variance > thr.max_group_variance;
      for (const auto& s : res.kept) CHECK_FALSE(too_spread[s.source_id]);
      for (const auto& r : res.rejected) {
        if (r.reason == RejectReason::kHighGroupVariance) {
          CHECK(too_spread[r.sample.source_id]);
        } else {
          CHECK(r.sample.screening.alignment_score < thr.min_alignment);
        }
      }
    }
  }
}

TEST_CASE("thresholds are validated") {
  CHECK_THROWS_AS(screen(random_pool(1), {0.5, -1.0}), ValidationError);
}
