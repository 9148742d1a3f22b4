#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "alcorpus/errors.hpp"
#include "alcorpus/planner.hpp"
#include "doctest.h"

using namespace alcorpus;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("v" + std::to_string(i));
  return v;
}

std::vector<std::string> concat(const SourcePartition& p) {
  std::vector<std::string> all;
  for (const auto& s : p.segments) all.insert(all.end(), s.begin(), s.end());
  return all;
}

}  // namespace

TEST_CASE("partition examples") {
  const auto half = shuffle_and_partition(ids(10), {{0.5, 0.5}, 1});
  REQUIRE(half.segments.size() == 2);
  CHECK(half.segments[0].size() == 5);
  CHECK(half.segments[1].size() == 5);

  for (std::size_t n : {7u, 100u, 2719u}) {
    const auto p = shuffle_and_partition(ids(n), {{0.1, 0.9}, 3});
    CHECK(p.segments[0].size() == static_cast<std::size_t>(std::llround(0.1 * n)));
  }

  const auto a = shuffle_and_partition(ids(50), {{0.3, 0.7}, 9});
  const auto b = shuffle_and_partition(ids(50), {{0.3, 0.7}, 9});
  CHECK(a.segments == b.segments);
}

TEST_CASE("partition is a disjoint cover obeying the size law") {
  const std::vector<std::vector<double>> plans = {{1.0}, {0.1, 0.9}, {0.2, 0.3, 0.5}, {0.25, 0.25, 0.25, 0.25},
                                                  {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  for (const auto& ratios : plans) {
    for (std::size_t n : {1u, 2u, 3u, 10u, 33u, 101u}) {
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        auto input = ids(n);
        const auto p = shuffle_and_partition(input, {ratios, seed});
        REQUIRE(p.segments.size() == ratios.size());
        auto all = concat(p);
        CHECK(all.size() == n);
        std::sort(all.begin(), all.end());
        std::sort(input.begin(), input.end());
        CHECK(all == input);
        for (std::size_t k = 0; k < ratios.size(); ++k)
          CHECK(std::abs(static_cast<double>(p.segments[k].size()) - ratios[k] * n) <= 1.0);
      }
    }
  }
}

TEST_CASE("different seeds give different permutations") {
  const auto a = shuffle_and_partition(ids(100), {{1.0}, 1});
  const auto b = shuffle_and_partition(ids(100), {{1.0}, 2});
  CHECK(a.segments[0] != b.segments[0]);
}

TEST_CASE("partition input validation") {
  CHECK_THROWS_AS(shuffle_and_partition({"a", "a"}, {{1.0}, 1}), ValidationError);
  CHECK_THROWS_AS(shuffle_and_partition(ids(4), {{0.5, 0.4}, 1}), ValidationError);
  CHECK_THROWS_AS(shuffle_and_partition(ids(4), {{}, 1}), ValidationError);
  CHECK_THROWS_AS(shuffle_and_partition({}, {{1.0}, 1}), ValidationError);
  CHECK_THROWS_AS(shuffle_and_partition(ids(4), {{1.5, -0.5}, 1}), ValidationError);
}

TEST_CASE("partition and source list round trip") {
  const auto p = shuffle_and_partition(ids(20), {{0.1, 0.9}, 17});
  const auto back = partition_from_json(partition_to_json(p));
  CHECK(back.segments == p.segments);
  CHECK(back.seed == 17);

  const auto path = std::filesystem::temp_directory_path() / "alcorpus_sources.txt";
  save_source_list(path, ids(5));
  CHECK(load_source_list(path) == ids(5));
  std::filesystem::remove(path);
}
