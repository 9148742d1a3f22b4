#include <cmath>
#include <filesystem>
#include <map>

#include "alcorpus/errors.hpp"
#include "alcorpus/random.hpp"
#include "alcorpus/selector.hpp"
#include "doctest.h"

using namespace alcorpus;

namespace {

DataSample at(std::string id, std::vector<double> v) {
  DataSample s;
  s.sample_id = id;
  s.source_id = "src-" + id;
  s.speaker_embedding = {s.source_id, std::move(v)};
  s.duration_sec = 2.0;
  s.screening = {1.0, 0.0};
  return s;
}

// Estimator returning `score` exactly at each 1-D location via k=1.
KnnQualityEstimator step_estimator(std::vector<std::pair<double, double>> points) {
  std::vector<double> xs, ys;
  for (auto [x, y] : points) xs.push_back(x), ys.push_back(y);
  return KnnQualityEstimator(1, 1, xs, ys);
}

QualityThreshold theta(double v) { return {QualityScore(v)}; }

std::vector<std::vector<DataSample>> random_segments(std::uint64_t seed, std::size_t k) {
  Rng rng(seed);
  std::vector<std::vector<DataSample>> segs(k);
  int id = 0;
  for (auto& seg : segs) {
    const std::size_t n = 5 + rng.below(20);
    for (std::size_t i = 0; i < n; ++i) {
      seg.push_back(at("s" + std::to_string(id++), {rng.normal(0, 2), rng.normal(0, 2)}));
    }
  }
  return segs;
}

KnnQualityEstimator random_estimator(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> pts, scores;
  for (int i = 0; i < 60; ++i) {
    pts.push_back(rng.normal(0, 2));
    pts.push_back(rng.normal(0, 2));
    scores.push_back(rng.uniform(1.5, 4.5));
  }
  return KnnQualityEstimator(3, 2, pts, scores);
}

}  // namespace

TEST_CASE("initial corpus examples") {
  const auto est = step_estimator({{0, 2.0}, {10, 3.0}, {20, 4.0}});
  const std::vector<DataSample> pool = {at("a", {0}), at("b", {10}), at("c", {20})};
  CHECK(build_initial_corpus(pool, est, theta(1.5)).corpus.size() == 3);
  CHECK(build_initial_corpus(pool, est, theta(4.5)).corpus.empty());
  const auto step = build_initial_corpus(pool, est, theta(2.9));
  CHECK(step.corpus.sample_ids() == std::vector<std::string>{"b", "c"});
  CHECK(step.report.k == 1);
  CHECK(step.report.candidates == 3);
  CHECK(step.report.passed_quality == 2);
  CHECK(step.report.added == 2);
  CHECK(step.report.corpus_size_after == 2);
  for (const auto& e : step.corpus.entries()) CHECK(e.iteration == 1);
  // strict: a prediction equal to theta is not enough
  CHECK(build_initial_corpus(pool, est, theta(3.0)).corpus.sample_ids() == std::vector<std::string>{"c"});
}

TEST_CASE("acquisition step examples") {
  const auto est = step_estimator({{0, 3.5}, {50, 4.0}});
  const Corpus prev("ours", {{"old", 1}});

  // all candidates sit on a dense cluster already in the corpus
  const CoverageProxy dense({2.0, 1.0, 1.0}, 1, std::vector<double>(10, 0.0));
  const std::vector<DataSample> seg = {at("x", {0}), at("y", {0.01})};
  auto step = acquisition_step(prev, seg, est, dense, theta(3.0), 2);
  CHECK(step.corpus == prev);
  CHECK(step.report.added == 0);
  CHECK(step.report.passed_quality == 2);
  for (const auto& d : step.decisions) CHECK(d.decision == Decision::kRedundant);

  CHECK(acquisition_step(prev, {}, est, dense, theta(3.0), 2).corpus == prev);

  // quality 3.5 > 3.0 and zero-shot 2.5 < 3.0
  const CoverageProxy sparse({2.5, 1.0, 1.0}, 1, {});
  step = acquisition_step(prev, std::vector<DataSample>{at("z", {0})}, est, sparse, theta(3.0), 2);
  REQUIRE(step.corpus.size() == 2);
  CHECK(step.corpus.entries()[1] == CorpusEntry{"z", 2});
  REQUIRE(step.decisions.size() == 1);
  CHECK(step.decisions[0].predicted_quality == 3.5);
  CHECK(step.decisions[0].zero_shot_quality == 2.5);
  CHECK(step.decisions[0].decision == Decision::kAdded);

  // zero-shot exactly at theta is not informative
  const CoverageProxy level({3.0, 1.0, 1.0}, 1, {});
  CHECK(acquisition_step(prev, std::vector<DataSample>{at("z", {0})}, est, level, theta(3.0), 2).report.added == 0);

  CHECK_THROWS_AS(acquisition_step(prev, std::vector<DataSample>{at("old", {0})}, est, sparse, theta(3.0), 2),
                  ValidationError);
}

TEST_CASE("run_loop examples") {
  const auto est = random_estimator(1);
  const auto segs = random_segments(2, 1);
  const auto loop = run_loop(segs, est, theta(3.0), {2.0, 0.5, 1.0});
  const auto init = build_initial_corpus(segs[0], est, theta(3.0));
  CHECK(loop.corpus == init.corpus);
  REQUIRE(loop.reports.size() == 1);
  CHECK(loop.reports[0] == init.report);

  const auto two = run_loop(random_segments(3, 2), est, theta(3.0), {2.0, 0.5, 1.0});
  CHECK(two.reports.size() == 2);
  CHECK(two.reports[1].k == 2);

  const auto none = run_loop(random_segments(4, 3), est, theta(4.9), {2.0, 0.5, 1.0});
  CHECK(none.corpus.empty());
  for (const auto& r : none.reports) CHECK(r.added == 0);
}

TEST_CASE("loop properties on random inputs") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const auto est = random_estimator(seed);
    const auto segs = random_segments(100 + seed, 1 + seed % 4);
    const double th = 2.5 + 0.1 * static_cast<double>(seed % 6);
    const ProxyParams proxy{2.0 + 0.1 * static_cast<double>(seed % 3), 0.6, 0.8};
    const auto loop = run_loop(segs, est, theta(th), proxy);

    std::size_t last = 0;
    for (const auto& r : loop.reports) {
      CHECK(r.corpus_size_after >= last);
      CHECK(r.added <= std::min(r.passed_quality, r.candidates));
      last = r.corpus_size_after;
    }
    CHECK(last == loop.corpus.size());

    // every decision can be re-checked from its logged oracle values
    std::map<std::string, int> added_at;
    for (const auto& e : loop.corpus.entries()) added_at[e.sample_id] = e.iteration;
    for (const auto& d : loop.decisions) {
      const bool good = d.predicted_quality > th;
      const bool informative = d.k == 1 || d.zero_shot_quality < th;
      CHECK((d.decision == Decision::kAdded) == (good && informative));
      CHECK((d.decision == Decision::kAdded) == (added_at.count(d.sample_id) == 1));
      if (d.decision == Decision::kAdded) CHECK(added_at[d.sample_id] == d.k);
    }

    const auto again = run_loop(segs, est, theta(th), proxy);
    CHECK(again.corpus == loop.corpus);
    CHECK(again.reports == loop.reports);
  }
}

TEST_CASE("copies of an already covered cluster are never added") {
  // First segment: a tight cluster that clears theta; second: the same points again under new ids.
  std::vector<std::vector<DataSample>> segs(2);
  for (int i = 0; i < 10; ++i) {
    segs[0].push_back(at("a" + std::to_string(i), {0.001 * i, 0}));
    segs[1].push_back(at("b" + std::to_string(i), {0.001 * i, 0}));
  }
  segs[1].push_back(at("far", {40, 0}));
  const KnnQualityEstimator est(1, 2, {0, 0, 40, 0}, {4.0, 4.0});
  const auto loop = run_loop(segs, est, theta(3.0), {2.0, 0.5, 1.0});
  for (int i = 0; i < 10; ++i) CHECK_FALSE(loop.corpus.contains("b" + std::to_string(i)));
  CHECK(loop.corpus.contains("far"));
}

TEST_CASE("baseline_select examples") {
  const auto est = step_estimator({{0, 1.5}, {1, 4.5}, {2, 3.0}, {3, 2.0}, {4, 4.0}});
  std::vector<DataSample> pool;
  for (int i = 0; i < 5; ++i) pool.push_back(at("p" + std::to_string(i), {static_cast<double>(i)}));
  CHECK(baseline_select(pool, est, 5).size() == 5);
  CHECK(baseline_select(pool, est, 0).empty());
  CHECK(baseline_select(pool, est, 3).sample_ids() == std::vector<std::string>{"p1", "p4", "p2"});
  CHECK_THROWS_AS(baseline_select(pool, est, 6), ValidationError);

  // ties fall back to ascending sample id
  const auto flat = step_estimator({{0, 3.0}});
  const std::vector<DataSample> tied = {at("c", {0}), at("a", {1}), at("b", {2})};
  CHECK(baseline_select(tied, flat, 2).sample_ids() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("iteration reports round trip") {
  const std::vector<IterationReport> reports = {{1, 10, 4, 10, 4, 4}, {2, 90, 30, 12, 8, 12}};
  const auto path = std::filesystem::temp_directory_path() / "alcorpus_reports.jsonl";
  save_iteration_reports(path, reports);
  CHECK(load_iteration_reports(path) == reports);
  std::filesystem::remove(path);
  CHECK(decision_name(Decision::kAdded) == "ADDED");
}
