#include "alcorpus/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "alcorpus/errors.hpp"
#include "alcorpus/text.hpp"
#include "json.hpp"

namespace alcorpus {

std::string_view decision_name(Decision decision) {
  switch (decision) {
    case Decision::kAdded:
      return "ADDED";
    case Decision::kLowQuality:
      return "LOW_QUALITY";
    case Decision::kRedundant:
      return "REDUNDANT";
  }
  return "UNKNOWN";
}

SelectionStep build_initial_corpus(std::span<const DataSample> screened,
                                   const KnnQualityEstimator& estimator,
                                   const QualityThreshold& threshold, std::string corpus_name) {
  validate_pool(screened);
  const double theta = threshold.theta_hq.value();
  SelectionStep step;
  step.report.k = 1;
  step.report.candidates = screened.size();
  std::vector<std::string> added;
  for (const auto& s : screened) {
    const double predicted = estimator.predict(s.speaker_embedding.vector).value();
    const bool good = predicted > theta;
    step.decisions.push_back({s.sample_id, 1, predicted, std::numeric_limits<double>::quiet_NaN(),
                              good ? Decision::kAdded : Decision::kLowQuality});
    if (good) added.push_back(s.sample_id);
  }
  step.report.passed_quality = added.size();
  // Every sample is informative to an empty corpus.
  step.report.informative = screened.size();
  step.report.added = added.size();
  step.corpus = corpus_merge(Corpus(std::move(corpus_name)), added, 1);
  step.report.corpus_size_after = step.corpus.size();
  return step;
}

SelectionStep acquisition_step(const Corpus& previous, std::span<const DataSample> segment,
                               const KnnQualityEstimator& estimator, const CoverageProxy& proxy,
                               const QualityThreshold& threshold, int k) {
  validate_pool(segment);
  if (k < 2) throw ValidationError("acquisition_step: k must be >= 2");
  std::vector<std::string> overlap;
  {
    std::unordered_map<std::string_view, bool> present;
    for (const auto& e : previous.entries()) present.emplace(e.sample_id, true);
    for (const auto& s : segment)
      if (present.count(s.sample_id)) overlap.push_back(s.sample_id);
  }
  if (!overlap.empty()) {
    std::string msg = "acquisition_step: segment overlaps the corpus:";
    for (const auto& id : overlap) msg += " " + id;
    throw ValidationError(msg);
  }

  const double theta = threshold.theta_hq.value();
  SelectionStep step;
  step.report.k = k;
  step.report.candidates = segment.size();
  std::vector<std::string> added;
  for (const auto& s : segment) {
    const double predicted = estimator.predict(s.speaker_embedding.vector).value();
    const double zero_shot = zero_shot_quality(proxy, s.speaker_embedding.vector).value();
    const bool good = predicted > theta;
    const bool informative = zero_shot < theta;
    if (good) ++step.report.passed_quality;
    if (informative) ++step.report.informative;
    Decision d = Decision::kLowQuality;
    if (good && informative) {
      d = Decision::kAdded;
      added.push_back(s.sample_id);
    } else if (good) {
      d = Decision::kRedundant;
    }
    step.decisions.push_back({s.sample_id, k, predicted, zero_shot, d});
  }
  step.report.added = added.size();
  step.corpus = corpus_merge(previous, added, k);
  step.report.corpus_size_after = step.corpus.size();
  return step;
}

LoopResult run_loop(std::span<const std::vector<DataSample>> screened_segments,
                    const KnnQualityEstimator& estimator, const QualityThreshold& threshold,
                    const ProxyParams& proxy_params, std::string corpus_name) {
  if (screened_segments.empty()) throw ValidationError("run_loop: K must be >= 1");
  const std::size_t dim = estimator.dim();
  std::unordered_map<std::string, const DataSample*> by_id;

  LoopResult result;
  auto absorb = [&](SelectionStep&& step) {
    result.corpus = std::move(step.corpus);
    result.reports.push_back(step.report);
    result.decisions.insert(result.decisions.end(), std::make_move_iterator(step.decisions.begin()),
                            std::make_move_iterator(step.decisions.end()));
  };

  for (const auto& s : screened_segments[0]) by_id.emplace(s.sample_id, &s);
  absorb(build_initial_corpus(screened_segments[0], estimator, threshold, std::move(corpus_name)));

  for (std::size_t seg = 1; seg < screened_segments.size(); ++seg) {
    std::vector<double> corpus_rows;
    corpus_rows.reserve(result.corpus.size() * dim);
    for (const auto& e : result.corpus.entries()) {
      const auto& v = by_id.at(e.sample_id)->speaker_embedding.vector;
      corpus_rows.insert(corpus_rows.end(), v.begin(), v.end());
    }
    const CoverageProxy proxy(proxy_params, dim, std::move(corpus_rows));
    for (const auto& s : screened_segments[seg]) by_id.emplace(s.sample_id, &s);
    absorb(acquisition_step(result.corpus, screened_segments[seg], estimator, proxy, threshold,
                            static_cast<int>(seg + 1)));
  }
  return result;
}

Corpus baseline_select(std::span<const DataSample> pool, const KnnQualityEstimator& estimator,
                       std::size_t n, std::string corpus_name) {
  validate_pool(pool);
  if (n > pool.size())
    throw ValidationError("baseline_select: n=" + std::to_string(n) + " exceeds pool size " +
                          std::to_string(pool.size()));
  std::vector<double> predicted(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i)
    predicted[i] = estimator.predict(pool[i].speaker_embedding.vector).value();
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (predicted[a] != predicted[b]) return predicted[a] > predicted[b];
    return pool[a].sample_id < pool[b].sample_id;
  });
  std::vector<std::string> chosen;
  chosen.reserve(n);
  for (std::size_t i = 0; i < n; ++i) chosen.push_back(pool[order[i]].sample_id);
  return corpus_merge(Corpus(std::move(corpus_name)), chosen, 1);
}

void save_iteration_reports(const std::filesystem::path& path,
                            std::span<const IterationReport> reports) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["k"] = r.k;
    j["candidates"] = r.candidates;
    j["passed_quality"] = r.passed_quality;
    j["informative"] = r.informative;
    j["added"] = r.added;
    j["corpus_size_after"] = r.corpus_size_after;
    out << j.dump() << '\n';
  }
}

std::vector<IterationReport> load_iteration_reports(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<IterationReport> reports;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      reports.push_back({j.at("k").get<int>(), j.at("candidates").get<std::size_t>(),
                         j.at("passed_quality").get<std::size_t>(),
                         j.at("informative").get<std::size_t>(), j.at("added").get<std::size_t>(),
                         j.at("corpus_size_after").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad iteration report: ") + e.what(), line_no);
    }
  }
  return reports;
}

void save_decision_log(const std::filesystem::path& path, std::span<const DecisionRecord> records,
                       std::span<const std::string> comments) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "sample_id,predicted_quality,zero_shot_quality,decision\n";
  for (const auto& r : records) {
    out << r.sample_id << ',' << text::format_double(r.predicted_quality) << ','
        << (std::isnan(r.zero_shot_quality) ? std::string() : text::format_double(r.zero_shot_quality))
        << ',' << decision_name(r.decision) << '\n';
  }
}

}  // namespace alcorpus
