#include "alcorpus/quality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alcorpus/errors.hpp"
#include "alcorpus/kernels.hpp"
#include "alcorpus/text.hpp"
#include "json.hpp"

namespace alcorpus {

QualityScore::QualityScore(double value) : value_(value) {
  if (!(value >= kMin && value <= kMax))
    throw ValidationError("quality score " + text::format_double(value) + " outside [1, 5]");
}

QualityScore QualityScore::clamped(double raw) {
  if (std::isnan(raw)) throw NumericalError("quality score is NaN");
  return QualityScore(std::clamp(raw, kMin, kMax));
}

QualityThreshold derive_threshold(std::span<const QualityScore> reference_scores) {
  if (reference_scores.empty()) throw ValidationError("derive_threshold: no reference scores");
  return {*std::min_element(reference_scores.begin(), reference_scores.end())};
}

KnnQualityEstimator::KnnQualityEstimator(std::size_t k, std::size_t dim, std::vector<double> points,
                                         std::vector<double> scores)
    : k_(k), dim_(dim), points_(std::move(points)), scores_(std::move(scores)) {
  if (k_ == 0) throw ValidationError("estimator k must be positive");
  if (dim_ == 0) throw ValidationError("estimator dimension must be positive");
  if (points_.size() != scores_.size() * dim_)
    throw ValidationError("estimator points and scores disagree in count");
  if (scores_.size() < k_)
    throw ValidationError("estimator needs at least k=" + std::to_string(k_) + " points, got " +
                          std::to_string(scores_.size()));
  for (double s : scores_) (void)QualityScore(s);
}

QualityScore KnnQualityEstimator::predict(std::span<const double> x) const {
  if (x.size() != dim_)
    throw ValidationError("estimator expects dimension " + std::to_string(dim_) + ", got " +
                          std::to_string(x.size()));
  const std::size_t n = scores_.size();
  std::vector<double> dist(n);
  kernels::squared_distances(x, points_, dist);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto closer = [&](std::size_t a, std::size_t b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k_ - 1), idx.end(), closer);
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k_), closer);
  double sum = 0.0;
  for (std::size_t i = 0; i < k_; ++i) sum += scores_[idx[i]];
  return QualityScore::clamped(sum / static_cast<double>(k_));
}

std::vector<double> KnnQualityEstimator::predict_many(std::span<const double> rows) const {
  if (rows.size() % dim_ != 0) throw ValidationError("predict_many: ragged query rows");
  std::vector<double> out(rows.size() / dim_);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = predict(rows.subspan(i * dim_, dim_)).value();
  return out;
}

std::string KnnQualityEstimator::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "knn-quality-estimator/1";
  j["k"] = k_;
  j["dim"] = dim_;
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < scores_.size(); ++i)
    pts.push_back(std::vector<double>(points_.begin() + static_cast<std::ptrdiff_t>(i * dim_),
                                      points_.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim_)));
  j["scores"] = scores_;
  return j.dump();
}

KnnQualityEstimator KnnQualityEstimator::from_json(const std::string& json) {
  try {
    const auto j = nlohmann::json::parse(json);
    const auto dim = j.at("dim").get<std::size_t>();
    std::vector<double> flat;
    for (const auto& p : j.at("points")) {
      auto v = p.get<std::vector<double>>();
      if (v.size() != dim) throw ValidationError("estimator point has wrong dimension");
      flat.insert(flat.end(), v.begin(), v.end());
    }
    return KnnQualityEstimator(j.at("k").get<std::size_t>(), dim, std::move(flat),
                               j.at("scores").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad estimator file: ") + e.what(), 0);
  }
}

KnnQualityEstimator fit_estimator(std::span<const LabeledPoint> labeled, std::size_t k) {
  if (k == 0) throw ValidationError("fit_estimator: k must be positive");
  if (labeled.size() < k)
    throw ValidationError("fit_estimator: " + std::to_string(labeled.size()) +
                          " labeled points is fewer than k=" + std::to_string(k));
  const std::size_t dim = labeled.front().features.size();
  std::vector<double> points;
  std::vector<double> scores;
  points.reserve(labeled.size() * dim);
  for (const auto& p : labeled) {
    if (p.features.size() != dim) throw ValidationError("fit_estimator: mixed dimensions");
    points.insert(points.end(), p.features.begin(), p.features.end());
    scores.push_back(p.score.value());
  }
  return KnnQualityEstimator(k, dim, std::move(points), std::move(scores));
}

double gaussian_kernel_sum(std::span<const double> x, std::span<const double> rows,
                           std::size_t dim, double bandwidth, std::span<const double> weights) {
  const std::size_t n = rows.size() / dim;
  if (n == 0) return 0.0;
  std::vector<double> dist(n);
  kernels::squared_distances(x, rows, dist);
  const double scale = -0.5 / (bandwidth * bandwidth);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += (weights.empty() ? 1.0 : weights[i]) * std::exp(scale * dist[i]);
  return sum;
}

CoverageProxy::CoverageProxy(ProxyParams params, std::size_t dim, std::vector<double> corpus_embeddings)
    : params_(params), dim_(dim), corpus_(std::move(corpus_embeddings)) {
  if (!(params_.bandwidth > 0.0)) throw ValidationError("proxy bandwidth must be positive");
  if (!std::isfinite(params_.base_quality) || !std::isfinite(params_.gain))
    throw ValidationError("proxy parameters must be finite");
  if (dim_ == 0) throw ValidationError("proxy dimension must be positive");
  if (corpus_.size() % dim_ != 0) throw ValidationError("proxy corpus rows are ragged");
}

double CoverageProxy::density(std::span<const double> x) const {
  if (x.size() != dim_) throw ValidationError("proxy query has wrong dimension");
  return gaussian_kernel_sum(x, corpus_, dim_, params_.bandwidth);
}

double CoverageProxy::raw_quality(std::span<const double> x) const {
  return params_.base_quality + params_.gain * density(x);
}

QualityScore zero_shot_quality(const CoverageProxy& proxy, std::span<const double> speaker) {
  return QualityScore::clamped(proxy.raw_quality(speaker));
}

}  // namespace alcorpus
