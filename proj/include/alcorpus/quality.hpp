#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace alcorpus {

/// Pseudo-MOS on the closed interval [1, 5].
class QualityScore {
 public:
  static constexpr double kMin = 1.0;
  static constexpr double kMax = 5.0;

  /// Throws ValidationError outside [1, 5].
  explicit QualityScore(double value);
  static QualityScore clamped(double raw);

  double value() const { return value_; }
  auto operator<=>(const QualityScore&) const = default;

 private:
  double value_;
};

struct QualityThreshold {
  QualityScore theta_hq;
};

/// Minimum of the reference speakers' scores.
QualityThreshold derive_threshold(std::span<const QualityScore> reference_scores);

struct LabeledPoint {
  std::vector<double> features;
  QualityScore score;
};

/// k-nearest-neighbour regressor on Euclidean distance.
class KnnQualityEstimator {
 public:
  KnnQualityEstimator(std::size_t k, std::size_t dim, std::vector<double> points,
                      std::vector<double> scores);

  std::size_t k() const { return k_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return scores_.size(); }
  std::span<const double> points() const { return points_; }
  std::span<const double> scores() const { return scores_; }

  /// Mean score of the k nearest stored points; equal distances are broken
  /// by insertion order.
  QualityScore predict(std::span<const double> x) const;
  std::vector<double> predict_many(std::span<const double> rows) const;

  std::string to_json() const;
  static KnnQualityEstimator from_json(const std::string& json);

 private:
  std::size_t k_;
  std::size_t dim_;
  std::vector<double> points_;  // size() x dim_, row-major
  std::vector<double> scores_;
};

/// Throws ValidationError when fewer than k points are given.
KnnQualityEstimator fit_estimator(std::span<const LabeledPoint> labeled, std::size_t k);

struct ProxyParams {
  double base_quality = 2.0;
  double gain = 0.5;
  double bandwidth = 1.0;
};

/// Stand-in for "zero-shot synthesis quality of a model trained on corpus C":
/// base + gain * sum_j exp(-||x - c_j||^2 / (2 h^2)), clamped to [1, 5].
class CoverageProxy {
 public:
  CoverageProxy(ProxyParams params, std::size_t dim, std::vector<double> corpus_embeddings);

  const ProxyParams& params() const { return params_; }
  std::size_t dim() const { return dim_; }
  std::size_t corpus_size() const { return dim_ == 0 ? 0 : corpus_.size() / dim_; }

  /// Unnormalised Gaussian kernel sum at x.
  double density(std::span<const double> x) const;
  /// base + gain * density, before clamping.
  double raw_quality(std::span<const double> x) const;

 private:
  ProxyParams params_;
  std::size_t dim_;
  std::vector<double> corpus_;
};

QualityScore zero_shot_quality(const CoverageProxy& proxy, std::span<const double> speaker);

/// Kernel sum shared by the proxy and the ground-truth evaluator. `weights`
/// may be empty (all ones).
double gaussian_kernel_sum(std::span<const double> x, std::span<const double> rows,
                           std::size_t dim, double bandwidth, std::span<const double> weights = {});

}  // namespace alcorpus
