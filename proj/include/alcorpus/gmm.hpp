#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "alcorpus/linalg.hpp"
#include "alcorpus/random.hpp"

namespace alcorpus {

struct GmmModel {
  std::vector<double> weights;      // M, on the simplex
  std::vector<std::vector<double>> means;  // M x p
  std::vector<Matrix> covariances;  // M, each p x p, regularised

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }

  /// Mean per-point log-likelihood of the rows.
  double mean_log_likelihood(std::span<const double> rows) const;
  /// Posterior component probabilities, N x M row-major.
  std::vector<double> responsibilities(std::span<const double> rows) const;
};

struct GmmFitOptions {
  std::size_t components = 1;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;  // on the mean log-likelihood improvement
  int max_iter = 500;
  int restarts = 3;
};

struct GmmFit {
  GmmModel model;
  std::vector<double> log_likelihood_trace;  // mean log-likelihood after each EM iteration
  int iterations = 0;
  double regularization = 0.0;
};

/// EM for a full-covariance Gaussian mixture. Means are seeded with k-means++,
/// covariances start at the global covariance and weights uniform; the best
/// of `restarts` runs by final likelihood is kept. reg = 1e-6 * trace(S) / p is
/// added to every covariance diagonal at each M-step. A component whose
/// weight falls below 1e-12 triggers a fresh initialisation; after three such
/// collapses the fit fails with NumericalError.
GmmFit fit_em(std::span<const double> rows, std::size_t dim, const GmmFitOptions& options);

/// Component by weight, then a Gaussian draw. n x p row-major.
std::vector<double> gmm_sample(const GmmModel& model, std::size_t n, Rng& rng);
/// As gmm_sample, also reporting the component index of each draw.
std::vector<double> gmm_sample(const GmmModel& model, std::size_t n, Rng& rng,
                               std::vector<std::size_t>& components);

std::string gmm_to_json(const GmmFit& fit, const std::string& space);
GmmModel gmm_from_json(const std::string& json);

}  // namespace alcorpus
