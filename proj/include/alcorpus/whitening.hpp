#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "alcorpus/linalg.hpp"

namespace alcorpus {

/// PCA whitening: [y; z] = Lambda^{-1/2} E^T (x - mu), y being the first
/// d' coordinates. Directions with eigenvalue <= 1e-12 * lambda_1 are
/// singular and are dropped from z, so z has rank() - d' entries.
struct WhiteningModel {
  std::vector<double> mean;
  Matrix eigvecs;               // d x d, column i is e_i
  std::vector<double> eigvals;  // descending, clamped at 0
  std::size_t d_prime = 0;      // 0 until chosen

  std::size_t dim() const { return mean.size(); }
  /// Count of eigenvalues above the singularity tolerance.
  std::size_t rank() const;
  double singular_tolerance() const;
  std::size_t z_dim() const { return rank() > d_prime ? rank() - d_prime : 0; }

  std::string to_json() const;
  static WhiteningModel from_json(const std::string& json);
};

/// Mean and biased (1/N) covariance of the rows, then a symmetric
/// eigendecomposition. rows is N x dim, row-major; N >= 2.
WhiteningModel fit_whitening(std::span<const double> rows, std::size_t dim);

/// Smallest m with sum_{i<=m} lambda_i / sum lambda_i > energy.
std::size_t choose_dprime(std::span<const double> eigvals, double energy);

/// Returns a copy with d_prime set; 1 <= d_prime <= rank().
WhiteningModel with_dprime(WhiteningModel model, std::size_t d_prime);

struct Latent {
  std::vector<double> y;  // d_prime
  std::vector<double> z;  // z_dim()
};

Latent whiten(const WhiteningModel& model, std::span<const double> x);

/// x = mu + E Lambda^{1/2} [y; z], the singular directions contributing 0.
std::vector<double> unwhiten(const WhiteningModel& model, std::span<const double> y,
                             std::span<const double> z);

/// Whitens every row; returns the principal (y) coordinates, N x d_prime.
std::vector<double> whiten_principal(const WhiteningModel& model, std::span<const double> rows);

}  // namespace alcorpus
