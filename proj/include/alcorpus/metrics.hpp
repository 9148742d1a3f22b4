#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "alcorpus/linalg.hpp"
#include "alcorpus/random.hpp"

namespace alcorpus {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials, O(n^3)). Returns assignment[row] = column.
std::vector<std::size_t> solve_assignment(const Matrix& cost);

/// Exact Wasserstein-1 between two equal-size point sets under Euclidean
/// cost: (1/n) * min over perfect matchings of the summed distances.
/// a and b are n x dim, row-major.
double wasserstein1(std::span<const double> a, std::span<const double> b, std::size_t dim);

/// Smallest Euclidean distance between a point of a and a point of b.
double min_nn_distance(std::span<const double> a, std::span<const double> b, std::size_t dim);

struct RepeatedW1Stats {
  double mean = 0.0;
  double std = 0.0;  // population (1/runs)
  std::size_t runs = 0;
  std::vector<double> values;
};

/// Produces a point set of the requested size (rows) from its own stream.
using PointSampler = std::function<std::vector<double>(std::size_t n, Rng& rng)>;

/// W1 between `reference` and `runs` independently generated sets of the same
/// size. Run r draws from Rng(seed).derive(r).
RepeatedW1Stats repeated_w1(const PointSampler& generator, std::span<const double> reference,
                            std::size_t dim, std::size_t runs, std::uint64_t seed);

/// True when |a.mean - b.mean| exceeds twice the larger standard deviation.
bool separated_by_two_sigma(const RepeatedW1Stats& a, const RepeatedW1Stats& b);

/// Total edge length of the Euclidean minimum spanning tree (Prim, O(n^2)).
double mst_total_length(std::span<const double> points, std::size_t dim);

/// Fraction of scores strictly above the threshold.
double hq_ratio(std::span<const double> scores, double threshold);

/// counts[j] = #{s : s <= edges[j]}; edges strictly increasing.
std::vector<std::size_t> cumulative_histogram(std::span<const double> scores,
                                              std::span<const double> edges);

struct DistanceTriple {
  double d_rr = 0.0;
  double d_gg = 0.0;
  double d_rg = 0.0;
};

/// Reference values from the original large-scale experiment. They depend on
/// data that is not available here and are only printed next to local results.
inline constexpr DistanceTriple kReportedDistanceTriple{3.492, 270.187, 268.382};

/// d_RR = W1(real_a, real_b), d_GG = W1(gen_1, gen_2), d_RG = W1(real_a, gen_1).
DistanceTriple distance_triple(std::span<const double> real_a, std::span<const double> real_b,
                               std::span<const double> gen_1, std::span<const double> gen_2,
                               std::size_t dim);

/// Sample Pearson correlation. Throws NumericalError if either side has zero
/// variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

}  // namespace alcorpus
