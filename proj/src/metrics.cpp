#include "alcorpus/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "alcorpus/errors.hpp"
#include "alcorpus/kernels.hpp"

namespace alcorpus {

std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw ValidationError("solve_assignment: cost matrix must be square");
  if (n == 0) return {};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), min_slack(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t row0 = match[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double reduced = cost(row0 - 1, col - 1) - u[row0] - v[col];
        if (reduced < min_slack[col]) {
          min_slack[col] = reduced;
          way[col] = col0;
        }
        if (min_slack[col] < delta) {
          delta = min_slack[col];
          col1 = col;
        }
      }
      for (std::size_t col = 0; col <= n; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          min_slack[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t col = 1; col <= n; ++col) assignment[match[col] - 1] = col - 1;
  return assignment;
}

namespace {

std::size_t row_count(std::span<const double> rows, std::size_t dim, const char* what) {
  if (dim == 0 || rows.size() % dim != 0) throw ValidationError(std::string(what) + ": ragged point set");
  return rows.size() / dim;
}

}  // namespace

double wasserstein1(std::span<const double> a, std::span<const double> b, std::size_t dim) {
  const std::size_t n = row_count(a, dim, "wasserstein1");
  if (row_count(b, dim, "wasserstein1") != n)
    throw ValidationError("wasserstein1: point sets differ in size");
  if (n == 0) throw ValidationError("wasserstein1: empty point sets");
  Matrix cost(n, n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    kernels::squared_distances(a.subspan(i * dim, dim), b, sq);
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = std::sqrt(sq[j]);
  }
  const auto assignment = solve_assignment(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost(i, assignment[i]);
  return total / static_cast<double>(n);
}

double min_nn_distance(std::span<const double> a, std::span<const double> b, std::size_t dim) {
  const std::size_t na = row_count(a, dim, "min_nn_distance");
  const std::size_t nb = row_count(b, dim, "min_nn_distance");
  if (na == 0 || nb == 0) throw ValidationError("min_nn_distance: empty point set");
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> sq(nb);
  for (std::size_t i = 0; i < na; ++i) {
    kernels::squared_distances(a.subspan(i * dim, dim), b, sq);
    best = std::min(best, *std::min_element(sq.begin(), sq.end()));
  }
  return std::sqrt(best);
}

RepeatedW1Stats repeated_w1(const PointSampler& generator, std::span<const double> reference,
                            std::size_t dim, std::size_t runs, std::uint64_t seed) {
  if (runs < 2) throw ValidationError("repeated_w1: runs must be >= 2");
  const std::size_t n = row_count(reference, dim, "repeated_w1");
  const Rng root(seed);
  RepeatedW1Stats stats;
  stats.runs = runs;
  for (std::size_t r = 0; r < runs; ++r) {
    Rng rng = root.derive(r);
    const auto generated = generator(n, rng);
    stats.values.push_back(wasserstein1(generated, reference, dim));
  }
  double sum = 0.0;
  for (double v : stats.values) sum += v;
  stats.mean = sum / static_cast<double>(runs);
  double var = 0.0;
  for (double v : stats.values) var += (v - stats.mean) * (v - stats.mean);
  stats.std = std::sqrt(var / static_cast<double>(runs));
  return stats;
}

bool separated_by_two_sigma(const RepeatedW1Stats& a, const RepeatedW1Stats& b) {
  return std::abs(a.mean - b.mean) > 2.0 * std::max(a.std, b.std);
}

double mst_total_length(std::span<const double> points, std::size_t dim) {
  const std::size_t n = row_count(points, dim, "mst_total_length");
  if (n == 0) throw ValidationError("mst_total_length: empty point set");
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<char> in_tree(n, 0);
  std::vector<double> sq(n);
  std::size_t current = 0;
  in_tree[0] = 1;
  double total = 0.0;
  for (std::size_t added = 1; added < n; ++added) {
    kernels::squared_distances(points.subspan(current * dim, dim), points, sq);
    std::size_t next = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      best[j] = std::min(best[j], sq[j]);
      if (next == n || best[j] < best[next]) next = j;
    }
    total += std::sqrt(best[next]);
    in_tree[next] = 1;
    current = next;
  }
  return total;
}

double hq_ratio(std::span<const double> scores, double threshold) {
  if (scores.empty()) throw ValidationError("hq_ratio: no scores");
  const auto above = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
  return static_cast<double>(above) / static_cast<double>(scores.size());
}

std::vector<std::size_t> cumulative_histogram(std::span<const double> scores, std::span<const double> edges) {
  for (std::size_t j = 1; j < edges.size(); ++j)
    if (!(edges[j] > edges[j - 1])) throw ValidationError("cumulative_histogram: edges must be strictly increasing");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> counts;
  counts.reserve(edges.size());
  for (double e : edges)
    counts.push_back(static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), e) - sorted.begin()));
  return counts;
}

DistanceTriple distance_triple(std::span<const double> real_a, std::span<const double> real_b,
                               std::span<const double> gen_1, std::span<const double> gen_2, std::size_t dim) {
  const std::size_t n = row_count(real_a, dim, "distance_triple");
  if (row_count(real_b, dim, "distance_triple") != n || row_count(gen_1, dim, "distance_triple") != n ||
      row_count(gen_2, dim, "distance_triple") != n)
    throw ValidationError("distance_triple: all four sets must have the same size");
  return {wasserstein1(real_a, real_b, dim), wasserstein1(gen_1, gen_2, dim), wasserstein1(real_a, gen_1, dim)};
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("pearson: sequences differ in length");
  if (xs.size() < 2) throw ValidationError("pearson: need at least two pairs");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericalError("pearson: correlation undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace alcorpus
