#include "alcorpus/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "alcorpus/errors.hpp"
#include "alcorpus/kernels.hpp"
#include "json.hpp"

namespace alcorpus {
namespace {

constexpr double kCollapsedWeight = 1e-12;
constexpr int kMaxCollapses = 3;

struct Factored {
  std::vector<Matrix> lower;
  std::vector<double> log_norm;  // log weight - 0.5 (p log 2pi + log det)
};

Factored factor(const GmmModel& model) {
  const std::size_t p = model.dim();
  Factored f;
  for (std::size_t k = 0; k < model.components(); ++k) {
    f.lower.push_back(cholesky(model.covariances[k]));
    double log_det = 0.0;
    for (std::size_t i = 0; i < p; ++i) log_det += 2.0 * std::log(f.lower.back()(i, i));
    f.log_norm.push_back(std::log(model.weights[k]) -
                         0.5 * (static_cast<double>(p) * std::log(2.0 * std::numbers::pi) + log_det));
  }
  return f;
}

// Fills log_resp (N x M) with log(w_k N(x | k)) and returns the total log-likelihood.
double joint_log_densities(const GmmModel& model, const Factored& f, std::span<const double> rows,
                           std::vector<double>& log_resp) {
  const std::size_t p = model.dim();
  const std::size_t m = model.components();
  const std::size_t n = rows.size() / p;
  log_resp.resize(n * m);
  std::vector<double> diff(p);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t j = 0; j < p; ++j) diff[j] = rows[i * p + j] - model.means[k][j];
      forward_substitute(f.lower[k], diff);
      const double maha = kernels::dot(diff, diff);
      const double v = f.log_norm[k] - 0.5 * maha;
      log_resp[i * m + k] = v;
      best = std::max(best, v);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) sum += std::exp(log_resp[i * m + k] - best);
    const double lse = best + std::log(sum);
    for (std::size_t k = 0; k < m; ++k) log_resp[i * m + k] -= lse;
    total += lse;
  }
  return total;
}

Matrix global_covariance(std::span<const double> rows, std::size_t p, std::vector<double>& mean) {
  const std::size_t n = rows.size() / p;
  mean.assign(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) mean[j] += rows[i * p + j];
  for (double& v : mean) v /= static_cast<double>(n);
  Matrix cov(p, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b)
        cov(a, b) += (rows[i * p + a] - mean[a]) * (rows[i * p + b] - mean[b]);
  for (double& v : cov.data()) v /= static_cast<double>(n);
  return cov;
}

std::vector<std::vector<double>> kmeans_plus_plus(std::span<const double> rows, std::size_t p,
                                                  std::size_t m, Rng& rng) {
  const std::size_t n = rows.size() / p;
  std::vector<std::vector<double>> centers;
  const std::size_t first = static_cast<std::size_t>(rng.below(n));
  centers.emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(first * p),
                       rows.begin() + static_cast<std::ptrdiff_t>((first + 1) * p));
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (centers.size() < m) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], kernels::squared_distance(rows.subspan(i * p, p), centers.back()));
      total += nearest[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= nearest[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    centers.emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(pick * p),
                         rows.begin() + static_cast<std::ptrdiff_t>((pick + 1) * p));
  }
  return centers;
}

struct CollapsedComponent {};

GmmFit run_em(std::span<const double> rows, std::size_t p, const GmmFitOptions& options,
              const Matrix& global_cov, double reg, Rng& rng) {
  const std::size_t n = rows.size() / p;
  const std::size_t m = options.components;
  GmmFit fit;
  fit.regularization = reg;
  fit.model.weights.assign(m, 1.0 / static_cast<double>(m));
  fit.model.means = kmeans_plus_plus(rows, p, m, rng);
  Matrix start = global_cov;
  for (std::size_t j = 0; j < p; ++j) start(j, j) += reg;
  fit.model.covariances.assign(m, start);

  std::vector<double> log_resp;
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iter; ++iter) {
    joint_log_densities(fit.model, factor(fit.model), rows, log_resp);
    // M-step.
    for (std::size_t k = 0; k < m; ++k) {
      double nk = 0.0;
      std::vector<double> mean(p, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = std::exp(log_resp[i * m + k]);
        nk += r;
        kernels::axpy(r, rows.subspan(i * p, p), mean);
      }
      const double weight = nk / static_cast<double>(n);
      if (!(weight >= kCollapsedWeight)) throw CollapsedComponent{};
      for (double& v : mean) v /= nk;
      Matrix cov(p, p);
      std::vector<double> diff(p);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = std::exp(log_resp[i * m + k]);
        for (std::size_t j = 0; j < p; ++j) diff[j] = rows[i * p + j] - mean[j];
        for (std::size_t a = 0; a < p; ++a) {
          const double ra = r * diff[a];
          for (std::size_t b = a; b < p; ++b) cov(a, b) += ra * diff[b];
        }
      }
      for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a; b < p; ++b) {
          cov(a, b) /= nk;
          cov(b, a) = cov(a, b);
        }
        cov(a, a) += reg;
      }
      fit.model.weights[k] = weight;
      fit.model.means[k] = std::move(mean);
      fit.model.covariances[k] = std::move(cov);
    }
    const double ll = fit.model.mean_log_likelihood(rows);
    if (!std::isfinite(ll)) throw NumericalError("EM produced a non-finite likelihood");
    fit.log_likelihood_trace.push_back(ll);
    fit.iterations = iter + 1;
    if (ll - previous < options.tolerance) break;
    previous = ll;
  }
  return fit;
}

}  // namespace

double GmmModel::mean_log_likelihood(std::span<const double> rows) const {
  std::vector<double> scratch;
  return joint_log_densities(*this, factor(*this), rows, scratch) / static_cast<double>(rows.size() / dim());
}

std::vector<double> GmmModel::responsibilities(std::span<const double> rows) const {
  std::vector<double> log_resp;
  joint_log_densities(*this, factor(*this), rows, log_resp);
  for (double& v : log_resp) v = std::exp(v);
  return log_resp;
}

GmmFit fit_em(std::span<const double> rows, std::size_t dim, const GmmFitOptions& options) {
  if (dim == 0 || rows.size() % dim != 0) throw ValidationError("fit_em: ragged rows");
  const std::size_t n = rows.size() / dim;
  if (options.components == 0) throw ValidationError("fit_em: M must be positive");
  if (n < options.components)
    throw ValidationError("fit_em: " + std::to_string(n) + " points is fewer than M=" +
                          std::to_string(options.components));
  if (options.restarts < 1 || options.max_iter < 1) throw ValidationError("fit_em: restarts and max_iter must be >= 1");

  std::vector<double> mean;
  const Matrix global_cov = global_covariance(rows, dim, mean);
  double trace = 0.0;
  for (std::size_t j = 0; j < dim; ++j) trace += global_cov(j, j);
  // Floor keeps identical-point data factorable.
  const double reg = std::max(1e-6 * trace / static_cast<double>(dim), 1e-12);

  Rng rng(options.seed);
  GmmFit best;
  double best_ll = -std::numeric_limits<double>::infinity();
  int collapses = 0;
  for (int restart = 0; restart < options.restarts;) {
    try {
      GmmFit fit = run_em(rows, dim, options, global_cov, reg, rng);
      const double ll = fit.log_likelihood_trace.back();
      if (ll > best_ll) {
        best_ll = ll;
        best = std::move(fit);
      }
      ++restart;
    } catch (const CollapsedComponent&) {
      if (++collapses >= kMaxCollapses)
        throw NumericalError("fit_em: mixture component collapsed " + std::to_string(collapses) + " times");
    }
  }
  return best;
}

std::vector<double> gmm_sample(const GmmModel& model, std::size_t n, Rng& rng,
                               std::vector<std::size_t>& components) {
  const std::size_t p = model.dim();
  std::vector<Matrix> lower;
  for (const auto& c : model.covariances) lower.push_back(cholesky(c));
  std::vector<double> out(n * p);
  components.assign(n, 0);
  std::vector<double> xi(p);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    std::size_t k = 0;
    while (k + 1 < model.components() && u >= model.weights[k]) {
      u -= model.weights[k];
      ++k;
    }
    components[i] = k;
    rng.fill_normal(xi);
    for (std::size_t a = 0; a < p; ++a) {
      double v = model.means[k][a];
      for (std::size_t b = 0; b <= a; ++b) v += lower[k](a, b) * xi[b];
      out[i * p + a] = v;
    }
  }
  return out;
}

std::vector<double> gmm_sample(const GmmModel& model, std::size_t n, Rng& rng) {
  std::vector<std::size_t> components;
  return gmm_sample(model, n, rng, components);
}

std::string gmm_to_json(const GmmFit& fit, const std::string& space) {
  nlohmann::ordered_json j;
  j["format"] = "gmm/1";
  j["M"] = fit.model.components();
  j["dim"] = fit.model.dim();
  j["weights"] = fit.model.weights;
  j["means"] = fit.model.means;
  auto& covs = j["covariances"] = nlohmann::ordered_json::array();
  for (const auto& c : fit.model.covariances) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < c.rows(); ++r) rows.push_back(std::vector<double>(c.row(r).begin(), c.row(r).end()));
    covs.push_back(rows);
  }
  j["fit"] = {{"space", space},
              {"iterations", fit.iterations},
              {"regularization", fit.regularization},
              {"mean_log_likelihood", fit.log_likelihood_trace.empty() ? 0.0 : fit.log_likelihood_trace.back()}};
  return j.dump();
}

GmmModel gmm_from_json(const std::string& json) {
  try {
    const auto j = nlohmann::json::parse(json);
    if (j.at("format").get<std::string>() != "gmm/1") throw ValidationError("unsupported GMM format");
    GmmModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.means = j.at("means").get<std::vector<std::vector<double>>>();
    const std::size_t p = j.at("dim").get<std::size_t>();
    for (const auto& c : j.at("covariances")) {
      Matrix cov(p, p);
      for (std::size_t r = 0; r < p; ++r) {
        const auto row = c.at(r).get<std::vector<double>>();
        if (row.size() != p) throw ValidationError("GMM covariance has wrong shape");
        std::copy(row.begin(), row.end(), cov.row(r).begin());
      }
      m.covariances.push_back(std::move(cov));
    }
    if (m.means.size() != m.weights.size() || m.covariances.size() != m.weights.size())
      throw ValidationError("GMM component counts disagree");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad GMM file: ") + e.what(), 0);
  }
}

}  // namespace alcorpus
