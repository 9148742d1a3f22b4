#include "alcorpus/whitening.hpp"

#include <algorithm>
#include <cmath>

#include "alcorpus/errors.hpp"
#include "json.hpp"

namespace alcorpus {

std::size_t WhiteningModel::rank() const {
  const double tol = singular_tolerance();
  std::size_t r = 0;
  while (r < eigvals.size() && eigvals[r] > tol) ++r;
  return r;
}

double WhiteningModel::singular_tolerance() const {
  return eigvals.empty() ? 0.0 : 1e-12 * eigvals.front();
}

WhiteningModel fit_whitening(std::span<const double> rows, std::size_t dim) {
  if (dim == 0 || rows.size() % dim != 0) throw ValidationError("fit_whitening: ragged rows");
  const std::size_t n = rows.size() / dim;
  if (n < 2) throw ValidationError("fit_whitening: need at least 2 points, got " + std::to_string(n));

  WhiteningModel model;
  model.mean.assign(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) model.mean[j] += rows[i * dim + j];
  for (double& m : model.mean) m /= static_cast<double>(n);

  Matrix cov(dim, dim);
  std::vector<double> centered(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) centered[j] = rows[i * dim + j] - model.mean[j];
    for (std::size_t a = 0; a < dim; ++a)
      for (std::size_t b = a; b < dim; ++b) cov(a, b) += centered[a] * centered[b];
  }
  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = a; b < dim; ++b) {
      cov(a, b) /= static_cast<double>(n);
      cov(b, a) = cov(a, b);
    }

  auto eig = symmetric_eigen(cov);
  for (double& v : eig.values) v = std::max(v, 0.0);
  model.eigvals = std::move(eig.values);
  model.eigvecs = std::move(eig.vectors);
  return model;
}

std::size_t choose_dprime(std::span<const double> eigvals, double energy) {
  if (!(energy > 0.0 && energy <= 1.0)) throw ValidationError("choose_dprime: energy must be in (0, 1]");
  double total = 0.0;
  for (std::size_t i = 0; i < eigvals.size(); ++i) {
    if (eigvals[i] < 0.0) throw ValidationError("choose_dprime: negative eigenvalue");
    if (i > 0 && eigvals[i] > eigvals[i - 1]) throw ValidationError("choose_dprime: eigenvalues not descending");
    total += eigvals[i];
  }
  if (!(total > 0.0)) throw ValidationError("choose_dprime: spectrum is all zero");
  double cumulative = 0.0;
  for (std::size_t m = 0; m < eigvals.size(); ++m) {
    cumulative += eigvals[m];
    if (cumulative / total > energy) return m + 1;
  }
  // energy == 1 can only be reached with equality; every direction is needed.
  return eigvals.size();
}

WhiteningModel with_dprime(WhiteningModel model, std::size_t d_prime) {
  if (d_prime < 1 || d_prime > model.dim())
    throw ValidationError("d_prime must lie in [1, " + std::to_string(model.dim()) + "]");
  model.d_prime = d_prime;
  return model;
}

Latent whiten(const WhiteningModel& model, std::span<const double> x) {
  const std::size_t d = model.dim();
  if (model.d_prime == 0) throw ValidationError("whiten: d_prime is not set");
  if (x.size() != d) throw ValidationError("whiten: expected dimension " + std::to_string(d));
  const std::size_t rank = model.rank();
  if (model.d_prime > rank)
    throw NumericalError("whiten: eigenvalue " + std::to_string(rank + 1) +
                         " is below the singularity tolerance but lies inside d_prime");
  std::vector<double> centered(d);
  for (std::size_t j = 0; j < d; ++j) centered[j] = x[j] - model.mean[j];
  Latent out;
  out.y.resize(model.d_prime);
  out.z.resize(rank - model.d_prime);
  for (std::size_t i = 0; i < rank; ++i) {
    double proj = 0.0;
    for (std::size_t j = 0; j < d; ++j) proj += model.eigvecs(j, i) * centered[j];
    const double w = proj / std::sqrt(model.eigvals[i]);
    if (i < model.d_prime)
      out.y[i] = w;
    else
      out.z[i - model.d_prime] = w;
  }
  return out;
}

std::vector<double> unwhiten(const WhiteningModel& model, std::span<const double> y,
                             std::span<const double> z) {
  if (model.d_prime == 0) throw ValidationError("unwhiten: d_prime is not set");
  if (y.size() != model.d_prime)
    throw ValidationError("unwhiten: y has dimension " + std::to_string(y.size()) + ", expected " +
                          std::to_string(model.d_prime));
  if (z.size() != model.z_dim())
    throw ValidationError("unwhiten: z has dimension " + std::to_string(z.size()) + ", expected " +
                          std::to_string(model.z_dim()));
  const std::size_t d = model.dim();
  std::vector<double> x = model.mean;
  for (std::size_t i = 0; i < model.d_prime + z.size(); ++i) {
    const double coeff = (i < model.d_prime ? y[i] : z[i - model.d_prime]) * std::sqrt(model.eigvals[i]);
    for (std::size_t j = 0; j < d; ++j) x[j] += coeff * model.eigvecs(j, i);
  }
  return x;
}

std::vector<double> whiten_principal(const WhiteningModel& model, std::span<const double> rows) {
  const std::size_t d = model.dim();
  if (rows.size() % d != 0) throw ValidationError("whiten_principal: ragged rows");
  std::vector<double> out;
  out.reserve(rows.size() / d * model.d_prime);
  for (std::size_t i = 0; i < rows.size() / d; ++i) {
    auto latent = whiten(model, rows.subspan(i * d, d));
    out.insert(out.end(), latent.y.begin(), latent.y.end());
  }
  return out;
}

std::string WhiteningModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "whitening/1";
  j["dim"] = dim();
  j["d_prime"] = d_prime;
  j["mean"] = mean;
  j["eigvals"] = eigvals;
  auto& rows = j["eigvecs"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < eigvecs.rows(); ++r)
    rows.push_back(std::vector<double>(eigvecs.row(r).begin(), eigvecs.row(r).end()));
  return j.dump();
}

WhiteningModel WhiteningModel::from_json(const std::string& json) {
  try {
    const auto j = nlohmann::json::parse(json);
    if (j.at("format").get<std::string>() != "whitening/1")
      throw ValidationError("unsupported whitening model format");
    WhiteningModel m;
    m.mean = j.at("mean").get<std::vector<double>>();
    m.eigvals = j.at("eigvals").get<std::vector<double>>();
    m.d_prime = j.at("d_prime").get<std::size_t>();
    const std::size_t d = m.mean.size();
    const auto& rows = j.at("eigvecs");
    if (m.eigvals.size() != d || rows.size() != d)
      throw ValidationError("whitening model has inconsistent dimensions");
    m.eigvecs = Matrix(d, d);
    for (std::size_t r = 0; r < d; ++r) {
      const auto row = rows[r].get<std::vector<double>>();
      if (row.size() != d) throw ValidationError("whitening model has inconsistent dimensions");
      std::copy(row.begin(), row.end(), m.eigvecs.row(r).begin());
    }
    if (m.d_prime > d) throw ValidationError("whitening model d_prime exceeds dimension");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad whitening model: ") + e.what(), 0);
  }
}

}  // namespace alcorpus
