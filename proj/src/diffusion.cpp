#include "alcorpus/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "alcorpus/errors.hpp"
#include "alcorpus/kernels.hpp"
#include "alcorpus/text.hpp"
#include "json.hpp"

namespace alcorpus {

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ValidationError("schedule needs T >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ValidationError("schedule needs 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.steps = steps;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.beta.resize(static_cast<std::size_t>(steps));
  s.alpha.resize(s.beta.size());
  s.alpha_bar.resize(s.beta.size());
  double product = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
    const double beta = t == steps && steps > 1 ? beta_end : beta_start + frac * (beta_end - beta_start);
    const auto i = static_cast<std::size_t>(t - 1);
    s.beta[i] = beta;
    s.alpha[i] = 1.0 - beta;
    product *= s.alpha[i];
    s.alpha_bar[i] = product;
  }
  return s;
}

std::vector<double> time_embedding(int t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw ValidationError("time embedding dimension must be even and positive");
  const std::size_t half = dim / 2;
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    const double angle = static_cast<double>(t) * freq;
    out[2 * i] = std::sin(angle);
    out[2 * i + 1] = std::cos(angle);
  }
  return out;
}

namespace {

void check_step(const NoiseSchedule& schedule, int t) {
  if (t < 1 || t > schedule.steps)
    throw ValidationError("diffusion step " + std::to_string(t) + " outside [1, " +
                          std::to_string(schedule.steps) + "]");
}

}  // namespace

std::vector<double> forward_noise(const NoiseSchedule& schedule, std::span<const double> y0, int t,
                                  std::span<const double> eps) {
  check_step(schedule, t);
  if (y0.size() != eps.size()) throw ValidationError("forward_noise: y0 and eps differ in dimension");
  const double ab = schedule.alpha_bar[static_cast<std::size_t>(t - 1)];
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  std::vector<double> out(y0.size());
  for (std::size_t i = 0; i < y0.size(); ++i) out[i] = signal * y0[i] + noise * eps[i];
  return out;
}

// EpsilonNet ----------------------------------------------------------------

std::size_t EpsilonNet::Shape::parameter_count() const {
  return hidden * input_dim() + hidden + hidden * hidden + hidden + data_dim * hidden + data_dim;
}

EpsilonNet::EpsilonNet(Shape shape) : shape_(shape) {
  if (shape_.data_dim == 0 || shape_.hidden == 0) throw ValidationError("network dimensions must be positive");
  if (shape_.time_dim == 0 || shape_.time_dim % 2 != 0)
    throw ValidationError("time embedding dimension must be even and positive");
  params_.assign(shape_.parameter_count(), 0.0);
}

EpsilonNet EpsilonNet::initialized(Shape shape, Rng& rng) {
  EpsilonNet net(shape);
  const auto o = net.offsets();
  auto fill = [&](std::size_t begin, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) net.params_[begin + i] = rng.uniform(-bound, bound);
  };
  const std::size_t in = shape.input_dim();
  const std::size_t h = shape.hidden;
  fill(o.w1, h * in, in);
  fill(o.b1, h, in);
  fill(o.w2, h * h, h);
  fill(o.b2, h, h);
  fill(o.w3, shape.data_dim * h, h);
  fill(o.b3, shape.data_dim, h);
  return net;
}

EpsilonNet::Offsets EpsilonNet::offsets() const {
  const std::size_t in = shape_.input_dim();
  const std::size_t h = shape_.hidden;
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + h * in;
  o.w2 = o.b1 + h;
  o.b2 = o.w2 + h * h;
  o.w3 = o.b2 + h;
  o.b3 = o.w3 + shape_.data_dim * h;
  return o;
}

void EpsilonNet::forward(std::span<const double> input, Activations& acts) const {
  const std::size_t in = shape_.input_dim();
  const std::size_t h = shape_.hidden;
  const std::size_t out = shape_.data_dim;
  if (input.size() != in)
    throw ValidationError("network input has dimension " + std::to_string(input.size()) +
                          ", expected " + std::to_string(in));
  const auto o = offsets();
  const auto& k = kernels::active();
  const double* p = params_.data();
  acts.input.assign(input.begin(), input.end());
  acts.pre1.resize(h);
  acts.act1.resize(h);
  acts.pre2.resize(h);
  acts.act2.resize(h);
  acts.output.resize(out);
  k.affine(p + o.w1, p + o.b1, acts.input.data(), h, in, acts.pre1.data());
  for (std::size_t i = 0; i < h; ++i) acts.act1[i] = std::max(acts.pre1[i], 0.0);
  k.affine(p + o.w2, p + o.b2, acts.act1.data(), h, h, acts.pre2.data());
  for (std::size_t i = 0; i < h; ++i) acts.act2[i] = std::max(acts.pre2[i], 0.0);
  k.affine(p + o.w3, p + o.b3, acts.act2.data(), out, h, acts.output.data());
}

void EpsilonNet::backward(const Activations& acts, std::span<const double> output_grad,
                          std::span<double> grad) const {
  const std::size_t in = shape_.input_dim();
  const std::size_t h = shape_.hidden;
  const std::size_t out = shape_.data_dim;
  if (output_grad.size() != out || grad.size() != params_.size())
    throw ValidationError("network backward: shape mismatch");
  const auto o = offsets();
  const auto& k = kernels::active();
  const double* p = params_.data();
  double* g = grad.data();

  for (std::size_t r = 0; r < out; ++r) {
    k.axpy(output_grad[r], acts.act2.data(), g + o.w3 + r * h, h);
    g[o.b3 + r] += output_grad[r];
  }
  std::vector<double> hidden2(h, 0.0);
  k.affine_transpose_accumulate(p + o.w3, output_grad.data(), out, h, hidden2.data());
  for (std::size_t i = 0; i < h; ++i)
    if (acts.pre2[i] <= 0.0) hidden2[i] = 0.0;

  for (std::size_t r = 0; r < h; ++r) {
    k.axpy(hidden2[r], acts.act1.data(), g + o.w2 + r * h, h);
    g[o.b2 + r] += hidden2[r];
  }
  std::vector<double> hidden1(h, 0.0);
  k.affine_transpose_accumulate(p + o.w2, hidden2.data(), h, h, hidden1.data());
  for (std::size_t i = 0; i < h; ++i)
    if (acts.pre1[i] <= 0.0) hidden1[i] = 0.0;

  for (std::size_t r = 0; r < h; ++r) {
    k.axpy(hidden1[r], acts.input.data(), g + o.w1 + r * in, in);
    g[o.b1 + r] += hidden1[r];
  }
}

std::vector<double> EpsilonNet::predict(std::span<const double> y_t, int t) const {
  if (y_t.size() != shape_.data_dim)
    throw ValidationError("network expects data dimension " + std::to_string(shape_.data_dim));
  std::vector<double> input(y_t.begin(), y_t.end());
  const auto emb = time_embedding(t, shape_.time_dim);
  input.insert(input.end(), emb.begin(), emb.end());
  Activations acts;
  forward(input, acts);
  return acts.output;
}

std::string EpsilonNet::to_json() const {
  nlohmann::ordered_json j;
  j["data_dim"] = shape_.data_dim;
  j["time_dim"] = shape_.time_dim;
  j["hidden"] = shape_.hidden;
  j["params"] = params_;
  return j.dump();
}

EpsilonNet EpsilonNet::from_json(const std::string& json) {
  try {
    const auto j = nlohmann::json::parse(json);
    Shape shape{j.at("data_dim").get<std::size_t>(), j.at("time_dim").get<std::size_t>(),
                j.at("hidden").get<std::size_t>()};
    EpsilonNet net(shape);
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != net.params_.size())
      throw ValidationError("network parameter count does not match its shape");
    net.params_ = std::move(params);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad network: ") + e.what(), 0);
  }
}

// Loss ----------------------------------------------------------------------

std::vector<NoiseDraw> draw_noise(const NoiseSchedule& schedule, std::size_t items, std::size_t dim,
                                  Rng& rng) {
  std::vector<NoiseDraw> draws(items);
  for (auto& d : draws) {
    d.t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.steps)));
    d.eps.resize(dim);
    rng.fill_normal(d.eps);
  }
  return draws;
}

LossAndGradient loss_and_gradient(const EpsilonNet& net, const NoiseSchedule& schedule,
                                  std::span<const double> batch, std::span<const NoiseDraw> draws) {
  const std::size_t dim = net.shape().data_dim;
  if (batch.empty()) throw ValidationError("loss_and_gradient: empty batch");
  if (batch.size() % dim != 0) throw ValidationError("loss_and_gradient: batch rows do not match the network");
  const std::size_t items = batch.size() / dim;
  if (draws.size() != items) throw ValidationError("loss_and_gradient: one noise draw per item required");

  LossAndGradient out;
  out.gradient.assign(net.parameters().size(), 0.0);
  EpsilonNet::Activations acts;
  std::vector<double> input(net.shape().input_dim());
  std::vector<double> output_grad(dim);
  const double inv_items = 1.0 / static_cast<double>(items);
  for (std::size_t i = 0; i < items; ++i) {
    const auto& draw = draws[i];
    if (draw.eps.size() != dim) throw ValidationError("loss_and_gradient: noise draw has wrong dimension");
    const auto noisy = forward_noise(schedule, batch.subspan(i * dim, dim), draw.t, draw.eps);
    const auto emb = time_embedding(draw.t, net.shape().time_dim);
    std::copy(noisy.begin(), noisy.end(), input.begin());
    std::copy(emb.begin(), emb.end(), input.begin() + static_cast<std::ptrdiff_t>(dim));
    net.forward(input, acts);
    double item_loss = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double diff = acts.output[c] - draw.eps[c];
      item_loss += diff * diff;
      output_grad[c] = 2.0 * diff * inv_items;
    }
    out.loss += item_loss * inv_items;
    net.backward(acts, output_grad, out.gradient);
  }
  return out;
}

LossAndGradient loss_and_gradient(const EpsilonNet& net, const NoiseSchedule& schedule,
                                  std::span<const double> batch, Rng& rng) {
  const std::size_t dim = net.shape().data_dim;
  if (batch.empty() || batch.size() % dim != 0)
    throw ValidationError("loss_and_gradient: batch rows do not match the network");
  const auto draws = draw_noise(schedule, batch.size() / dim, dim, rng);
  return loss_and_gradient(net, schedule, batch, draws);
}

// Training ------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be nonnegative");
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning_rate must be finite and nonnegative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ValidationError("Adam decay rates must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ValidationError("Adam epsilon must be positive");
  if (patience < 0) throw ValidationError("patience must be nonnegative");
  if (validation_draws == 0) throw ValidationError("validation_draws must be positive");
}

namespace {

double fixed_draw_loss(const EpsilonNet& net, const NoiseSchedule& schedule,
                       std::span<const double> rows, std::span<const NoiseDraw> draws,
                       std::size_t repeats) {
  const std::size_t dim = net.shape().data_dim;
  const std::size_t items = rows.size() / dim;
  EpsilonNet::Activations acts;
  std::vector<double> input(net.shape().input_dim());
  double total = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    for (std::size_t i = 0; i < items; ++i) {
      const auto& draw = draws[r * items + i];
      const auto noisy = forward_noise(schedule, rows.subspan(i * dim, dim), draw.t, draw.eps);
      const auto emb = time_embedding(draw.t, net.shape().time_dim);
      std::copy(noisy.begin(), noisy.end(), input.begin());
      std::copy(emb.begin(), emb.end(), input.begin() + static_cast<std::ptrdiff_t>(dim));
      net.forward(input, acts);
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = acts.output[c] - draw.eps[c];
        total += diff * diff;
      }
    }
  }
  return total / static_cast<double>(items * repeats);
}

}  // namespace

TrainResult train(EpsilonNet net, const NoiseSchedule& schedule, std::span<const double> train_rows,
                  std::span<const double> val_rows, const TrainConfig& config) {
  config.validate();
  const std::size_t dim = net.shape().data_dim;
  if (train_rows.empty()) throw ValidationError("train: empty dataset");
  if (train_rows.size() % dim != 0 || val_rows.size() % dim != 0)
    throw ValidationError("train: data dimension does not match the network");
  const std::size_t n = train_rows.size() / dim;

  Rng rng(config.seed);
  Rng val_rng = rng.derive(1);
  const std::size_t val_items = val_rows.size() / dim;
  const auto val_draws = draw_noise(schedule, val_items * config.validation_draws, dim, val_rng);

  const std::size_t p = net.parameters().size();
  std::vector<double> m(p, 0.0), v(p, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> batch;

  TrainResult result{net, {}, 0};
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        const auto row = train_rows.subspan(order[i] * dim, dim);
        batch.insert(batch.end(), row.begin(), row.end());
      }
      const auto lg = loss_and_gradient(net, schedule, batch, rng);
      if (!std::isfinite(lg.loss))
        throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += lg.loss * static_cast<double>(end - start);

      ++step;
      const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
      auto params = net.parameters();
      for (std::size_t i = 0; i < p; ++i) {
        const double g = lg.gradient[i];
        m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g;
        v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * g * g;
        params[i] -= config.learning_rate * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + config.adam_epsilon);
      }
    }
    EpochLoss record{epoch, epoch_loss / static_cast<double>(n), std::numeric_limits<double>::quiet_NaN()};
    if (!std::isfinite(record.train_loss))
      throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch));

    if (val_items > 0) {
      record.val_loss = fixed_draw_loss(net, schedule, val_rows, val_draws, config.validation_draws);
      if (!std::isfinite(record.val_loss))
        throw NumericalError("training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
      if (record.val_loss < best_val) {
        best_val = record.val_loss;
        result.net = net;
        result.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      result.net = net;
      result.best_epoch = epoch;
    }
    result.curve.push_back(record);
    if (val_items > 0 && config.patience > 0 && since_best >= config.patience) break;
  }
  return result;
}

// Sampling ------------------------------------------------------------------

std::vector<double> sample(const EpsilonNet& net, const NoiseSchedule& schedule, std::size_t n, Rng& rng) {
  const std::size_t dim = net.shape().data_dim;
  std::vector<double> out(n * dim);
  rng.fill_normal(out);
  EpsilonNet::Activations acts;
  std::vector<double> input(net.shape().input_dim());
  for (int t = schedule.steps; t >= 1; --t) {
    const auto i = static_cast<std::size_t>(t - 1);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha[i]);
    const double eps_coeff = schedule.beta[i] / std::sqrt(1.0 - schedule.alpha_bar[i]);
    const double sigma = t > 1 ? std::sqrt(schedule.beta[i]) : 0.0;
    const auto emb = time_embedding(t, net.shape().time_dim);
    std::copy(emb.begin(), emb.end(), input.begin() + static_cast<std::ptrdiff_t>(dim));
    for (std::size_t chain = 0; chain < n; ++chain) {
      double* y = out.data() + chain * dim;
      std::copy(y, y + dim, input.begin());
      net.forward(input, acts);
      for (std::size_t c = 0; c < dim; ++c) {
        double next = inv_sqrt_alpha * (y[c] - eps_coeff * acts.output[c]);
        if (t > 1) next += sigma * rng.normal();
        if (!std::isfinite(next))
          throw NumericalError("sampling produced a non-finite value at step " + std::to_string(t));
        y[c] = next;
      }
    }
  }
  return out;
}

EmbeddingSet generate_speakers(const WhiteningModel& whitening, const EpsilonNet& net,
                               const NoiseSchedule& schedule, std::size_t n, Rng& rng) {
  if (whitening.d_prime != net.shape().data_dim)
    throw ValidationError("generate_speakers: whitening d_prime " + std::to_string(whitening.d_prime) +
                          " does not match network dimension " + std::to_string(net.shape().data_dim));
  const auto ys = sample(net, schedule, n, rng);
  const std::size_t d_prime = whitening.d_prime;
  std::vector<double> z(whitening.z_dim());
  std::vector<Embedding> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng.fill_normal(z);
    items.push_back({"gen-" + std::to_string(i),
                     unwhiten(whitening, std::span<const double>(ys).subspan(i * d_prime, d_prime), z)});
  }
  return EmbeddingSet(whitening.dim(), std::move(items));
}

std::string diffusion_model_to_json(const EpsilonNet& net, const NoiseSchedule& schedule) {
  nlohmann::ordered_json j;
  j["format"] = "ddpm/1";
  j["schedule"] = {{"T", schedule.steps}, {"beta_start", schedule.beta_start}, {"beta_end", schedule.beta_end}};
  j["net"] = nlohmann::ordered_json::parse(net.to_json());
  return j.dump();
}

std::pair<EpsilonNet, NoiseSchedule> diffusion_model_from_json(const std::string& json) {
  try {
    const auto j = nlohmann::json::parse(json);
    if (j.at("format").get<std::string>() != "ddpm/1") throw ValidationError("unsupported diffusion model format");
    const auto& s = j.at("schedule");
    auto schedule = make_schedule(s.at("T").get<int>(), s.at("beta_start").get<double>(),
                                  s.at("beta_end").get<double>());
    return {EpsilonNet::from_json(j.at("net").dump()), std::move(schedule)};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad diffusion model: ") + e.what(), 0);
  }
}

void save_loss_curve(const std::filesystem::path& path, std::span<const EpochLoss> curve,
                     std::span<const std::string> comments) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "epoch,train_loss,val_loss\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << text::format_double(e.train_loss) << ','
        << (std::isnan(e.val_loss) ? std::string() : text::format_double(e.val_loss)) << '\n';
  }
}

}  // namespace alcorpus
