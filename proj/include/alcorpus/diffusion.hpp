#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "alcorpus/embedding.hpp"
#include "alcorpus/random.hpp"
#include "alcorpus/whitening.hpp"

namespace alcorpus {

/// Linear beta schedule with precomputed alpha and cumulative alpha_bar.
/// Vectors are indexed by t - 1 for t = 1..T.
struct NoiseSchedule {
  int steps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
};

/// beta_t = beta_start + (t-1)/(T-1) * (beta_end - beta_start).
NoiseSchedule make_schedule(int steps, double beta_start, double beta_end);

/// Interleaved sin/cos of t at frequencies 10000^(-i/(dim/2)); dim must be even.
std::vector<double> time_embedding(int t, std::size_t dim);

/// sqrt(alpha_bar_t) y0 + sqrt(1 - alpha_bar_t) eps.
std::vector<double> forward_noise(const NoiseSchedule& schedule, std::span<const double> y0, int t,
                                  std::span<const double> eps);

/// Epsilon predictor: [y_t ; emb(t)] -> Linear -> ReLU -> Linear -> ReLU -> Linear -> R^data_dim.
class EpsilonNet {
 public:
  struct Shape {
    std::size_t data_dim = 28;
    std::size_t time_dim = 16;
    std::size_t hidden = 56;

    std::size_t input_dim() const { return data_dim + time_dim; }
    std::size_t parameter_count() const;
    friend bool operator==(const Shape&, const Shape&) = default;
  };

  /// Per-item activations kept for the backward pass.
  struct Activations {
    std::vector<double> input, pre1, act1, pre2, act2, output;
  };

  /// All parameters zero.
  explicit EpsilonNet(Shape shape);
  /// PyTorch-style default init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static EpsilonNet initialized(Shape shape, Rng& rng);

  const Shape& shape() const { return shape_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  /// Prediction for y_t at step t.
  std::vector<double> predict(std::span<const double> y_t, int t) const;
  void forward(std::span<const double> input, Activations& acts) const;
  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
  void backward(const Activations& acts, std::span<const double> output_grad,
                std::span<double> grad) const;

  std::string to_json() const;
  static EpsilonNet from_json(const std::string& json);

 private:
  struct Offsets {
    std::size_t w1, b1, w2, b2, w3, b3;
  };
  Offsets offsets() const;

  Shape shape_;
  std::vector<double> params_;
};

/// One (t, eps) draw for a training item.
struct NoiseDraw {
  int t = 1;
  std::vector<double> eps;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Mean over the batch of ||eps - net([forward_noise(y0, t, eps); emb(t)])||^2
/// and its exact gradient, for caller-supplied draws.
LossAndGradient loss_and_gradient(const EpsilonNet& net, const NoiseSchedule& schedule,
                                  std::span<const double> batch, std::span<const NoiseDraw> draws);

/// Draws t uniform on [1, T] and eps ~ N(0, I) per item from rng.
LossAndGradient loss_and_gradient(const EpsilonNet& net, const NoiseSchedule& schedule,
                                  std::span<const double> batch, Rng& rng);

std::vector<NoiseDraw> draw_noise(const NoiseSchedule& schedule, std::size_t items,
                                  std::size_t dim, Rng& rng);

struct TrainConfig {
  int epochs = 2000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int patience = 100;             // epochs without validation improvement; 0 disables
  std::size_t validation_draws = 8;  // fixed (t, eps) draws per validation item
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLoss {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
};

struct TrainResult {
  EpsilonNet net;
  std::vector<EpochLoss> curve;
  int best_epoch = 0;
};

/// Adam on the epsilon-prediction loss. With a validation set the returned
/// net is the one with the lowest validation loss, and training stops after
/// `patience` epochs without improvement. Throws NumericalError on a
/// non-finite loss, naming the epoch.
TrainResult train(EpsilonNet net, const NoiseSchedule& schedule, std::span<const double> train_rows,
                  std::span<const double> val_rows, const TrainConfig& config);

/// Ancestral sampling from y_T ~ N(0, I) down to t = 1, with sigma_t^2 = beta_t
/// and no noise on the final step. Returns n x data_dim, row-major.
std::vector<double> sample(const EpsilonNet& net, const NoiseSchedule& schedule, std::size_t n,
                           Rng& rng);

/// y from the diffusion sampler, z ~ N(0, I), mapped back through the
/// whitening; ids are gen-<index>.
EmbeddingSet generate_speakers(const WhiteningModel& whitening, const EpsilonNet& net,
                               const NoiseSchedule& schedule, std::size_t n, Rng& rng);

/// Schedule + network in one versioned JSON document.
std::string diffusion_model_to_json(const EpsilonNet& net, const NoiseSchedule& schedule);
std::pair<EpsilonNet, NoiseSchedule> diffusion_model_from_json(const std::string& json);

/// CSV "epoch,train_loss,val_loss".
void save_loss_curve(const std::filesystem::path& path, std::span<const EpochLoss> curve,
                     std::span<const std::string> comments = {});

}  // namespace alcorpus
