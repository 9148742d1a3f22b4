#include <cmath>
#include <limits>

#include "alcorpus/diffusion.hpp"
#include "alcorpus/errors.hpp"
#include "alcorpus/metrics.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace alcorpus;

namespace {

const NoiseSchedule kPaper = make_schedule(200, 1e-4, 0.05);

double central_difference(const EpsilonNet& net, const NoiseSchedule& s, std::span<const double> batch,
                          std::span<const NoiseDraw> draws, std::size_t i) {
  EpsilonNet plus = net, minus = net;
  const double h = 1e-5 * std::max(1.0, std::abs(net.parameters()[i]));
  plus.parameters()[i] += h;
  minus.parameters()[i] -= h;
  return (loss_and_gradient(plus, s, batch, draws).loss - loss_and_gradient(minus, s, batch, draws).loss) /
         (2 * h);
}

}  // namespace

TEST_CASE("schedule examples") {
  CHECK(kPaper.beta.front() == 1e-4);
  CHECK(kPaper.beta.back() == 0.05);
  CHECK(kPaper.alpha_bar.front() == doctest::Approx(0.9999).epsilon(1e-15));
  for (std::size_t i = 1; i < 200; ++i) {
    CHECK(kPaper.beta[i] > kPaper.beta[i - 1]);
    CHECK(kPaper.alpha_bar[i] < kPaper.alpha_bar[i - 1]);
  }
  CHECK(kPaper.beta[99] == doctest::Approx(1e-4 + 99.0 / 199 * (0.05 - 1e-4)));
  CHECK(kPaper.alpha_bar.back() < kPaper.alpha_bar.front());
  CHECK(kPaper.alpha_bar.front() < 1.0);

  const auto one = make_schedule(1, 0.02, 0.3);
  CHECK(one.beta == std::vector<double>{0.02});
  CHECK_THROWS_AS(make_schedule(0, 0.1, 0.2), ValidationError);
  CHECK_THROWS_AS(make_schedule(10, 0.3, 0.2), ValidationError);
  CHECK_THROWS_AS(make_schedule(10, 0.1, 1.0), ValidationError);
}

TEST_CASE("time embedding examples") {
  double min_gap = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> all;
  for (int t = 1; t <= 200; ++t) {
    const auto e = time_embedding(t, 16);
    REQUIRE(e.size() == 16);
    for (double v : e) CHECK(std::abs(v) <= 1.0);
    CHECK(e == time_embedding(t, 16));
    all.push_back(e);
  }
  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t b = a + 1; b < all.size(); ++b) {
      double d = 0;
      for (std::size_t i = 0; i < 16; ++i) d += (all[a][i] - all[b][i]) * (all[a][i] - all[b][i]);
      min_gap = std::min(min_gap, std::sqrt(d));
    }
  CHECK(min_gap > 0);
  CHECK(time_embedding(3, 2) == std::vector<double>{std::sin(3.0), std::cos(3.0)});
  CHECK_THROWS_AS(time_embedding(1, 15), ValidationError);
}

TEST_CASE("forward noise examples") {
  const std::vector<double> y0 = {1.5, -2.0};
  const auto clean = forward_noise(kPaper, y0, 50, std::vector<double>{0, 0});
  CHECK(clean[0] == doctest::Approx(std::sqrt(kPaper.alpha_bar[49]) * 1.5));

  const auto late = forward_noise(make_schedule(2000, 1e-3, 0.2), y0, 2000, std::vector<double>{0.3, 0.7});
  CHECK(late[0] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(late[1] == doctest::Approx(0.7).epsilon(1e-6));

  Rng rng(1);
  for (int t : {1, 20, 100, 200}) {
    double sum = 0, sq = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const double v = forward_noise(kPaper, std::vector<double>{0.0}, t, std::vector<double>{rng.normal()})[0];
      sum += v;
      sq += v * v;
    }
    const double var = sq / n - (sum / n) * (sum / n);
    CHECK(std::abs(var / (1 - kPaper.alpha_bar[t - 1]) - 1) < 0.05);
  }
  CHECK_THROWS_AS(forward_noise(kPaper, y0, 0, y0), ValidationError);
  CHECK_THROWS_AS(forward_noise(kPaper, y0, 201, y0), ValidationError);
}

TEST_CASE("forward process at T turns bounded data into standard normal") {
  Rng rng(2);
  const int n = 10000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> y0 = {rng.uniform(-3, 3)};
    const double v = forward_noise(kPaper, y0, 200, std::vector<double>{rng.normal()})[0];
    sum += v;
    sq += v * v;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - (sum / n) * (sum / n) - 1) < 0.05);
}

TEST_CASE("zero network loss estimates the data dimension") {
  const EpsilonNet zero({4, 16, 56});
  const auto batch = oracle::gaussian_points(5000, 4, 3);
  Rng rng(4);
  const auto lg = loss_and_gradient(zero, kPaper, batch, rng);
  // per item ||eps||^2 ~ chi-square(4): sd 2.83, so 5 sd of the mean is 0.2
  CHECK(std::abs(lg.loss - 4.0) < 0.2);
}

TEST_CASE("analytic gradient matches central differences on every layer") {
  Rng rng(5);
  const EpsilonNet net = EpsilonNet::initialized({3, 4, 6}, rng);
  const auto batch = oracle::gaussian_points(5, 3, 6);
  const auto draws = draw_noise(kPaper, 5, 3, rng);
  const auto lg = loss_and_gradient(net, kPaper, batch, draws);
  double worst = 0;
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    const double numeric = central_difference(net, kPaper, batch, draws, i);
    const double scale = std::max({std::abs(numeric), std::abs(lg.gradient[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - lg.gradient[i]) / scale);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("duplicate batch items contribute identically") {
  Rng rng(7);
  const EpsilonNet net = EpsilonNet::initialized({2, 4, 8}, rng);
  const std::vector<double> row = {0.4, -1.1};
  std::vector<NoiseDraw> draws = draw_noise(kPaper, 1, 2, rng);
  const auto single = loss_and_gradient(net, kPaper, row, draws);
  std::vector<double> twice = row;
  twice.insert(twice.end(), row.begin(), row.end());
  draws.push_back(draws.front());
  const auto doubled = loss_and_gradient(net, kPaper, twice, draws);
  CHECK(doubled.loss == doctest::Approx(single.loss).epsilon(1e-14));
  for (std::size_t i = 0; i < single.gradient.size(); ++i)
    CHECK(doubled.gradient[i] == doctest::Approx(single.gradient[i]).epsilon(1e-12));
  CHECK_THROWS_AS(loss_and_gradient(net, kPaper, std::vector<double>{}, rng), ValidationError);
  CHECK_THROWS_AS(net.predict(std::vector<double>{1, 2, 3}, 1), ValidationError);
}

TEST_CASE("zero network sampler follows the closed-form variance recursion") {
  const auto s = make_schedule(50, 1e-3, 0.03);
  double v = 1.0;
  for (int t = s.steps; t >= 1; --t) {
    const double a = s.alpha[t - 1];
    v = v / a + (t > 1 ? s.beta[t - 1] : 0.0);
  }
  const EpsilonNet zero({2, 4, 4});
  Rng rng(8);
  const auto y = sample(zero, s, 10000, rng);
  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0, sq = 0;
    for (std::size_t i = 0; i < 10000; ++i) sum += y[i * 2 + c], sq += y[i * 2 + c] * y[i * 2 + c];
    const double mean = sum / 10000;
    CHECK(std::abs(mean) < 5 * std::sqrt(v / 10000));
    CHECK(std::abs((sq / 10000 - mean * mean) / v - 1) < 0.05);
  }
  CHECK(sample(zero, s, 0, rng).empty());
  Rng r1(9), r2(9);
  CHECK(sample(zero, s, 20, r1) == sample(zero, s, 20, r2));
}

TEST_CASE("training basics") {
  const auto s = make_schedule(20, 1e-3, 0.2);
  Rng rng(10);
  const EpsilonNet init = EpsilonNet::initialized({2, 4, 8}, rng);
  const auto data = oracle::gaussian_points(100, 2, 11);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.learning_rate = 0;
  cfg.seed = 12;
  const auto frozen = train(init, s, data, {}, cfg);
  CHECK(std::vector<double>(frozen.net.parameters().begin(), frozen.net.parameters().end()) ==
        std::vector<double>(init.parameters().begin(), init.parameters().end()));
  CHECK(frozen.curve.size() == 3);

  cfg.learning_rate = 1e-3;
  const auto a = train(init, s, data, std::span(data).first(40), cfg);
  const auto b = train(init, s, data, std::span(data).first(40), cfg);
  CHECK(std::vector<double>(a.net.parameters().begin(), a.net.parameters().end()) ==
        std::vector<double>(b.net.parameters().begin(), b.net.parameters().end()));
  for (const auto& e : a.curve) CHECK(std::isfinite(e.val_loss));

  const std::vector<double> huge = {1e300, -1e300, 1e300, 1e300};
  try {
    train(init, s, huge, {}, cfg);
    FAIL("expected divergence");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("a net trained on standard normal data samples standard normal data") {
  const auto s = make_schedule(200, 1e-4, 0.05);
  Rng rng(13);
  const auto data = oracle::gaussian_points(2000, 2, 14);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 15;
  const auto trained = train(EpsilonNet::initialized({2, 16, 32}, rng), s, data, {}, cfg);
  Rng srng(16);
  const auto gen = sample(trained.net, s, 300, srng);
  const auto fresh = oracle::gaussian_points(300, 2, 17);
  const auto other = oracle::gaussian_points(300, 2, 18);
  const double w_gen = wasserstein1(gen, fresh, 2);
  const double w_ref = wasserstein1(other, fresh, 2);
  MESSAGE("W1 generated/fresh " << w_gen << " vs normal/normal " << w_ref);
  CHECK(w_gen < 1.5 * w_ref);
}

TEST_CASE("generated speakers") {
  const auto x = oracle::gaussian_points(500, 5, 19, 2.0);
  const auto wm = with_dprime(fit_whitening(x, 5), 2);
  const auto s = make_schedule(10, 1e-3, 0.1);
  Rng rng(20);
  const EpsilonNet net = EpsilonNet::initialized({2, 4, 8}, rng);

  const auto one = generate_speakers(wm, net, s, 1, rng);
  REQUIRE(one.size() == 1);
  CHECK(one.dim() == 5);
  CHECK(one[0].speaker_id == "gen-0");
  for (double v : one[0].vector) CHECK(std::isfinite(v));

  const std::size_t n = 10000;
  const auto many = generate_speakers(wm, net, s, n, rng);
  std::vector<std::vector<double>> z(wm.z_dim());
  for (const auto& e : many.items()) {
    const auto l = whiten(wm, e.vector);
    for (std::size_t c = 0; c < z.size(); ++c) z[c].push_back(l.z[c]);
  }
  REQUIRE(z.size() == 3);
  for (auto& col : z) CHECK(oracle::ks_standard_normal(col) < 1.628 / std::sqrt(static_cast<double>(n)));

  EpsilonNet wrong({3, 4, 8});
  CHECK_THROWS_AS(generate_speakers(wm, wrong, s, 1, rng), ValidationError);
}

TEST_CASE("diffusion model JSON round trip") {
  Rng rng(21);
  const EpsilonNet net = EpsilonNet::initialized({3, 4, 5}, rng);
  const auto [back, sched] = diffusion_model_from_json(diffusion_model_to_json(net, kPaper));
  CHECK(back.shape() == net.shape());
  CHECK(std::vector<double>(back.parameters().begin(), back.parameters().end()) ==
        std::vector<double>(net.parameters().begin(), net.parameters().end()));
  CHECK(sched.beta == kPaper.beta);
  CHECK(sched.alpha_bar == kPaper.alpha_bar);
}
