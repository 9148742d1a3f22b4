#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alcorpus/diffusion.hpp"
#include "alcorpus/gmm.hpp"
#include "alcorpus/metrics.hpp"
#include "alcorpus/planner.hpp"
#include "alcorpus/prescreen.hpp"
#include "alcorpus/quality.hpp"
#include "alcorpus/selector.hpp"
#include "alcorpus/whitening.hpp"
#include "alcorpus/world.hpp"

namespace alcorpus {

struct RunConfig {
  std::string name = "default";
  std::uint64_t seed = 1;  // master seed; world.seed is overwritten with it

  WorldConfig world;
  std::vector<double> ratios{0.1, 0.9};
  ScreeningThresholds screening{0.5, 0.5};
  std::size_t estimator_k = 5;

  double energy = 0.99;
  std::vector<double> split{0.8, 0.1, 0.1};  // train / validation / test
  int diffusion_steps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.05;
  std::size_t time_dim = 16;
  std::size_t hidden = 56;
  TrainConfig train{.epochs = 400};
  std::size_t gmm_max_components = 10;
  GmmFitOptions gmm;  // components and seed are set per fit
  std::string gmm_space = "latent";  // "latent" (whitened y) or "x" (original embeddings)

  std::size_t w1_runs = 30;
  std::size_t query_points = 1000;
  double tail_margin = 1.5;
  double histogram_step = 0.05;

  void validate() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& json);
  /// FNV-1a of the canonical JSON, 16 hex digits.
  std::string hash() const;

  /// Seeds for the individual stages, all derived from `seed`.
  std::uint64_t stage_seed(std::uint64_t stage) const;
  std::vector<double> histogram_edges() const;
};

enum SeedStage : std::uint64_t {
  kPlanSeed = 1,
  kSplitSeed,
  kDiffusionSeed,
  kGmmSeed,
  kW1Seed,
  kTripleSeed,
  kSampleSeed,
};

/// The world with the run's seed applied.
WorldConfig world_config_for(const RunConfig& cfg);

// Selection ------------------------------------------------------------------

/// Everything the selector is allowed to see. Built from a World, but holds no
/// ground-truth synthesis quality.
struct SelectionInputs {
  std::vector<DataSample> pool;
  std::vector<double> data_quality;  // observable per-sample quality labels
  std::vector<QualityScore> reference_scores;
  ProxyParams proxy;
};

SelectionInputs selection_inputs(const World& world);

struct SelectionOutcome {
  QualityThreshold threshold{QualityScore(QualityScore::kMin)};
  SourcePartition partition;
  ScreeningResult screening;
  std::vector<std::vector<DataSample>> segments;  // screened D_1..D_K
  KnnQualityEstimator subset_estimator;           // fit on screened D_1
  KnnQualityEstimator full_estimator;             // fit on everything screened
  LoopResult ours;
  Corpus initial;
  Corpus baseline;
  Corpus unselected;
};

/// Screened samples grouped by partition segment, in pool order.
std::vector<std::vector<DataSample>> segment_samples(const SourcePartition& partition,
                                                     std::span<const DataSample> kept);

/// Distinct source ids in pool order.
std::vector<std::string> pool_sources(std::span<const DataSample> pool);

SelectionOutcome run_selection(const SelectionInputs& inputs, const RunConfig& cfg);

/// Estimator on the labelled samples whose ids are in `samples`.
KnnQualityEstimator fit_on(const SelectionInputs& inputs, std::span<const DataSample> samples,
                           std::size_t k);

// Evaluation -----------------------------------------------------------------

struct MethodEvaluation {
  std::string method;
  std::size_t corpus_size = 0;
  std::vector<double> scores;  // ground-truth synthesis quality per world video
  std::size_t hq_speakers = 0;
  double hq_ratio = 0.0;
  double mst_w = 0.0;
  double tail_fraction = 0.0;  // share of speakers above theta + tail_margin
  std::vector<std::size_t> cumulative;
};

MethodEvaluation evaluate_corpus(const World& world, const Corpus& corpus, double theta,
                                 const RunConfig& cfg);

struct EstimatorCorrelation {
  std::size_t query_points = 0;
  std::size_t subset_size = 0;
  std::size_t full_size = 0;
  double pearson = 0.0;
  std::vector<double> subset_predictions;
  std::vector<double> full_predictions;
};

/// Predictions of both estimators on fresh query speakers from the world's
/// population.
EstimatorCorrelation estimator_correlation(const World& world, const KnnQualityEstimator& subset,
                                           const KnnQualityEstimator& full, const RunConfig& cfg);

// Speaker generation ----------------------------------------------------------

struct SpeakerSplit {
  std::vector<std::size_t> train, validation, test;  // video indices
};

SpeakerSplit split_speakers(std::size_t n, const RunConfig& cfg);

/// Row-major gather.
std::vector<double> gather_rows(std::span<const double> rows, std::size_t dim,
                                std::span<const std::size_t> index);

struct LatentData {
  WhiteningModel whitening;  // fit on the training split, d' chosen by energy
  SpeakerSplit split;
  std::vector<double> x;     // every video embedding, N x dim
  std::vector<double> y;     // every video, N x d'
  std::size_t d_prime() const { return whitening.d_prime; }
};

LatentData prepare_latents(const World& world, const RunConfig& cfg);

NoiseSchedule schedule_for(const RunConfig& cfg);

TrainResult train_diffusion(const LatentData& data, const RunConfig& cfg);
/// M = 1..gmm_max_components, fit in cfg.gmm_space.
std::vector<GmmFit> fit_gmms(const LatentData& data, const RunConfig& cfg);

struct W1Row {
  std::string model;      // "diffusion" or "gmm"
  std::size_t components = 0;  // 0 for diffusion
  RepeatedW1Stats stats;
};

/// W1 to the test split in the principal latent space; x-space GMM draws are
/// whitened before comparison.
std::vector<W1Row> w1_versus_models(const LatentData& data, const EpsilonNet& net,
                                    const NoiseSchedule& schedule, std::span<const GmmModel> gmms,
                                    const RunConfig& cfg);

/// Real halves are the first-session and second-session videos of the
/// duplicated speakers; the two generated sets are independent diffusion
/// draws of the same size. Everything in the whitened principal space.
struct TripleResult {
  DistanceTriple triple;
  std::size_t set_size = 0;
};

TripleResult world_distance_triple(const World& world, const LatentData& data,
                                   const EpsilonNet& net, const NoiseSchedule& schedule,
                                   const RunConfig& cfg);

}  // namespace alcorpus
