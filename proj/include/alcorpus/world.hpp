#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "alcorpus/embedding.hpp"
#include "alcorpus/quality.hpp"

namespace alcorpus {

/// Parameters of the synthetic candidate pool. Speakers live on a
/// latent_dim-dimensional Gaussian mixture mapped linearly into embed_dim
/// dimensions; each speaker is recorded in one video, and a duplicate_rate
/// fraction of them in a second one.
struct WorldConfig {
  std::size_t n_speakers = 3000;
  std::size_t embed_dim = 32;
  std::size_t latent_dim = 6;
  std::size_t components = 8;
  double component_spread = 2.5;  // std of component means in latent space
  double component_scale_min = 0.6;
  double component_scale_max = 1.2;
  double embed_noise = 0.05;      // isotropic noise added after the linear map

  double duplicate_rate = 0.3;
  double duplicate_jitter = 0.01;

  std::size_t samples_per_video = 3;
  double utterance_noise = 0.02;
  double contaminated_rate = 0.05;  // videos mixing several voices
  double contaminated_noise = 0.5;

  double alignment_mean = 0.8;
  double alignment_std = 0.1;
  double low_alignment_rate = 0.05;
  double low_alignment_mean = 0.3;

  // Data quality: per-component base + gradient along a random latent
  // direction + speaker offset; per-sample noise on top.
  double quality_base_min = 2.0;
  double quality_base_max = 4.3;
  double quality_gradient = 0.2;
  double speaker_quality_std = 0.1;
  double sample_quality_noise = 0.2;

  std::size_t reference_speakers = 20;
  double reference_min = 3.0;
  double reference_max = 4.5;

  ProxyParams proxy{2.0, 0.5, 1.0};

  // Ground-truth synthesis quality of a speaker given a corpus:
  // base + slope * (q_speaker - pivot) + difficulty + gain * sum_j w_j K_h(x - x_j),
  // with w_j = (q_j - 1) / 4 the data quality weight of corpus sample j.
  double truth_base = 2.0;
  double truth_gain = 0.15;
  double truth_bandwidth = 1.0;
  double truth_quality_slope = 0.8;
  double truth_quality_pivot = 3.0;
  double truth_difficulty_std = 0.15;

  std::uint64_t seed = 1;

  void validate() const;
  std::string to_json() const;
  static WorldConfig from_json(const std::string& json);
};

/// Population parameters drawn from the seed; kept so that fresh speakers can
/// be drawn later from the same population.
struct WorldMixture {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;      // latent_dim each
  std::vector<double> scales;
  std::vector<double> base_quality;
  std::vector<std::vector<double>> gradients;  // unit latent directions
  std::vector<double> projection;              // embed_dim x latent_dim, orthonormal columns
};

struct WorldSpeaker {
  std::size_t component = 0;
  std::vector<double> latent;
  std::vector<double> embedding;  // clean embedding before session jitter
  double intrinsic_quality = 3.0;
  double difficulty = 0.0;
};

struct WorldVideo {
  std::string source_id;
  std::size_t speaker = 0;  // index into World::speakers
  int session = 0;          // 0 original recording, 1 duplicate
  bool contaminated = false;
  std::vector<double> embedding;  // mean of the utterance embeddings
  double group_variance = 0.0;
};

struct World {
  WorldConfig config;
  WorldMixture mixture;
  std::vector<WorldSpeaker> speakers;
  std::vector<WorldVideo> videos;
  std::vector<DataSample> samples;
  std::vector<double> sample_quality;  // ground-truth data quality, parallel to samples
  std::vector<QualityScore> reference_scores;

  std::vector<std::string> source_ids() const;
  /// Samples whose source is in `source_ids`, in world order.
  std::vector<DataSample> samples_of(std::span<const std::string> source_ids) const;
  /// Ground-truth data quality; throws ValidationError for an unknown id.
  double data_quality(const std::string& sample_id) const;
  const WorldVideo& video(const std::string& source_id) const;
  /// All video embeddings, row-major, in world order.
  std::vector<double> video_embeddings() const;
};

/// Fully determined by cfg (including cfg.seed).
World generate_world(const WorldConfig& cfg);

/// Fresh speakers from the same population (one embedding each, no
/// duplicates), drawn from a stream separate from the world's own.
std::vector<double> draw_query_speakers(const World& world, std::size_t n, std::uint64_t stream);

/// Evaluation-only oracle: synthesis quality for the speaker of `source_id`
/// after training on `corpus`. The selector never calls this.
QualityScore ground_truth_synthesis_quality(const World& world, const std::string& source_id,
                                            const Corpus& corpus);
/// Pre-clamp value of the same quantity for every video at once.
std::vector<double> ground_truth_raw_quality(const World& world, const Corpus& corpus);

/// world.json (config, speakers, videos, samples, reference scores) plus
/// videos.csv with the video embeddings.
void save_world(const std::filesystem::path& dir, const World& world,
                std::span<const std::string> csv_comments = {});
World load_world(const std::filesystem::path& dir);

}  // namespace alcorpus
