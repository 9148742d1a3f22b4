#include "alcorpus/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "alcorpus/errors.hpp"
#include "alcorpus/random.hpp"
#include "alcorpus/text.hpp"
#include "json.hpp"

namespace alcorpus {

namespace {

using nlohmann::ordered_json;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("run config: " + what);
}

template <class T>
void get_if(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  require(!name.empty() && name.find('/') == std::string::npos, "name must be a plain word");
  world_config_for(*this).validate();
  PartitionPlan{ratios, 0}.validate();
  screening.validate();
  require(estimator_k > 0, "estimator_k must be positive");
  require(energy > 0.0 && energy < 1.0, "energy must lie in (0, 1)");
  require(split.size() == 3 && split[0] > 0 && split[1] >= 0 && split[2] > 0 &&
              std::abs(split[0] + split[1] + split[2] - 1.0) < 1e-9,
          "split must be three fractions summing to 1 with nonempty train and test");
  require(diffusion_steps >= 1 && beta_start > 0 && beta_end < 1 && beta_start <= beta_end,
          "diffusion schedule must satisfy 0 < beta_start <= beta_end < 1");
  require(time_dim > 0 && time_dim % 2 == 0 && hidden > 0, "network shape is invalid");
  train.validate();
  require(gmm_max_components >= 1, "gmm_max_components must be >= 1");
  require(gmm_space == "latent" || gmm_space == "x", "gmm_space must be latent or x");
  require(w1_runs >= 2, "w1_runs must be >= 2");
  require(query_points >= 2, "query_points must be >= 2");
  require(tail_margin >= 0, "tail_margin must be nonnegative");
  require(histogram_step > 0 && histogram_step <= 4, "histogram_step must lie in (0, 4]");
}

std::string RunConfig::to_json() const {
  ordered_json j;
  j["name"] = name;
  j["seed"] = seed;
  j["world"] = ordered_json::parse(world.to_json());
  j["ratios"] = ratios;
  j["screening"] = {{"min_alignment", screening.min_alignment},
                    {"max_group_variance", screening.max_group_variance}};
  j["estimator_k"] = estimator_k;
  j["energy"] = energy;
  j["split"] = split;
  j["diffusion"] = {{"steps", diffusion_steps},
                    {"beta_start", beta_start},
                    {"beta_end", beta_end},
                    {"time_dim", time_dim},
                    {"hidden", hidden}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"adam_beta1", train.adam_beta1},
                {"adam_beta2", train.adam_beta2},
                {"adam_epsilon", train.adam_epsilon},
                {"patience", train.patience},
                {"validation_draws", train.validation_draws}};
  j["gmm"] = {{"max_components", gmm_max_components},
              {"tolerance", gmm.tolerance},
              {"max_iter", gmm.max_iter},
              {"restarts", gmm.restarts},
              {"space", gmm_space}};
  j["w1_runs"] = w1_runs;
  j["query_points"] = query_points;
  j["tail_margin"] = tail_margin;
  j["histogram_step"] = histogram_step;
  return j.dump();
}

RunConfig RunConfig::from_json(const std::string& json) {
  RunConfig c;
  try {
    const auto j = nlohmann::json::parse(json);
    get_if(j, "name", c.name);
    get_if(j, "seed", c.seed);
    if (j.contains("world")) c.world = WorldConfig::from_json(j.at("world").dump());
    get_if(j, "ratios", c.ratios);
    if (j.contains("screening")) {
      const auto& s = j.at("screening");
      get_if(s, "min_alignment", c.screening.min_alignment);
      get_if(s, "max_group_variance", c.screening.max_group_variance);
    }
    get_if(j, "estimator_k", c.estimator_k);
    get_if(j, "energy", c.energy);
    get_if(j, "split", c.split);
    if (j.contains("diffusion")) {
      const auto& d = j.at("diffusion");
      get_if(d, "steps", c.diffusion_steps);
      get_if(d, "beta_start", c.beta_start);
      get_if(d, "beta_end", c.beta_end);
      get_if(d, "time_dim", c.time_dim);
      get_if(d, "hidden", c.hidden);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      get_if(t, "epochs", c.train.epochs);
      get_if(t, "batch_size", c.train.batch_size);
      get_if(t, "learning_rate", c.train.learning_rate);
      get_if(t, "adam_beta1", c.train.adam_beta1);
      get_if(t, "adam_beta2", c.train.adam_beta2);
      get_if(t, "adam_epsilon", c.train.adam_epsilon);
      get_if(t, "patience", c.train.patience);
      get_if(t, "validation_draws", c.train.validation_draws);
    }
    if (j.contains("gmm")) {
      const auto& g = j.at("gmm");
      get_if(g, "max_components", c.gmm_max_components);
      get_if(g, "tolerance", c.gmm.tolerance);
      get_if(g, "max_iter", c.gmm.max_iter);
      get_if(g, "restarts", c.gmm.restarts);
      get_if(g, "space", c.gmm_space);
    }
    get_if(j, "w1_runs", c.w1_runs);
    get_if(j, "query_points", c.query_points);
    get_if(j, "tail_margin", c.tail_margin);
    get_if(j, "histogram_step", c.histogram_step);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string RunConfig::hash() const { return text::hex64(text::fnv1a64(to_json())); }

std::uint64_t RunConfig::stage_seed(std::uint64_t stage) const { return Rng::mix_seed(seed, stage); }

std::vector<double> RunConfig::histogram_edges() const {
  std::vector<double> edges;
  const auto n = static_cast<std::size_t>(std::llround(4.0 / histogram_step));
  for (std::size_t i = 0; i <= n; ++i)
    edges.push_back(std::min(QualityScore::kMax, QualityScore::kMin + histogram_step * static_cast<double>(i)));
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

WorldConfig world_config_for(const RunConfig& cfg) {
  WorldConfig w = cfg.world;
  w.seed = cfg.seed;
  return w;
}

// Selection -------------------------------------------------------------------

SelectionInputs selection_inputs(const World& world) {
  return {world.samples, world.sample_quality, world.reference_scores, world.config.proxy};
}

KnnQualityEstimator fit_on(const SelectionInputs& inputs, std::span<const DataSample> samples,
                           std::size_t k) {
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(inputs.pool.size());
  for (std::size_t i = 0; i < inputs.pool.size(); ++i) index.emplace(inputs.pool[i].sample_id, i);
  std::vector<LabeledPoint> labeled;
  labeled.reserve(samples.size());
  for (const auto& s : samples) {
    const auto it = index.find(s.sample_id);
    if (it == index.end()) throw ValidationError("no quality label for " + s.sample_id);
    labeled.push_back({s.speaker_embedding.vector, QualityScore(inputs.data_quality[it->second])});
  }
  return fit_estimator(labeled, k);
}

std::vector<std::string> pool_sources(std::span<const DataSample> pool) {
  std::vector<std::string> sources;
  std::unordered_set<std::string_view> seen;
  for (const auto& s : pool)
    if (seen.insert(s.source_id).second) sources.push_back(s.source_id);
  return sources;
}

std::vector<std::vector<DataSample>> segment_samples(const SourcePartition& partition,
                                                     std::span<const DataSample> kept) {
  std::unordered_map<std::string_view, std::size_t> segment_of;
  for (std::size_t k = 0; k < partition.segments.size(); ++k)
    for (const auto& id : partition.segments[k]) segment_of.emplace(id, k);
  std::vector<std::vector<DataSample>> segments(partition.segments.size());
  for (const auto& s : kept) {
    const auto it = segment_of.find(s.source_id);
    if (it == segment_of.end()) throw ValidationError("source not in any segment: " + s.source_id);
    segments[it->second].push_back(s);
  }
  return segments;
}

SelectionOutcome run_selection(const SelectionInputs& inputs, const RunConfig& cfg) {
  cfg.validate();
  if (inputs.pool.size() != inputs.data_quality.size())
    throw ValidationError("selection inputs: labels do not match pool");
  const auto threshold = derive_threshold(inputs.reference_scores);

  auto partition =
      shuffle_and_partition(pool_sources(inputs.pool), {cfg.ratios, cfg.stage_seed(kPlanSeed)});
  auto screened = screen(inputs.pool, cfg.screening);
  auto segments = segment_samples(partition, screened.kept);

  auto subset = fit_on(inputs, segments.front(), cfg.estimator_k);
  auto full = fit_on(inputs, screened.kept, cfg.estimator_k);

  auto ours = run_loop(segments, subset, threshold, inputs.proxy, "ours");
  auto initial = build_initial_corpus(segments.front(), subset, threshold, "initial").corpus;
  auto baseline = baseline_select(screened.kept, full, ours.corpus.size(), "baseline");
  std::vector<CorpusEntry> all;
  all.reserve(screened.kept.size());
  for (const auto& s : screened.kept) all.push_back({s.sample_id, 1});
  Corpus unselected("unselected", std::move(all));

  return SelectionOutcome{threshold,       std::move(partition), std::move(screened),
                          std::move(segments), std::move(subset), std::move(full),
                          std::move(ours),     std::move(initial), std::move(baseline),
                          std::move(unselected)};
}

// Evaluation ------------------------------------------------------------------

MethodEvaluation evaluate_corpus(const World& world, const Corpus& corpus, double theta,
                                 const RunConfig& cfg) {
  MethodEvaluation e;
  e.method = corpus.name();
  e.corpus_size = corpus.size();
  for (double raw : ground_truth_raw_quality(world, corpus))
    e.scores.push_back(QualityScore::clamped(raw).value());
  e.hq_ratio = hq_ratio(e.scores, theta);
  const std::size_t D = world.config.embed_dim;
  std::vector<double> hq_points;
  std::size_t tail = 0;
  for (std::size_t v = 0; v < world.videos.size(); ++v) {
    if (e.scores[v] > theta) {
      ++e.hq_speakers;
      hq_points.insert(hq_points.end(), world.videos[v].embedding.begin(),
                       world.videos[v].embedding.end());
    }
    if (e.scores[v] > theta + cfg.tail_margin) ++tail;
  }
  e.mst_w = hq_points.empty() ? 0.0 : mst_total_length(hq_points, D);
  e.tail_fraction = static_cast<double>(tail) / static_cast<double>(e.scores.size());
  e.cumulative = cumulative_histogram(e.scores, cfg.histogram_edges());
  return e;
}

EstimatorCorrelation estimator_correlation(const World& world, const KnnQualityEstimator& subset,
                                           const KnnQualityEstimator& full, const RunConfig& cfg) {
  EstimatorCorrelation c;
  const auto queries = draw_query_speakers(world, cfg.query_points, 0);
  c.query_points = cfg.query_points;
  c.subset_size = subset.size();
  c.full_size = full.size();
  c.subset_predictions = subset.predict_many(queries);
  c.full_predictions = full.predict_many(queries);
  c.pearson = pearson(c.subset_predictions, c.full_predictions);
  return c;
}

// Speaker generation --------------------------------------------------------------

SpeakerSplit split_speakers(std::size_t n, const RunConfig& cfg) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.stage_seed(kSplitSeed));
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.split[0] * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.split[1] * static_cast<double>(n)));
  if (n_train == 0 || n_train + n_val >= n)
    throw ValidationError("speaker split leaves an empty training or test set");
  SpeakerSplit s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

std::vector<double> gather_rows(std::span<const double> rows, std::size_t dim,
                                std::span<const std::size_t> index) {
  std::vector<double> out;
  out.reserve(index.size() * dim);
  for (std::size_t i : index) {
    if ((i + 1) * dim > rows.size()) throw ValidationError("gather_rows: index out of range");
    out.insert(out.end(), rows.begin() + static_cast<std::ptrdiff_t>(i * dim),
               rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
  }
  return out;
}

LatentData prepare_latents(const World& world, const RunConfig& cfg) {
  const std::size_t D = world.config.embed_dim;
  LatentData data;
  data.x = world.video_embeddings();
  data.split = split_speakers(world.videos.size(), cfg);
  auto model = fit_whitening(gather_rows(data.x, D, data.split.train), D);
  const std::size_t d_prime = choose_dprime(model.eigvals, cfg.energy);
  data.whitening = with_dprime(std::move(model), d_prime);
  data.y = whiten_principal(data.whitening, data.x);
  return data;
}

NoiseSchedule schedule_for(const RunConfig& cfg) {
  return make_schedule(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end);
}

TrainResult train_diffusion(const LatentData& data, const RunConfig& cfg) {
  const std::size_t p = data.d_prime();
  Rng init(cfg.stage_seed(kDiffusionSeed));
  auto net = EpsilonNet::initialized({p, cfg.time_dim, cfg.hidden}, init);
  TrainConfig tc = cfg.train;
  tc.seed = Rng::mix_seed(cfg.stage_seed(kDiffusionSeed), 1);
  return train(std::move(net), schedule_for(cfg), gather_rows(data.y, p, data.split.train),
               gather_rows(data.y, p, data.split.validation), tc);
}

std::vector<GmmFit> fit_gmms(const LatentData& data, const RunConfig& cfg) {
  const bool latent = cfg.gmm_space == "latent";
  const std::size_t p = latent ? data.d_prime() : data.whitening.dim();
  const auto rows = gather_rows(latent ? data.y : data.x, p, data.split.train);
  std::vector<GmmFit> fits;
  for (std::size_t m = 1; m <= cfg.gmm_max_components; ++m) {
    GmmFitOptions opt = cfg.gmm;
    opt.components = m;
    opt.seed = Rng::mix_seed(cfg.stage_seed(kGmmSeed), m);
    fits.push_back(fit_em(rows, p, opt));
  }
  return fits;
}

std::vector<W1Row> w1_versus_models(const LatentData& data, const EpsilonNet& net,
                                    const NoiseSchedule& schedule, std::span<const GmmModel> gmms,
                                    const RunConfig& cfg) {
  const std::size_t p = data.d_prime();
  const auto test = gather_rows(data.y, p, data.split.test);
  const std::uint64_t seed = cfg.stage_seed(kW1Seed);
  std::vector<W1Row> rows;
  PointSampler diffusion = [&](std::size_t n, Rng& rng) { return sample(net, schedule, n, rng); };
  rows.push_back({"diffusion", 0, repeated_w1(diffusion, test, p, cfg.w1_runs, seed)});
  for (const auto& model : gmms) {
    PointSampler gmm = [&](std::size_t n, Rng& rng) {
      auto draws = gmm_sample(model, n, rng);
      return cfg.gmm_space == "x" ? whiten_principal(data.whitening, draws) : draws;
    };
    rows.push_back({"gmm", model.components(),
                    repeated_w1(gmm, test, p, cfg.w1_runs, Rng::mix_seed(seed, model.components()))});
  }
  return rows;
}

TripleResult world_distance_triple(const World& world, const LatentData& data,
                                   const EpsilonNet& net, const NoiseSchedule& schedule,
                                   const RunConfig& cfg) {
  const std::size_t p = data.d_prime();
  std::vector<std::size_t> first_session(world.speakers.size(), world.videos.size());
  std::vector<std::size_t> a, b;
  for (std::size_t v = 0; v < world.videos.size(); ++v) {
    const auto& video = world.videos[v];
    if (video.session == 0) {
      first_session[video.speaker] = v;
    } else {
      a.push_back(first_session[video.speaker]);
      b.push_back(v);
    }
  }
  if (a.empty()) throw ValidationError("distance triple needs duplicated speakers");
  const auto real_a = gather_rows(data.y, p, a);
  const auto real_b = gather_rows(data.y, p, b);
  Rng rng(cfg.stage_seed(kTripleSeed));
  Rng r1 = rng.derive(1), r2 = rng.derive(2);
  const auto gen_1 = sample(net, schedule, a.size(), r1);
  const auto gen_2 = sample(net, schedule, a.size(), r2);
  return {distance_triple(real_a, real_b, gen_1, gen_2, p), a.size()};
}

}  // namespace alcorpus
