#include "alcorpus/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "alcorpus/errors.hpp"
#include "alcorpus/kernels.hpp"
#include "alcorpus/prescreen.hpp"
#include "alcorpus/random.hpp"
#include "json.hpp"

namespace alcorpus {

namespace {

using nlohmann::ordered_json;

enum Stream : std::uint64_t {
  kMixtureStream = 1,
  kSpeakerStream,
  kVideoStream,
  kSampleStream,
  kReferenceStream,
  kQueryStream,
};

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(std::string("world config: ") + what);
}

bool is_rate(double r) { return r >= 0.0 && r <= 1.0; }

std::string video_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "v%05zu", i);
  return buf;
}

std::size_t pick_component(const WorldMixture& m, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t c = 0; c + 1 < m.weights.size(); ++c) {
    acc += m.weights[c];
    if (u < acc) return c;
  }
  return m.weights.size() - 1;
}

// Orthonormal columns by modified Gram-Schmidt on a Gaussian matrix.
std::vector<double> random_projection(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> a(rows * cols);
  rng.fill_normal(a);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double d = 0.0;
      for (std::size_t r = 0; r < rows; ++r) d += a[r * cols + c] * a[r * cols + p];
      for (std::size_t r = 0; r < rows; ++r) a[r * cols + c] -= d * a[r * cols + p];
    }
    double n = 0.0;
    for (std::size_t r = 0; r < rows; ++r) n += a[r * cols + c] * a[r * cols + c];
    n = std::sqrt(n);
    for (std::size_t r = 0; r < rows; ++r) a[r * cols + c] /= n;
  }
  return a;
}

WorldMixture draw_mixture(const WorldConfig& cfg, Rng rng) {
  WorldMixture m;
  const std::size_t C = cfg.components;
  double total = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    m.weights.push_back(rng.uniform(0.5, 1.5));
    total += m.weights.back();
  }
  for (double& w : m.weights) w /= total;
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<double> mu(cfg.latent_dim);
    for (double& v : mu) v = rng.normal(0.0, cfg.component_spread);
    m.means.push_back(std::move(mu));
    m.scales.push_back(rng.uniform(cfg.component_scale_min, cfg.component_scale_max));
    m.base_quality.push_back(rng.uniform(cfg.quality_base_min, cfg.quality_base_max));
    std::vector<double> g(cfg.latent_dim);
    rng.fill_normal(g);
    double n = 0.0;
    for (double v : g) n += v * v;
    n = std::sqrt(n);
    for (double& v : g) v /= n;
    m.gradients.push_back(std::move(g));
  }
  m.projection = random_projection(cfg.embed_dim, cfg.latent_dim, rng);
  return m;
}

WorldSpeaker draw_speaker(const WorldConfig& cfg, const WorldMixture& m, Rng& rng) {
  WorldSpeaker s;
  s.component = pick_component(m, rng);
  const auto& mu = m.means[s.component];
  const double scale = m.scales[s.component];
  s.latent.resize(cfg.latent_dim);
  double along = 0.0;
  for (std::size_t i = 0; i < cfg.latent_dim; ++i) {
    const double dev = rng.normal();
    s.latent[i] = mu[i] + scale * dev;
    along += dev * m.gradients[s.component][i];
  }
  s.embedding.assign(cfg.embed_dim, 0.0);
  for (std::size_t r = 0; r < cfg.embed_dim; ++r) {
    double v = 0.0;
    for (std::size_t c = 0; c < cfg.latent_dim; ++c)
      v += m.projection[r * cfg.latent_dim + c] * s.latent[c];
    s.embedding[r] = v + rng.normal(0.0, cfg.embed_noise);
  }
  s.intrinsic_quality = m.base_quality[s.component] + cfg.quality_gradient * along +
                        rng.normal(0.0, cfg.speaker_quality_std);
  s.difficulty = rng.normal(0.0, cfg.truth_difficulty_std);
  return s;
}

}  // namespace

void WorldConfig::validate() const {
  require(n_speakers > 0 && embed_dim > 0 && latent_dim > 0 && components > 0,
          "counts must be positive");
  require(latent_dim <= embed_dim, "latent_dim must not exceed embed_dim");
  require(samples_per_video > 0 && reference_speakers > 0, "counts must be positive");
  require(is_rate(duplicate_rate) && is_rate(contaminated_rate) && is_rate(low_alignment_rate),
          "rates must lie in [0, 1]");
  require(component_spread >= 0 && embed_noise >= 0 && duplicate_jitter >= 0 &&
              utterance_noise >= 0 && contaminated_noise >= 0 && alignment_std >= 0 &&
              speaker_quality_std >= 0 && sample_quality_noise >= 0 &&
              truth_difficulty_std >= 0,
          "standard deviations must be nonnegative");
  require(component_scale_min > 0 && component_scale_min <= component_scale_max,
          "component scales must satisfy 0 < min <= max");
  require(quality_base_min <= quality_base_max, "quality base range is reversed");
  require(reference_min >= QualityScore::kMin && reference_max <= QualityScore::kMax &&
              reference_min <= reference_max,
          "reference range must lie within [1, 5]");
  require(proxy.bandwidth > 0 && proxy.gain >= 0, "proxy bandwidth must be positive");
  require(truth_bandwidth > 0 && truth_gain >= 0, "truth bandwidth must be positive");
}

std::string WorldConfig::to_json() const {
  ordered_json j;
  j["n_speakers"] = n_speakers;
  j["embed_dim"] = embed_dim;
  j["latent_dim"] = latent_dim;
  j["components"] = components;
  j["component_spread"] = component_spread;
  j["component_scale_min"] = component_scale_min;
  j["component_scale_max"] = component_scale_max;
  j["embed_noise"] = embed_noise;
  j["duplicate_rate"] = duplicate_rate;
  j["duplicate_jitter"] = duplicate_jitter;
  j["samples_per_video"] = samples_per_video;
  j["utterance_noise"] = utterance_noise;
  j["contaminated_rate"] = contaminated_rate;
  j["contaminated_noise"] = contaminated_noise;
  j["alignment_mean"] = alignment_mean;
  j["alignment_std"] = alignment_std;
  j["low_alignment_rate"] = low_alignment_rate;
  j["low_alignment_mean"] = low_alignment_mean;
  j["quality_base_min"] = quality_base_min;
  j["quality_base_max"] = quality_base_max;
  j["quality_gradient"] = quality_gradient;
  j["speaker_quality_std"] = speaker_quality_std;
  j["sample_quality_noise"] = sample_quality_noise;
  j["reference_speakers"] = reference_speakers;
  j["reference_min"] = reference_min;
  j["reference_max"] = reference_max;
  j["proxy"] = {{"base_quality", proxy.base_quality},
                {"gain", proxy.gain},
                {"bandwidth", proxy.bandwidth}};
  j["truth_base"] = truth_base;
  j["truth_gain"] = truth_gain;
  j["truth_bandwidth"] = truth_bandwidth;
  j["truth_quality_slope"] = truth_quality_slope;
  j["truth_quality_pivot"] = truth_quality_pivot;
  j["truth_difficulty_std"] = truth_difficulty_std;
  j["seed"] = seed;
  return j.dump();
}

WorldConfig WorldConfig::from_json(const std::string& json) {
  WorldConfig c;
  try {
    const auto j = nlohmann::json::parse(json);
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n_speakers", c.n_speakers);
    get("embed_dim", c.embed_dim);
    get("latent_dim", c.latent_dim);
    get("components", c.components);
    get("component_spread", c.component_spread);
    get("component_scale_min", c.component_scale_min);
    get("component_scale_max", c.component_scale_max);
    get("embed_noise", c.embed_noise);
    get("duplicate_rate", c.duplicate_rate);
    get("duplicate_jitter", c.duplicate_jitter);
    get("samples_per_video", c.samples_per_video);
    get("utterance_noise", c.utterance_noise);
    get("contaminated_rate", c.contaminated_rate);
    get("contaminated_noise", c.contaminated_noise);
    get("alignment_mean", c.alignment_mean);
    get("alignment_std", c.alignment_std);
    get("low_alignment_rate", c.low_alignment_rate);
    get("low_alignment_mean", c.low_alignment_mean);
    get("quality_base_min", c.quality_base_min);
    get("quality_base_max", c.quality_base_max);
    get("quality_gradient", c.quality_gradient);
    get("speaker_quality_std", c.speaker_quality_std);
    get("sample_quality_noise", c.sample_quality_noise);
    get("reference_speakers", c.reference_speakers);
    get("reference_min", c.reference_min);
    get("reference_max", c.reference_max);
    if (j.contains("proxy")) {
      const auto& p = j.at("proxy");
      if (p.contains("base_quality")) c.proxy.base_quality = p.at("base_quality").get<double>();
      if (p.contains("gain")) c.proxy.gain = p.at("gain").get<double>();
      if (p.contains("bandwidth")) c.proxy.bandwidth = p.at("bandwidth").get<double>();
    }
    get("truth_base", c.truth_base);
    get("truth_gain", c.truth_gain);
    get("truth_bandwidth", c.truth_bandwidth);
    get("truth_quality_slope", c.truth_quality_slope);
    get("truth_quality_pivot", c.truth_quality_pivot);
    get("truth_difficulty_std", c.truth_difficulty_std);
    get("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("world config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::string> World::source_ids() const {
  std::vector<std::string> out;
  out.reserve(videos.size());
  for (const auto& v : videos) out.push_back(v.source_id);
  return out;
}

std::vector<DataSample> World::samples_of(std::span<const std::string> ids) const {
  std::unordered_map<std::string_view, bool> wanted;
  for (const auto& id : ids) wanted.emplace(id, true);
  std::vector<DataSample> out;
  for (const auto& s : samples)
    if (wanted.contains(s.source_id)) out.push_back(s);
  return out;
}

double World::data_quality(const std::string& sample_id) const {
  const auto dash = sample_id.find("-u");
  if (dash != std::string::npos) {
    const auto& v = video(sample_id.substr(0, dash));
    const std::size_t k = std::strtoull(sample_id.c_str() + dash + 2, nullptr, 10);
    const std::size_t i = static_cast<std::size_t>(&v - videos.data()) * config.samples_per_video + k;
    if (k < config.samples_per_video && samples[i].sample_id == sample_id) return sample_quality[i];
  }
  throw ValidationError("unknown sample: " + sample_id);
}

const WorldVideo& World::video(const std::string& source_id) const {
  if (source_id.size() > 1 && source_id[0] == 'v') {
    const std::size_t i = std::strtoull(source_id.c_str() + 1, nullptr, 10);
    if (i < videos.size() && videos[i].source_id == source_id) return videos[i];
  }
  throw ValidationError("unknown speaker source: " + source_id);
}

std::vector<double> World::video_embeddings() const {
  std::vector<double> out;
  out.reserve(videos.size() * config.embed_dim);
  for (const auto& v : videos) out.insert(out.end(), v.embedding.begin(), v.embedding.end());
  return out;
}

World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  const Rng root(cfg.seed);
  World w;
  w.config = cfg;
  w.mixture = draw_mixture(cfg, root.derive(kMixtureStream));

  Rng spk_rng = root.derive(kSpeakerStream);
  w.speakers.reserve(cfg.n_speakers);
  for (std::size_t i = 0; i < cfg.n_speakers; ++i)
    w.speakers.push_back(draw_speaker(cfg, w.mixture, spk_rng));

  // Originals first, then the second sessions of duplicated speakers.
  Rng vid_rng = root.derive(kVideoStream);
  std::vector<std::size_t> owners(cfg.n_speakers);
  for (std::size_t i = 0; i < cfg.n_speakers; ++i) owners[i] = i;
  std::vector<int> session(cfg.n_speakers, 0);
  for (std::size_t i = 0; i < cfg.n_speakers; ++i) {
    if (vid_rng.uniform() < cfg.duplicate_rate) {
      owners.push_back(i);
      session.push_back(1);
    }
  }

  Rng smp_rng = root.derive(kSampleStream);
  const std::size_t D = cfg.embed_dim;
  for (std::size_t v = 0; v < owners.size(); ++v) {
    const auto& spk = w.speakers[owners[v]];
    WorldVideo video;
    video.source_id = video_id(v);
    video.speaker = owners[v];
    video.session = session[v];
    std::vector<double> center = spk.embedding;
    if (video.session == 1)
      for (double& c : center) c += smp_rng.normal(0.0, cfg.duplicate_jitter);
    video.contaminated = smp_rng.uniform() < cfg.contaminated_rate;
    const double spread = video.contaminated ? cfg.contaminated_noise : cfg.utterance_noise;

    std::vector<std::vector<double>> utterances(cfg.samples_per_video, std::vector<double>(D));
    video.embedding.assign(D, 0.0);
    for (auto& u : utterances) {
      for (std::size_t d = 0; d < D; ++d) u[d] = center[d] + smp_rng.normal(0.0, spread);
      kernels::axpy(1.0 / static_cast<double>(cfg.samples_per_video), u, video.embedding);
    }
    video.group_variance = intra_group_variance(utterances);

    for (std::size_t k = 0; k < cfg.samples_per_video; ++k) {
      DataSample s;
      s.sample_id = video.source_id + "-u" + std::to_string(k);
      s.source_id = video.source_id;
      s.speaker_embedding = Embedding{video.source_id, video.embedding};
      s.duration_sec = smp_rng.uniform(2.0, 10.0);
      const bool misaligned = smp_rng.uniform() < cfg.low_alignment_rate;
      const double align = smp_rng.normal(
          misaligned ? cfg.low_alignment_mean : cfg.alignment_mean, cfg.alignment_std);
      s.screening.alignment_score = std::clamp(align, 0.0, 1.0);
      s.screening.group_variance = video.group_variance;
      double q = spk.intrinsic_quality + smp_rng.normal(0.0, cfg.sample_quality_noise);
      if (video.contaminated) q -= 1.0;
      w.sample_quality.push_back(std::clamp(q, QualityScore::kMin, QualityScore::kMax));
      w.samples.push_back(std::move(s));
    }
    w.videos.push_back(std::move(video));
  }

  // The weakest reference speaker sits exactly at reference_min.
  Rng ref_rng = root.derive(kReferenceStream);
  w.reference_scores.push_back(QualityScore(cfg.reference_min));
  for (std::size_t i = 1; i < cfg.reference_speakers; ++i)
    w.reference_scores.push_back(QualityScore(ref_rng.uniform(cfg.reference_min, cfg.reference_max)));
  return w;
}

std::vector<double> draw_query_speakers(const World& world, std::size_t n, std::uint64_t stream) {
  Rng rng = Rng(world.config.seed).derive(kQueryStream).derive(stream);
  std::vector<double> out;
  out.reserve(n * world.config.embed_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = draw_speaker(world.config, world.mixture, rng);
    out.insert(out.end(), s.embedding.begin(), s.embedding.end());
  }
  return out;
}

namespace {

// Corpus samples collapsed to their videos: (video index, summed weight).
struct WeightedVideos {
  std::vector<double> rows;
  std::vector<double> weights;
};

WeightedVideos corpus_weights(const World& world, const Corpus& corpus) {
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(world.samples.size());
  for (std::size_t i = 0; i < world.samples.size(); ++i) index.emplace(world.samples[i].sample_id, i);
  std::vector<double> per_video(world.videos.size(), 0.0);
  std::vector<char> used(world.videos.size(), 0);
  const std::size_t spv = world.config.samples_per_video;
  for (const auto& e : corpus.entries()) {
    auto it = index.find(e.sample_id);
    if (it == index.end()) throw ValidationError("corpus sample not in world: " + e.sample_id);
    const std::size_t v = it->second / spv;
    per_video[v] += (world.sample_quality[it->second] - 1.0) / 4.0;
    used[v] = 1;
  }
  WeightedVideos out;
  for (std::size_t v = 0; v < world.videos.size(); ++v) {
    if (!used[v]) continue;
    out.rows.insert(out.rows.end(), world.videos[v].embedding.begin(), world.videos[v].embedding.end());
    out.weights.push_back(per_video[v]);
  }
  return out;
}

double base_truth(const WorldConfig& c, const WorldSpeaker& s) {
  return c.truth_base + c.truth_quality_slope * (s.intrinsic_quality - c.truth_quality_pivot) +
         s.difficulty;
}

}  // namespace

QualityScore ground_truth_synthesis_quality(const World& world, const std::string& source_id,
                                            const Corpus& corpus) {
  const auto& video = world.video(source_id);
  const auto wv = corpus_weights(world, corpus);
  const auto& c = world.config;
  const double raw = base_truth(c, world.speakers[video.speaker]) +
                     c.truth_gain * gaussian_kernel_sum(video.embedding, wv.rows, c.embed_dim,
                                                        c.truth_bandwidth, wv.weights);
  return QualityScore::clamped(raw);
}

std::vector<double> ground_truth_raw_quality(const World& world, const Corpus& corpus) {
  const auto wv = corpus_weights(world, corpus);
  const auto& c = world.config;
  std::vector<double> out;
  out.reserve(world.videos.size());
  for (const auto& v : world.videos)
    out.push_back(base_truth(c, world.speakers[v.speaker]) +
                  c.truth_gain * gaussian_kernel_sum(v.embedding, wv.rows, c.embed_dim,
                                                     c.truth_bandwidth, wv.weights));
  return out;
}

// Persistence ---------------------------------------------------------------

void save_world(const std::filesystem::path& dir, const World& w,
                std::span<const std::string> csv_comments) {
  std::filesystem::create_directories(dir);
  ordered_json j;
  j["format"] = "world/1";
  j["config"] = ordered_json::parse(w.config.to_json());
  auto& m = j["mixture"];
  m["weights"] = w.mixture.weights;
  m["means"] = w.mixture.means;
  m["scales"] = w.mixture.scales;
  m["base_quality"] = w.mixture.base_quality;
  m["gradients"] = w.mixture.gradients;
  m["projection"] = w.mixture.projection;
  auto& spk = j["speakers"] = ordered_json::array();
  for (const auto& s : w.speakers)
    spk.push_back({{"component", s.component},
                   {"latent", s.latent},
                   {"embedding", s.embedding},
                   {"intrinsic_quality", s.intrinsic_quality},
                   {"difficulty", s.difficulty}});
  auto& vids = j["videos"] = ordered_json::array();
  for (const auto& v : w.videos)
    vids.push_back({{"source_id", v.source_id},
                    {"speaker", v.speaker},
                    {"session", v.session},
                    {"contaminated", v.contaminated},
                    {"group_variance", v.group_variance}});
  auto& smp = j["samples"] = ordered_json::array();
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto& s = w.samples[i];
    smp.push_back({{"sample_id", s.sample_id},
                   {"source_id", s.source_id},
                   {"duration_sec", s.duration_sec},
                   {"alignment_score", s.screening.alignment_score},
                   {"quality", w.sample_quality[i]}});
  }
  auto& refs = j["reference_scores"] = ordered_json::array();
  for (const auto& r : w.reference_scores) refs.push_back(r.value());

  std::ofstream out(dir / "world.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / "world.json").string());
  out << j.dump(1) << '\n';

  EmbeddingSet emb(w.config.embed_dim);
  for (const auto& v : w.videos) emb.add({v.source_id, v.embedding});
  save_embeddings(dir / "videos.csv", emb, csv_comments);
}

World load_world(const std::filesystem::path& dir) {
  const auto json_path = dir / "world.json";
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw ValidationError("missing world file: " + json_path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  World w;
  try {
    const auto j = nlohmann::json::parse(buf.str());
    if (j.at("format") != "world/1") throw ValidationError("unsupported world format");
    w.config = WorldConfig::from_json(j.at("config").dump());
    const auto& m = j.at("mixture");
    w.mixture.weights = m.at("weights").get<std::vector<double>>();
    w.mixture.means = m.at("means").get<std::vector<std::vector<double>>>();
    w.mixture.scales = m.at("scales").get<std::vector<double>>();
    w.mixture.base_quality = m.at("base_quality").get<std::vector<double>>();
    w.mixture.gradients = m.at("gradients").get<std::vector<std::vector<double>>>();
    w.mixture.projection = m.at("projection").get<std::vector<double>>();
    for (const auto& s : j.at("speakers"))
      w.speakers.push_back({s.at("component").get<std::size_t>(),
                            s.at("latent").get<std::vector<double>>(),
                            s.at("embedding").get<std::vector<double>>(),
                            s.at("intrinsic_quality").get<double>(),
                            s.at("difficulty").get<double>()});

    const auto emb = load_embeddings(dir / "videos.csv");
    if (emb.dim() != w.config.embed_dim) throw ValidationError("videos.csv dimension mismatch");
    const auto& vids = j.at("videos");
    if (vids.size() != emb.size()) throw ValidationError("videos.csv row count mismatch");
    for (std::size_t i = 0; i < vids.size(); ++i) {
      const auto& v = vids[i];
      WorldVideo video;
      video.source_id = v.at("source_id").get<std::string>();
      if (emb[i].speaker_id != video.source_id)
        throw ValidationError("videos.csv order does not match world.json");
      video.speaker = v.at("speaker").get<std::size_t>();
      if (video.speaker >= w.speakers.size()) throw ValidationError("video speaker out of range");
      video.session = v.at("session").get<int>();
      video.contaminated = v.at("contaminated").get<bool>();
      video.group_variance = v.at("group_variance").get<double>();
      video.embedding = emb[i].vector;
      w.videos.push_back(std::move(video));
    }
    const std::size_t spv = w.config.samples_per_video;
    const auto& smp = j.at("samples");
    if (smp.size() != w.videos.size() * spv) throw ValidationError("sample count mismatch");
    for (std::size_t i = 0; i < smp.size(); ++i) {
      const auto& s = smp[i];
      const auto& video = w.videos[i / spv];
      DataSample d;
      d.sample_id = s.at("sample_id").get<std::string>();
      d.source_id = s.at("source_id").get<std::string>();
      if (d.source_id != video.source_id) throw ValidationError("sample order mismatch");
      d.speaker_embedding = Embedding{video.source_id, video.embedding};
      d.duration_sec = s.at("duration_sec").get<double>();
      d.screening = {s.at("alignment_score").get<double>(), video.group_variance};
      const double q = s.at("quality").get<double>();
      QualityScore check(q);
      w.sample_quality.push_back(check.value());
      w.samples.push_back(std::move(d));
    }
    for (const auto& r : j.at("reference_scores")) w.reference_scores.emplace_back(r.get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("world file " + json_path.string() + ": " + e.what());
  }
  validate_pool(w.samples);
  return w;
}

}  // namespace alcorpus
