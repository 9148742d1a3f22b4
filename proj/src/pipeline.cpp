#include "alcorpus/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "alcorpus/errors.hpp"
#include "alcorpus/random.hpp"
#include "alcorpus/svg.hpp"
#include "alcorpus/text.hpp"
#include "json.hpp"

namespace alcorpus::pipeline {

namespace {

using nlohmann::ordered_json;
using text::format_double;

constexpr const char* kMethods[] = {"unselected", "initial", "baseline", "ours"};

fs::path world_dir(const fs::path& run) { return run / "world"; }
fs::path plan_dir(const fs::path& run) { return run / "plan"; }
fs::path corpora_dir(const fs::path& run) { return run / "corpora"; }
fs::path models_dir(const fs::path& run) { return run / "models"; }
fs::path reports_dir(const fs::path& run) { return run / "reports"; }

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing artifact: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path meta_path(const fs::path& artifact) {
  return artifact.parent_path() / (artifact.filename().string() + ".meta.json");
}

void write_meta(const fs::path& artifact, const RunConfig& cfg) {
  ordered_json j;
  j["artifact"] = artifact.filename().string();
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  write_file(meta_path(artifact), j.dump(1) + "\n");
}

void write_artifact(const fs::path& path, const std::string& content, const RunConfig& cfg) {
  write_file(path, content);
  write_meta(path, cfg);
}

[[noreturn]] void stale(const fs::path& artifact, const std::string& found, const RunConfig& cfg) {
  throw StalenessError("stale artifact " + artifact.string() + ": produced under config " + found +
                       ", current config is " + cfg.hash() + "; rerun the producing command");
}

// Reads a JSON/JSONL artifact after checking its sidecar.
std::string read_artifact(const fs::path& path, const RunConfig& cfg) {
  if (!fs::exists(path)) throw ValidationError("missing artifact: " + path.string());
  const auto meta_file = meta_path(path);
  if (!fs::exists(meta_file)) stale(path, "<no metadata>", cfg);
  std::string found;
  try {
    found = nlohmann::json::parse(read_file(meta_file)).at("config_hash").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    stale(path, "<unreadable metadata>", cfg);
  }
  if (found != cfg.hash()) stale(path, found, cfg);
  return read_file(path);
}

std::string provenance_comment(const RunConfig& cfg) {
  return "config_hash=" + cfg.hash() + " seed=" + std::to_string(cfg.seed);
}

void check_csv(const fs::path& path, const RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing artifact: " + path.string());
  std::string first, line;
  // Embedding CSVs lead with "# dim=", the provenance line follows.
  while (std::getline(in, line) && line.starts_with("#")) {
    if (line.find("config_hash=") != std::string::npos) {
      first = line;
      break;
    }
  }
  if (first != provenance_line(cfg)) {
    const auto at = first.find("config_hash=");
    stale(path, at == std::string::npos ? "<no provenance>" : first.substr(at + 12, 16), cfg);
  }
}

void write_csv(const fs::path& path, const RunConfig& cfg, const std::string& body) {
  write_file(path, provenance_line(cfg) + "\n" + body);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const fs::path& path, const RunConfig& cfg) {
  check_csv(path, cfg);
  std::ifstream in(path);
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.starts_with("#")) continue;
    std::vector<std::string> fields;
    for (auto f : text::split(line, ',')) fields.emplace_back(f);
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        throw ValidationError(path.string() + ": wrong field count");
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

double number(const std::string& field, const fs::path& path) {
  const auto v = text::parse_double(field);
  if (!v) throw ValidationError(path.string() + ": not a number: " + field);
  return *v;
}

std::string method_name(SelectMode m) {
  switch (m) {
    case SelectMode::kOurs: return "ours";
    case SelectMode::kBaseline: return "baseline";
    case SelectMode::kInitial: return "initial";
    case SelectMode::kUnselected: return "unselected";
  }
  return "";
}

World load_checked_world(const fs::path& run, const RunConfig& cfg) {
  read_artifact(world_dir(run) / "world.json", cfg);
  check_csv(world_dir(run) / "videos.csv", cfg);
  return load_world(world_dir(run));
}

SourcePartition load_partition(const fs::path& run, const RunConfig& cfg) {
  return partition_from_json(read_artifact(plan_dir(run) / "partition.json", cfg));
}

std::vector<DataSample> load_screened(const fs::path& run, const World& world, const RunConfig& cfg) {
  const auto content = read_artifact(plan_dir(run) / "screened.txt", cfg);
  std::unordered_map<std::string_view, const DataSample*> by_id;
  for (const auto& s : world.samples) by_id.emplace(s.sample_id, &s);
  std::vector<DataSample> kept;
  std::istringstream in(content);
  std::string id;
  while (std::getline(in, id)) {
    if (id.empty()) continue;
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("screened sample not in world: " + id);
    kept.push_back(*it->second);
  }
  return kept;
}

Corpus load_corpus(const fs::path& run, const std::string& method, const RunConfig& cfg) {
  std::istringstream in(read_artifact(corpora_dir(run) / (method + ".jsonl"), cfg));
  return read_corpus_manifest(in, method);
}

void save_corpus(const fs::path& run, const Corpus& corpus, const RunConfig& cfg) {
  std::ostringstream out;
  write_corpus_manifest(out, corpus);
  write_artifact(corpora_dir(run) / (corpus.name() + ".jsonl"), out.str(), cfg);
}

KnnQualityEstimator estimator(const fs::path& run, const std::string& which,
                              const SelectionInputs& inputs, std::span<const DataSample> samples,
                              const RunConfig& cfg) {
  auto est = fit_on(inputs, samples, cfg.estimator_k);
  write_artifact(models_dir(run) / ("estimator-" + which + ".json"), est.to_json(), cfg);
  return est;
}

std::string split_to_json(const SpeakerSplit& s) {
  ordered_json j;
  j["train"] = s.train;
  j["validation"] = s.validation;
  j["test"] = s.test;
  return j.dump();
}

SpeakerSplit split_from_json(const std::string& json) {
  try {
    const auto j = nlohmann::json::parse(json);
    return {j.at("train").get<std::vector<std::size_t>>(),
            j.at("validation").get<std::vector<std::size_t>>(),
            j.at("test").get<std::vector<std::size_t>>()};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("split file: ") + e.what());
  }
}

void save_latents(const fs::path& run, const LatentData& data, const RunConfig& cfg) {
  write_artifact(models_dir(run) / "whitening.json", data.whitening.to_json(), cfg);
  write_artifact(models_dir(run) / "split.json", split_to_json(data.split), cfg);
}

LatentData load_latents(const fs::path& run, const World& world, const RunConfig& cfg) {
  LatentData data;
  data.whitening = WhiteningModel::from_json(read_artifact(models_dir(run) / "whitening.json", cfg));
  data.split = split_from_json(read_artifact(models_dir(run) / "split.json", cfg));
  if (data.whitening.dim() != world.config.embed_dim)
    throw ValidationError("whitening model dimension does not match the world");
  data.x = world.video_embeddings();
  data.y = whiten_principal(data.whitening, data.x);
  return data;
}

fs::path gmm_path(const fs::path& run, std::size_t m) {
  return models_dir(run) / ("gmm-" + std::to_string(m) + ".json");
}

}  // namespace

SelectMode parse_select_mode(std::string_view s) {
  if (s == "ours") return SelectMode::kOurs;
  if (s == "baseline") return SelectMode::kBaseline;
  if (s == "initial") return SelectMode::kInitial;
  if (s == "unselected") return SelectMode::kUnselected;
  throw ValidationError("unknown selection mode: " + std::string(s));
}

SgModel parse_sg_model(std::string_view s) {
  if (s == "diffusion") return SgModel::kDiffusion;
  if (s == "gmm") return SgModel::kGmm;
  throw ValidationError("unknown speaker-generation model: " + std::string(s));
}

std::string provenance_line(const RunConfig& cfg) { return "# " + provenance_comment(cfg); }

void cmd_world(const RunConfig& cfg, const fs::path& run) {
  cfg.validate();
  write_file(run / "config.json", nlohmann::ordered_json::parse(cfg.to_json()).dump(2) + "\n");
  const World world = generate_world(world_config_for(cfg));
  const std::string comment = provenance_comment(cfg);
  save_world(world_dir(run), world, std::span(&comment, 1));
  write_meta(world_dir(run) / "world.json", cfg);
  std::cout << "world: " << world.speakers.size() << " speakers, " << world.videos.size()
            << " videos, " << world.samples.size() << " samples\n";
}

void cmd_plan(const RunConfig& cfg, const fs::path& run) {
  const World world = load_checked_world(run, cfg);
  const auto sources = pool_sources(world.samples);
  const auto partition = shuffle_and_partition(sources, {cfg.ratios, cfg.stage_seed(kPlanSeed)});
  fs::create_directories(plan_dir(run));
  save_source_list(plan_dir(run) / "sources.txt", sources);
  write_meta(plan_dir(run) / "sources.txt", cfg);
  write_artifact(plan_dir(run) / "partition.json", partition_to_json(partition), cfg);
  std::cout << "plan:";
  for (const auto& seg : partition.segments) std::cout << ' ' << seg.size();
  std::cout << " sources\n";
}

void cmd_screen(const RunConfig& cfg, const fs::path& run) {
  const World world = load_checked_world(run, cfg);
  const auto result = screen(world.samples, cfg.screening);
  fs::create_directories(plan_dir(run));
  std::string ids;
  for (const auto& s : result.kept) ids += s.sample_id + "\n";
  write_artifact(plan_dir(run) / "screened.txt", ids, cfg);
  const std::string comment = provenance_comment(cfg);
  save_rejection_log(plan_dir(run) / "rejections.csv", result.rejected, std::span(&comment, 1));
  std::cout << "screen: kept " << result.kept.size() << ", rejected " << result.rejected.size()
            << "\n";
}

void cmd_select(const RunConfig& cfg, const fs::path& run, SelectMode mode,
                std::optional<std::size_t> n) {
  const World world = load_checked_world(run, cfg);
  const auto inputs = selection_inputs(world);
  const auto kept = load_screened(run, world, cfg);
  const auto segments = segment_samples(load_partition(run, cfg), kept);
  const auto threshold = derive_threshold(inputs.reference_scores);
  fs::create_directories(corpora_dir(run));
  fs::create_directories(models_dir(run));
  Corpus corpus;
  switch (mode) {
    case SelectMode::kOurs: {
      const auto est = estimator(run, "subset", inputs, segments.front(), cfg);
      auto loop = run_loop(segments, est, threshold, inputs.proxy, "ours");
      std::ostringstream reports;
      for (const auto& r : loop.reports) {
        ordered_json j = {{"k", r.k},
                          {"candidates", r.candidates},
                          {"passed_quality", r.passed_quality},
                          {"informative", r.informative},
                          {"added", r.added},
                          {"corpus_size_after", r.corpus_size_after}};
        reports << j.dump() << "\n";
      }
      write_artifact(corpora_dir(run) / "ours.reports.jsonl", reports.str(), cfg);
      const std::string comment = provenance_comment(cfg);
      save_decision_log(corpora_dir(run) / "ours.decisions.csv", loop.decisions,
                        std::span(&comment, 1));
      corpus = std::move(loop.corpus);
      break;
    }
    case SelectMode::kInitial: {
      const auto est = estimator(run, "subset", inputs, segments.front(), cfg);
      corpus = build_initial_corpus(segments.front(), est, threshold, "initial").corpus;
      break;
    }
    case SelectMode::kBaseline: {
      const auto ours_path = corpora_dir(run) / "ours.jsonl";
      std::size_t size;
      if (fs::exists(ours_path)) {
        size = load_corpus(run, "ours", cfg).size();
        if (n && *n != size)
          throw ValidationError("baseline size " + std::to_string(*n) +
                                " differs from the Ours corpus size " + std::to_string(size));
      } else if (n) {
        size = *n;
      } else {
        throw ValidationError("missing artifact: " + ours_path.string() +
                              " (run select --mode ours first, or pass --n)");
      }
      const auto est = estimator(run, "full", inputs, kept, cfg);
      corpus = baseline_select(kept, est, size, "baseline");
      break;
    }
    case SelectMode::kUnselected: {
      std::vector<CorpusEntry> all;
      for (const auto& s : kept) all.push_back({s.sample_id, 1});
      corpus = Corpus("unselected", std::move(all));
      break;
    }
  }
  save_corpus(run, corpus, cfg);
  std::cout << "select " << method_name(mode) << ": " << corpus.size() << " samples\n";
}

void cmd_sg_train(const RunConfig& cfg, const fs::path& run, SgModel model) {
  const World world = load_checked_world(run, cfg);
  const auto data = prepare_latents(world, cfg);
  fs::create_directories(models_dir(run));
  save_latents(run, data, cfg);
  if (model == SgModel::kDiffusion) {
    const auto result = train_diffusion(data, cfg);
    write_artifact(models_dir(run) / "diffusion.json",
                   diffusion_model_to_json(result.net, schedule_for(cfg)), cfg);
    const std::string comment = provenance_comment(cfg);
    save_loss_curve(models_dir(run) / "loss_curve.csv", result.curve, std::span(&comment, 1));
    std::cout << "sg-train diffusion: d'=" << data.d_prime() << ", " << result.curve.size()
              << " epochs, best " << result.best_epoch << "\n";
  } else {
    const auto fits = fit_gmms(data, cfg);
    for (const auto& fit : fits)
      write_artifact(gmm_path(run, fit.model.components()), gmm_to_json(fit, cfg.gmm_space),
                     cfg);
    std::cout << "sg-train gmm: d'=" << data.d_prime() << ", M=1.." << fits.size() << "\n";
  }
}

void cmd_sg_sample(const RunConfig& cfg, const fs::path& run, SgModel model,
                   std::optional<std::size_t> n, std::optional<std::size_t> components) {
  const World world = load_checked_world(run, cfg);
  const auto data = load_latents(run, world, cfg);
  const std::size_t count = n.value_or(data.split.test.size());
  Rng rng(cfg.stage_seed(kSampleSeed));
  EmbeddingSet generated(world.config.embed_dim);
  std::string name;
  if (model == SgModel::kDiffusion) {
    const auto [net, schedule] =
        diffusion_model_from_json(read_artifact(models_dir(run) / "diffusion.json", cfg));
    generated = generate_speakers(data.whitening, net, schedule, count, rng);
    name = "generated-diffusion.csv";
  } else {
    const std::size_t m = components.value_or(cfg.gmm_max_components);
    const auto gmm = gmm_from_json(read_artifact(gmm_path(run, m), cfg));
    const auto draws = gmm_sample(gmm, count, rng);
    const std::size_t p = gmm.dim();
    std::vector<double> z(data.whitening.z_dim());
    for (std::size_t i = 0; i < count; ++i) {
      const auto row = std::span(draws).subspan(i * p, p);
      if (cfg.gmm_space == "x") {
        generated.add({"gen-" + std::to_string(i), std::vector<double>(row.begin(), row.end())});
      } else {
        rng.fill_normal(z);
        generated.add({"gen-" + std::to_string(i), unwhiten(data.whitening, row, z)});
      }
    }
    name = "generated-gmm-" + std::to_string(m) + ".csv";
  }
  const std::string comment = provenance_comment(cfg);
  save_embeddings(models_dir(run) / name, generated, std::span(&comment, 1));
  std::cout << "sg-sample: " << generated.size() << " speakers -> " << name << "\n";
}

void cmd_eval(const RunConfig& cfg, const fs::path& run) {
  const World world = load_checked_world(run, cfg);
  const double theta = derive_threshold(world.reference_scores).theta_hq.value();
  const auto edges = cfg.histogram_edges();

  std::vector<MethodEvaluation> evals;
  for (const char* m : kMethods) evals.push_back(evaluate_corpus(world, load_corpus(run, m, cfg), theta, cfg));

  std::string hq = "method,corpus_size,speakers,hq_speakers,hq_ratio,mst_w,tail_fraction\n";
  for (const auto& e : evals)
    hq += e.method + "," + std::to_string(e.corpus_size) + "," + std::to_string(e.scores.size()) +
          "," + std::to_string(e.hq_speakers) + "," + format_double(e.hq_ratio) + "," +
          format_double(e.mst_w) + "," + format_double(e.tail_fraction) + "\n";
  write_csv(reports_dir(run) / "hq_table.csv", cfg, hq);

  std::string hist = "edge";
  for (const auto& e : evals) hist += "," + e.method;
  hist += "\n";
  for (std::size_t i = 0; i < edges.size(); ++i) {
    hist += format_double(edges[i]);
    for (const auto& e : evals) hist += "," + std::to_string(e.cumulative[i]);
    hist += "\n";
  }
  write_csv(reports_dir(run) / "cumhist.csv", cfg, hist);

  std::string scores = "source_id";
  for (const auto& e : evals) scores += "," + e.method;
  scores += "\n";
  for (std::size_t v = 0; v < world.videos.size(); ++v) {
    scores += world.videos[v].source_id;
    for (const auto& e : evals) scores += "," + format_double(e.scores[v]);
    scores += "\n";
  }
  write_csv(reports_dir(run) / "speaker_scores.csv", cfg, scores);

  const auto subset = KnnQualityEstimator::from_json(read_artifact(models_dir(run) / "estimator-subset.json", cfg));
  const auto full = KnnQualityEstimator::from_json(read_artifact(models_dir(run) / "estimator-full.json", cfg));
  const auto corr = estimator_correlation(world, subset, full, cfg);
  write_csv(reports_dir(run) / "estimator_corr.csv", cfg,
            "query_points,subset_size,full_size,pearson\n" + std::to_string(corr.query_points) +
                "," + std::to_string(corr.subset_size) + "," + std::to_string(corr.full_size) +
                "," + format_double(corr.pearson) + "\n");

  const auto data = load_latents(run, world, cfg);
  const auto [net, schedule] =
      diffusion_model_from_json(read_artifact(models_dir(run) / "diffusion.json", cfg));
  std::vector<GmmModel> gmms;
  for (std::size_t m = 1; m <= cfg.gmm_max_components; ++m)
    gmms.push_back(gmm_from_json(read_artifact(gmm_path(run, m), cfg)));
  std::string w1 = "model,m,mean,std,runs\n";
  for (const auto& row : w1_versus_models(data, net, schedule, gmms, cfg))
    w1 += row.model + "," + (row.components ? std::to_string(row.components) : row.model) + "," +
          format_double(row.stats.mean) + "," + format_double(row.stats.std) + "," +
          std::to_string(row.stats.runs) + "\n";
  write_csv(reports_dir(run) / "w1_vs_model.csv", cfg, w1);

  const auto triple = world_distance_triple(world, data, net, schedule, cfg);
  const auto& ref = kReportedDistanceTriple;
  const std::string n = std::to_string(triple.set_size);
  write_csv(reports_dir(run) / "distance_triple.csv", cfg,
            "quantity,value,published_value,set_size\n"
            "d_RR," + format_double(triple.triple.d_rr) + "," + format_double(ref.d_rr) + "," + n + "\n"
            "d_GG," + format_double(triple.triple.d_gg) + "," + format_double(ref.d_gg) + "," + n + "\n"
            "d_RG," + format_double(triple.triple.d_rg) + "," + format_double(ref.d_rg) + "," + n + "\n");
  std::cout << "eval: reports written to " << reports_dir(run).string() << "\n";
}

void cmd_report(const RunConfig& cfg, const fs::path& run) {
  const auto dir = reports_dir(run);
  std::ostringstream out;
  out << "run " << cfg.name << "  config " << cfg.hash() << "  seed " << cfg.seed << "\n\n";

  const auto hq = read_csv(dir / "hq_table.csv", cfg);
  char line[256];
  out << "High-quality speakers under ground-truth evaluation\n";
  std::snprintf(line, sizeof line, "%-12s %10s %10s %10s %12s %10s\n", "method", "corpus", "hq spk",
                "hq ratio", "MST w", "tail");
  out << line;
  for (const auto& r : hq.rows) {
    std::snprintf(line, sizeof line, "%-12s %10s %10s %10.4f %12.2f %10.4f\n", r[0].c_str(),
                  r[1].c_str(), r[3].c_str(), number(r[4], dir), number(r[5], dir), number(r[6], dir));
    out << line;
  }

  const auto w1 = read_csv(dir / "w1_vs_model.csv", cfg);
  out << "\nWasserstein-1 to held-out speakers (mean +- 2 std)\n";
  svg::Series gmm_series{"GMM", {}, {}, {}, false};
  svg::Series diff_series{"diffusion", {}, {}, {}, false};
  for (const auto& r : w1.rows) {
    const double mean = number(r[2], dir), sd = number(r[3], dir);
    std::snprintf(line, sizeof line, "%-10s %-10s %10.4f +- %.4f\n", r[0].c_str(), r[1].c_str(), mean,
                  2 * sd);
    out << line;
    if (r[0] == "gmm") {
      gmm_series.xs.push_back(number(r[1], dir));
      gmm_series.ys.push_back(mean);
      gmm_series.errors.push_back(2 * sd);
    } else {
      diff_series.ys.push_back(mean);
      diff_series.errors.push_back(2 * sd);
    }
  }
  if (!gmm_series.xs.empty() && !diff_series.ys.empty()) {
    const double y = diff_series.ys.front(), e = diff_series.errors.front();
    diff_series.xs = {gmm_series.xs.front(), gmm_series.xs.back()};
    diff_series.ys = {y, y};
    diff_series.errors = {e, e};
  }
  write_file(dir / "w1_vs_model.svg",
             svg::render({"W1 to test speakers", "GMM components M", "W1", {gmm_series, diff_series}}));

  const auto hist = read_csv(dir / "cumhist.csv", cfg);
  std::vector<svg::Series> curves;
  for (std::size_t c = 1; c < hist.header.size(); ++c) {
    svg::Series s{hist.header[c], {}, {}, {}, true};
    for (const auto& r : hist.rows) {
      s.xs.push_back(number(r[0], dir));
      s.ys.push_back(number(r[c], dir));
    }
    curves.push_back(std::move(s));
  }
  write_file(dir / "cumhist.svg", svg::render({"Cumulative histogram of synthesis quality",
                                               "pseudo-MOS", "speakers at or below", curves}));

  const auto triple = read_csv(dir / "distance_triple.csv", cfg);
  out << "\nLatent-space distances (this run / published)\n";
  for (const auto& r : triple.rows) {
    std::snprintf(line, sizeof line, "%-6s %12.4f %12.3f\n", r[0].c_str(), number(r[1], dir),
                  number(r[2], dir));
    out << line;
  }

  const auto corr = read_csv(dir / "estimator_corr.csv", cfg);
  out << "\nEstimator agreement, subset vs full fit\n";
  for (const auto& r : corr.rows)
    out << "pearson r = " << r[3] << " on " << r[0] << " query speakers (" << r[1] << " vs " << r[2]
        << " labelled samples)\n";

  write_file(dir / "summary.txt", out.str());
  std::cout << out.str();
}

void run_all(const RunConfig& cfg, const fs::path& run) {
  cmd_world(cfg, run);
  cmd_plan(cfg, run);
  cmd_screen(cfg, run);
  cmd_select(cfg, run, SelectMode::kUnselected);
  cmd_select(cfg, run, SelectMode::kInitial);
  cmd_select(cfg, run, SelectMode::kOurs);
  cmd_select(cfg, run, SelectMode::kBaseline);
  cmd_sg_train(cfg, run, SgModel::kDiffusion);
  cmd_sg_train(cfg, run, SgModel::kGmm);
  cmd_sg_sample(cfg, run, SgModel::kDiffusion);
  cmd_eval(cfg, run);
  cmd_report(cfg, run);
}

}  // namespace alcorpus::pipeline
