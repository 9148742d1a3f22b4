// alcorpus: corpus-construction and speaker-generation experiments on a
// synthetic candidate pool.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "alcorpus/errors.hpp"
#include "alcorpus/kernels.hpp"
#include "alcorpus/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace alcorpus;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string run_dir;
};

RunConfig load_config(const Common& c, bool fresh) {
  std::string json = "{}";
  fs::path path = c.config_path;
  // Later commands default to the config recorded by `world`.
  if (path.empty() && !fresh && !c.run_dir.empty() && fs::exists(fs::path(c.run_dir) / "config.json"))
    path = fs::path(c.run_dir) / "config.json";
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    json = buf.str();
  }
  RunConfig cfg = RunConfig::from_json(json);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

fs::path run_path(const Common& c, const RunConfig& cfg) {
  return c.run_dir.empty() ? fs::path("runs") / cfg.name : fs::path(c.run_dir);
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "run config JSON (keys omitted keep their defaults)");
  cmd->add_option("--seed", c.seed, "master seed, overrides the config");
  cmd->add_option("--run-dir", c.run_dir, "run directory (default runs/<name>)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-learning corpus construction and speaker generation on a synthetic pool"};
  app.require_subcommand(1);
  std::string simd;
  app.add_option("--simd", simd, "kernel backend: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  Common common;
  std::string mode, model;
  std::optional<std::size_t> n, components;

  auto* world = app.add_subcommand("world", "generate the synthetic world");
  auto* plan = app.add_subcommand("plan", "shuffle sources and partition them into D_1..D_K");
  auto* scr = app.add_subcommand("screen", "alignment and group-variance pre-screening");
  auto* select = app.add_subcommand("select", "build a corpus");
  select->add_option("--mode", mode, "ours | baseline | initial | unselected")
      ->required()
      ->check(CLI::IsMember({"ours", "baseline", "initial", "unselected"}));
  select->add_option("--n", n, "baseline size (must equal the Ours size when that exists)");
  auto* sg_train = app.add_subcommand("sg-train", "fit a speaker-generation model");
  sg_train->add_option("--model", model, "diffusion | gmm")
      ->required()
      ->check(CLI::IsMember({"diffusion", "gmm"}));
  auto* sg_sample = app.add_subcommand("sg-sample", "sample new speaker embeddings");
  sg_sample->add_option("--model", model, "diffusion | gmm")
      ->default_val("diffusion")
      ->check(CLI::IsMember({"diffusion", "gmm"}));
  sg_sample->add_option("--n", n, "number of speakers (default: test split size)");
  sg_sample->add_option("--components", components, "GMM component count (default: largest)");
  auto* eval = app.add_subcommand("eval", "ground-truth evaluation and report CSVs");
  auto* report = app.add_subcommand("report", "summary table and SVG charts from the CSVs");
  auto* run = app.add_subcommand("run", "every command in order");
  auto* defaults = app.add_subcommand("defaults", "print the default run config");
  for (auto* cmd : {world, plan, scr, select, sg_train, sg_sample, eval, report, run})
    add_common(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simd == "scalar") kernels::set_backend(kernels::Backend::kScalar);
    if (simd == "avx2") kernels::set_backend(kernels::Backend::kAvx2);

    if (*defaults) {
      std::cout << nlohmann::ordered_json::parse(RunConfig().to_json()).dump(2) << "\n";
      return 0;
    }
    const bool fresh = *world || *run;
    const RunConfig cfg = load_config(common, fresh);
    const fs::path dir = run_path(common, cfg);
    using namespace pipeline;
    if (*world) cmd_world(cfg, dir);
    if (*plan) cmd_plan(cfg, dir);
    if (*scr) cmd_screen(cfg, dir);
    if (*select) cmd_select(cfg, dir, parse_select_mode(mode), n);
    if (*sg_train) cmd_sg_train(cfg, dir, parse_sg_model(model));
    if (*sg_sample) cmd_sg_sample(cfg, dir, parse_sg_model(model), n, components);
    if (*eval) cmd_eval(cfg, dir);
    if (*report) cmd_report(cfg, dir);
    if (*run) run_all(cfg, dir);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
