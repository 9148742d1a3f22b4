#pragma once

// Run-directory commands behind the CLI. Each command reads the artifacts of
// earlier commands, checks that they were produced under the same config hash,
// and writes its own artifacts:
//
//   <run>/config.json
//   <run>/world/     world.json videos.csv
//   <run>/plan/      partition.json sources.txt screened.txt rejections.csv
//   <run>/corpora/   <method>.jsonl, ours.reports.jsonl, ours.decisions.csv
//   <run>/models/    estimator-*.json whitening.json diffusion.json gmm-<M>.json ...
//   <run>/reports/   *.csv *.svg summary.txt
//
// JSON and JSON-lines artifacts get a "<file>.meta.json" sidecar carrying the
// config hash and seed; CSV artifacts carry them in a leading '#' line.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "alcorpus/experiment.hpp"

namespace alcorpus::pipeline {

namespace fs = std::filesystem;

enum class SelectMode { kOurs, kBaseline, kInitial, kUnselected };
enum class SgModel { kDiffusion, kGmm };

SelectMode parse_select_mode(std::string_view s);
SgModel parse_sg_model(std::string_view s);

/// "# config_hash=<hash> seed=<seed>"
std::string provenance_line(const RunConfig& cfg);

void cmd_world(const RunConfig& cfg, const fs::path& run);
void cmd_plan(const RunConfig& cfg, const fs::path& run);
void cmd_screen(const RunConfig& cfg, const fs::path& run);
/// For the baseline, n defaults to the size of corpora/ours.jsonl; an explicit
/// n that disagrees with an existing Ours corpus is rejected.
void cmd_select(const RunConfig& cfg, const fs::path& run, SelectMode mode,
                std::optional<std::size_t> n = std::nullopt);
void cmd_sg_train(const RunConfig& cfg, const fs::path& run, SgModel model);
/// Generated embeddings in the original space; n defaults to the test split size.
void cmd_sg_sample(const RunConfig& cfg, const fs::path& run, SgModel model,
                   std::optional<std::size_t> n = std::nullopt,
                   std::optional<std::size_t> components = std::nullopt);
void cmd_eval(const RunConfig& cfg, const fs::path& run);
void cmd_report(const RunConfig& cfg, const fs::path& run);

/// Every command in order.
void run_all(const RunConfig& cfg, const fs::path& run);

/// Report CSV names produced by cmd_eval.
inline constexpr const char* kReportFiles[] = {"hq_table.csv", "cumhist.csv", "w1_vs_model.csv",
                                               "distance_triple.csv", "estimator_corr.csv"};

}  // namespace alcorpus::pipeline
