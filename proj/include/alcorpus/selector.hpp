#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "alcorpus/embedding.hpp"
#include "alcorpus/quality.hpp"

namespace alcorpus {

struct IterationReport {
  int k = 1;
  std::size_t candidates = 0;
  std::size_t passed_quality = 0;
  std::size_t informative = 0;
  std::size_t added = 0;
  std::size_t corpus_size_after = 0;

  friend bool operator==(const IterationReport&, const IterationReport&) = default;
};

enum class Decision { kAdded, kLowQuality, kRedundant };

std::string_view decision_name(Decision decision);

/// Oracle values behind one accept/reject call, kept so every decision can be
/// re-checked after the fact. zero_shot_quality is NaN when the synthesis
/// check was not run (iteration 1).
struct DecisionRecord {
  std::string sample_id;
  int k = 1;
  double predicted_quality = 0.0;
  double zero_shot_quality = 0.0;
  Decision decision = Decision::kLowQuality;
};

struct SelectionStep {
  Corpus corpus;
  IterationReport report;
  std::vector<DecisionRecord> decisions;
};

/// C_1: every screened sample whose predicted quality strictly exceeds theta.
SelectionStep build_initial_corpus(std::span<const DataSample> screened,
                                   const KnnQualityEstimator& estimator,
                                   const QualityThreshold& threshold,
                                   std::string corpus_name = "ours");

/// C_k = C_{k-1} plus the segment samples with predicted quality > theta and
/// proxy zero-shot quality < theta (both strict). `proxy` must model C_{k-1}.
SelectionStep acquisition_step(const Corpus& previous, std::span<const DataSample> segment,
                               const KnnQualityEstimator& estimator, const CoverageProxy& proxy,
                               const QualityThreshold& threshold, int k);

struct LoopResult {
  Corpus corpus;
  std::vector<IterationReport> reports;
  std::vector<DecisionRecord> decisions;
};

/// Initial corpus from segments[0], then one acquisition step per remaining
/// segment, rebuilding the coverage proxy from the current corpus before each
/// step. Segments are visited once; rejected samples are not reconsidered.
LoopResult run_loop(std::span<const std::vector<DataSample>> screened_segments,
                    const KnnQualityEstimator& estimator, const QualityThreshold& threshold,
                    const ProxyParams& proxy_params, std::string corpus_name = "ours");

/// Top-n of `pool` by predicted quality (descending, ties by sample_id
/// ascending), tagged iteration 1.
Corpus baseline_select(std::span<const DataSample> pool, const KnnQualityEstimator& estimator,
                       std::size_t n, std::string corpus_name = "baseline");

/// JSON lines, one object per report.
void save_iteration_reports(const std::filesystem::path& path,
                            std::span<const IterationReport> reports);
std::vector<IterationReport> load_iteration_reports(const std::filesystem::path& path);

/// CSV "sample_id,predicted_quality,zero_shot_quality,decision".
void save_decision_log(const std::filesystem::path& path, std::span<const DecisionRecord> records,
                       std::span<const std::string> comments = {});

}  // namespace alcorpus
