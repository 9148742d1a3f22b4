#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "alcorpus/embedding.hpp"

namespace alcorpus {

struct ScreeningThresholds {
  double min_alignment = -std::numeric_limits<double>::infinity();
  double max_group_variance = std::numeric_limits<double>::infinity();

  void validate() const;
};

enum class RejectReason { kLowAlignment, kHighGroupVariance };

std::string_view reason_name(RejectReason reason);

struct Rejection {
  DataSample sample;
  RejectReason reason;
};

struct ScreeningResult {
  std::vector<DataSample> kept;
  std::vector<Rejection> rejected;
};

/// Mean squared Euclidean deviation from the centroid, (1/n) sum ||v_i - mean||^2.
double intra_group_variance(std::span<const std::vector<double>> vectors);

/// Keeps samples whose alignment clears min_alignment and whose source group
/// variance is within max_group_variance. Group variance is judged once per
/// source_id (the maximum recorded over that source's samples), so a source is
/// accepted or rejected as a whole on that criterion. A sample failing both
/// checks is reported as LOW_ALIGNMENT. Input order is preserved in both lists.
ScreeningResult screen(std::span<const DataSample> pool, const ScreeningThresholds& thresholds);

/// CSV "sample_id,reason".
void save_rejection_log(const std::filesystem::path& path, std::span<const Rejection> rejected,
                        std::span<const std::string> comments = {});

}  // namespace alcorpus
