#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace alcorpus {

/// How the master source list is split across acquisition iterations.
struct PartitionPlan {
  std::vector<double> ratios;  // r_1..r_K, each in (0, 1], summing to 1
  std::uint64_t seed = 0;

  std::size_t segment_count() const { return ratios.size(); }
  void validate() const;
};

struct SourcePartition {
  std::vector<std::vector<std::string>> segments;  // D_1..D_K
  std::uint64_t seed = 0;
};

/// Shuffles `ids` with a seeded Fisher-Yates pass and cuts the permutation at
/// round(N * (r_1 + ... + r_k)); the last segment takes the remainder.
SourcePartition shuffle_and_partition(std::vector<std::string> ids, const PartitionPlan& plan);

/// One id per line; blank lines are skipped.
std::vector<std::string> load_source_list(const std::filesystem::path& path);
void save_source_list(const std::filesystem::path& path, const std::vector<std::string>& ids);

/// {"segments": [[ids...], ...], "seed": s}
std::string partition_to_json(const SourcePartition& partition);
SourcePartition partition_from_json(const std::string& json);

}  // namespace alcorpus
