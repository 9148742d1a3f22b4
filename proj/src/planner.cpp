#include "alcorpus/planner.hpp"

#include <cmath>
#include <fstream>
#include <span>
#include <unordered_set>

#include "alcorpus/errors.hpp"
#include "alcorpus/random.hpp"
#include "alcorpus/text.hpp"
#include "json.hpp"

namespace alcorpus {

void PartitionPlan::validate() const {
  if (ratios.empty()) throw ValidationError("partition plan needs at least one segment");
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ValidationError("partition ratios must lie in (0, 1]");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError("partition ratios sum to " + text::format_double(total) + ", not 1");
}

SourcePartition shuffle_and_partition(std::vector<std::string> ids, const PartitionPlan& plan) {
  plan.validate();
  if (ids.empty()) throw ValidationError("cannot partition an empty source list");
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw ValidationError("duplicate source id '" + id + "'");

  Rng rng(plan.seed);
  rng.shuffle(std::span<std::string>(ids));

  const std::size_t n = ids.size();
  SourcePartition out;
  out.seed = plan.seed;
  std::size_t begin = 0;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < plan.ratios.size(); ++k) {
    cumulative += plan.ratios[k];
    std::size_t end = k + 1 == plan.ratios.size()
                          ? n
                          : static_cast<std::size_t>(std::llround(cumulative * static_cast<double>(n)));
    end = std::min(std::max(end, begin), n);
    out.segments.emplace_back(std::make_move_iterator(ids.begin() + begin),
                              std::make_move_iterator(ids.begin() + end));
    begin = end;
  }
  return out;
}

std::vector<std::string> load_source_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open source list " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto id = text::trim(line);
    if (!id.empty()) ids.emplace_back(id);
  }
  return ids;
}

void save_source_list(const std::filesystem::path& path, const std::vector<std::string>& ids) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& id : ids) out << id << '\n';
}

std::string partition_to_json(const SourcePartition& partition) {
  nlohmann::ordered_json j;
  j["segments"] = partition.segments;
  j["seed"] = partition.seed;
  return j.dump();
}

SourcePartition partition_from_json(const std::string& json) {
  try {
    const auto j = nlohmann::json::parse(json);
    SourcePartition p;
    p.segments = j.at("segments").get<std::vector<std::vector<std::string>>>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad partition file: ") + e.what(), 0);
  }
}

}  // namespace alcorpus
