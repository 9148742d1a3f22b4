#include "alcorpus/prescreen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "alcorpus/errors.hpp"
#include "alcorpus/kernels.hpp"

namespace alcorpus {

void ScreeningThresholds::validate() const {
  if (std::isnan(min_alignment)) throw ValidationError("min_alignment is NaN");
  if (!(max_group_variance >= 0.0))
    throw ValidationError("max_group_variance must be nonnegative");
}

std::string_view reason_name(RejectReason reason) {
  return reason == RejectReason::kLowAlignment ? "LOW_ALIGNMENT" : "HIGH_GROUP_VARIANCE";
}

double intra_group_variance(std::span<const std::vector<double>> vectors) {
  if (vectors.empty()) throw ValidationError("intra_group_variance: empty group");
  const std::size_t dim = vectors.front().size();
  std::vector<double> centroid(dim, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != dim) throw ValidationError("intra_group_variance: mixed dimensions");
    kernels::axpy(1.0, v, centroid);
  }
  const double inv_n = 1.0 / static_cast<double>(vectors.size());
  for (double& c : centroid) c *= inv_n;
  double total = 0.0;
  for (const auto& v : vectors) total += kernels::squared_distance(v, centroid);
  return total * inv_n;
}

ScreeningResult screen(std::span<const DataSample> pool, const ScreeningThresholds& thresholds) {
  thresholds.validate();
  validate_pool(pool);
  std::unordered_map<std::string_view, double> source_variance;
  for (const auto& s : pool) {
    auto [it, inserted] = source_variance.try_emplace(s.source_id, s.screening.group_variance);
    if (!inserted) it->second = std::max(it->second, s.screening.group_variance);
  }
  ScreeningResult result;
  for (const auto& s : pool) {
    if (!(s.screening.alignment_score >= thresholds.min_alignment)) {
      result.rejected.push_back({s, RejectReason::kLowAlignment});
    } else if (source_variance.at(s.source_id) > thresholds.max_group_variance) {
      result.rejected.push_back({s, RejectReason::kHighGroupVariance});
    } else {
      result.kept.push_back(s);
    }
  }
  return result;
}

void save_rejection_log(const std::filesystem::path& path, std::span<const Rejection> rejected,
                        std::span<const std::string> comments) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "sample_id,reason\n";
  for (const auto& r : rejected) out << r.sample.sample_id << ',' << reason_name(r.reason) << '\n';
}

}  // namespace alcorpus
