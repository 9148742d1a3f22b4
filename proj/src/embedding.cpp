#include "alcorpus/embedding.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <unordered_set>

#include "alcorpus/errors.hpp"
#include "alcorpus/text.hpp"
#include "json.hpp"

namespace alcorpus {

EmbeddingSet::EmbeddingSet(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

EmbeddingSet::EmbeddingSet(std::size_t dim, std::vector<Embedding> items) : EmbeddingSet(dim) {
  items_.reserve(items.size());
  std::unordered_set<std::string> seen;
  for (auto& item : items) {
    if (!seen.insert(item.speaker_id).second)
      throw ValidationError("duplicate speaker id '" + item.speaker_id + "'");
    if (item.vector.size() != dim_)
      throw ValidationError("embedding '" + item.speaker_id + "' has dimension " +
                            std::to_string(item.vector.size()) + ", expected " +
                            std::to_string(dim_));
    for (double v : item.vector)
      if (!std::isfinite(v))
        throw ValidationError("embedding '" + item.speaker_id + "' has a non-finite component");
    items_.push_back(std::move(item));
  }
}

void EmbeddingSet::add(Embedding item) {
  if (item.vector.size() != dim_)
    throw ValidationError("embedding '" + item.speaker_id + "' has dimension " +
                          std::to_string(item.vector.size()) + ", expected " +
                          std::to_string(dim_));
  for (double v : item.vector)
    if (!std::isfinite(v))
      throw ValidationError("embedding '" + item.speaker_id + "' has a non-finite component");
  for (const auto& existing : items_)
    if (existing.speaker_id == item.speaker_id)
      throw ValidationError("duplicate speaker id '" + item.speaker_id + "'");
  items_.push_back(std::move(item));
}

std::vector<double> EmbeddingSet::flat() const {
  std::vector<double> out;
  out.reserve(items_.size() * dim_);
  for (const auto& item : items_) out.insert(out.end(), item.vector.begin(), item.vector.end());
  return out;
}

void validate_pool(std::span<const DataSample> pool) {
  std::unordered_set<std::string_view> ids;
  const std::size_t dim = pool.empty() ? 0 : pool.front().speaker_embedding.vector.size();
  for (const auto& s : pool) {
    if (!ids.insert(s.sample_id).second)
      throw ValidationError("duplicate sample id '" + s.sample_id + "' in candidate pool");
    if (!(s.duration_sec >= 0.0))
      throw ValidationError("sample '" + s.sample_id + "' has negative duration");
    if (s.speaker_embedding.vector.size() != dim)
      throw ValidationError("sample '" + s.sample_id + "' has mismatched embedding dimension");
    if (!(s.screening.group_variance >= 0.0))
      throw ValidationError("sample '" + s.sample_id + "' has negative group variance");
  }
}

Corpus::Corpus(std::string name, std::vector<CorpusEntry> entries)
    : name_(std::move(name)), entries_(std::move(entries)) {
  std::unordered_set<std::string_view> seen;
  int last = 1;
  for (const auto& e : entries_) {
    if (e.iteration < 1) throw ValidationError("corpus iteration must be >= 1");
    if (e.iteration < last)
      throw ValidationError("corpus iterations must be non-decreasing in append order");
    last = e.iteration;
    if (!seen.insert(e.sample_id).second)
      throw ValidationError("duplicate sample id '" + e.sample_id + "' in corpus");
  }
}

bool Corpus::contains(const std::string& sample_id) const {
  for (const auto& e : entries_)
    if (e.sample_id == sample_id) return true;
  return false;
}

std::vector<std::string> Corpus::sample_ids() const {
  std::vector<std::string> ids;
  ids.reserve(entries_.size());
  for (const auto& e : entries_) ids.push_back(e.sample_id);
  return ids;
}

Corpus corpus_merge(const Corpus& base, std::span<const std::string> additions, int k) {
  std::unordered_set<std::string_view> present;
  for (const auto& e : base.entries()) present.insert(e.sample_id);
  std::vector<std::string> offenders;
  for (const auto& id : additions)
    if (!present.insert(id).second) offenders.push_back(id);
  if (!offenders.empty()) {
    std::string msg = "corpus_merge: duplicate sample ids:";
    for (const auto& id : offenders) msg += " " + id;
    throw ValidationError(msg);
  }
  std::vector<CorpusEntry> entries = base.entries();
  entries.reserve(entries.size() + additions.size());
  for (const auto& id : additions) entries.push_back({id, k});
  return Corpus(base.name(), std::move(entries));
}

EmbeddingSet read_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("missing '# dim=<d>' header", 1);
  ++line_no;
  const std::string_view header = text::trim(line);
  constexpr std::string_view kPrefix = "# dim=";
  if (header.substr(0, kPrefix.size()) != kPrefix)
    throw ParseError("expected '# dim=<d>' header", line_no);
  const auto dim_value = text::parse_double(header.substr(kPrefix.size()));
  if (!dim_value || *dim_value < 1 || *dim_value != std::floor(*dim_value))
    throw ParseError("invalid dimension in header", line_no);
  EmbeddingSet set(static_cast<std::size_t>(*dim_value));

  std::unordered_set<std::string> seen;
  std::vector<Embedding> items;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = text::trim(line);
    if (row.empty() || row.front() == '#') continue;
    const auto fields = text::split(row, ',');
    if (fields.size() != set.dim() + 1)
      throw ParseError("expected " + std::to_string(set.dim() + 1) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    Embedding e{std::string(text::trim(fields[0])), {}};
    if (e.speaker_id.empty()) throw ParseError("empty speaker id", line_no);
    e.vector.reserve(set.dim());
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto v = text::parse_double(fields[i]);
      if (!v) throw ParseError("non-numeric value '" + std::string(fields[i]) + "'", line_no);
      e.vector.push_back(*v);
    }
    if (!seen.insert(e.speaker_id).second)
      throw ValidationError("duplicate speaker id '" + e.speaker_id + "' at line " +
                            std::to_string(line_no));
    items.push_back(std::move(e));
  }
  return EmbeddingSet(set.dim(), std::move(items));
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embedding file " + path.string());
  return read_embeddings(in);
}

void write_embeddings(std::ostream& out, const EmbeddingSet& set,
                      std::span<const std::string> comments) {
  out << "# dim=" << set.dim() << '\n';
  for (const auto& c : comments) out << "# " << c << '\n';
  for (const auto& item : set.items()) {
    out << item.speaker_id;
    for (double v : item.vector) out << ',' << text::format_double(v);
    out << '\n';
  }
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set,
                     std::span<const std::string> comments) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_embeddings(out, set, comments);
}

Corpus read_corpus_manifest(std::istream& in, std::string name) {
  std::vector<CorpusEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      entries.push_back({obj.at("sample_id").get<std::string>(), obj.at("iteration").get<int>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad manifest entry: ") + e.what(), line_no);
    }
  }
  return Corpus(std::move(name), std::move(entries));
}

Corpus load_corpus_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus manifest " + path.string());
  return read_corpus_manifest(in, path.stem().string());
}

void write_corpus_manifest(std::ostream& out, const Corpus& corpus) {
  for (const auto& e : corpus.entries()) {
    nlohmann::ordered_json obj = {{"sample_id", e.sample_id}, {"iteration", e.iteration}};
    out << obj.dump() << '\n';
  }
}

void save_corpus_manifest(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_corpus_manifest(out, corpus);
}

}  // namespace alcorpus
