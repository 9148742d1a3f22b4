#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace alcorpus {

/// One speaker's identity vector.
struct Embedding {
  std::string speaker_id;
  std::vector<double> vector;

  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Embeddings sharing one dimension, with unique ids, in insertion order.
class EmbeddingSet {
 public:
  explicit EmbeddingSet(std::size_t dim);
  EmbeddingSet(std::size_t dim, std::vector<Embedding> items);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<Embedding>& items() const { return items_; }
  const Embedding& operator[](std::size_t i) const { return items_[i]; }

  /// Throws ValidationError on dimension mismatch, non-finite values or a
  /// repeated id.
  void add(Embedding item);

  /// Row-major copy of all vectors, size() x dim().
  std::vector<double> flat() const;

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  std::size_t dim_;
  std::vector<Embedding> items_;
};

/// Pre-screening attributes attached to each candidate sample.
struct ScreeningMetrics {
  double alignment_score = 0.0;  // higher is better aligned
  double group_variance = 0.0;   // intra-source embedding variance, >= 0

  friend bool operator==(const ScreeningMetrics&, const ScreeningMetrics&) = default;
};

/// A candidate training utterance. speaker_embedding is the per-source
/// (video) average, so samples of one source share it.
struct DataSample {
  std::string sample_id;
  std::string source_id;
  Embedding speaker_embedding;
  double duration_sec = 0.0;
  ScreeningMetrics screening;

  friend bool operator==(const DataSample&, const DataSample&) = default;
};

/// Checks DataSample invariants over a pool: unique sample ids, nonnegative
/// durations, one embedding dimension.
void validate_pool(std::span<const DataSample> pool);

struct CorpusEntry {
  std::string sample_id;
  int iteration = 1;

  friend bool operator==(const CorpusEntry&, const CorpusEntry&) = default;
};

/// A selected training set with the iteration each entry joined at.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::string name, std::vector<CorpusEntry> entries = {});

  const std::string& name() const { return name_; }
  const std::vector<CorpusEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(const std::string& sample_id) const;

  std::vector<std::string> sample_ids() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  std::string name_;
  std::vector<CorpusEntry> entries_;
};

/// base plus `additions` tagged with iteration k. Throws ValidationError
/// listing every id already present (or repeated within additions), or if k
/// would break the non-decreasing iteration order.
Corpus corpus_merge(const Corpus& base, std::span<const std::string> additions, int k);

// File formats -------------------------------------------------------------

/// Embedding CSV: first line "# dim=<d>", further '#' lines are comments,
/// then "speaker_id,v1,...,vd" per row.
EmbeddingSet read_embeddings(std::istream& in);
EmbeddingSet load_embeddings(const std::filesystem::path& path);
void write_embeddings(std::ostream& out, const EmbeddingSet& set,
                      std::span<const std::string> comments = {});
void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set,
                     std::span<const std::string> comments = {});

/// Corpus manifest: JSON lines {"sample_id": ..., "iteration": k}.
Corpus read_corpus_manifest(std::istream& in, std::string name);
Corpus load_corpus_manifest(const std::filesystem::path& path);
void write_corpus_manifest(std::ostream& out, const Corpus& corpus);
void save_corpus_manifest(const std::filesystem::path& path, const Corpus& corpus);

}  // namespace alcorpus
