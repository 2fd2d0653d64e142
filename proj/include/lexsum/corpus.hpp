#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lexsum/common.hpp"
#include "lexsum/textseg.hpp"

namespace lexsum::corpus {

inline constexpr int kSchemaVersion = 1;

struct Judgment {
  std::string id;
  Language language = Language::en;
  std::string text;
  std::vector<textseg::Sentence> sentences;
  /// Word-token view of `text`; equals the concatenation of sentence tokens.
  Tokens tokens;
  std::vector<std::pair<std::size_t, std::size_t>> token_bytes;

  std::size_t token_count() const noexcept { return tokens.size(); }
};

struct GoldSummary {
  std::string judgment_id;
  Language language = Language::en;
  std::string text;
  std::vector<textseg::Sentence> sentences;
  Tokens tokens;
};

enum class SplitName { train, validation, test };

std::string_view to_string(SplitName split) noexcept;
SplitName parse_split(std::string_view name);

struct DocumentPair {
  Judgment judgment;
  GoldSummary summary;
};

struct DatasetSplit {
  SplitName name = SplitName::train;
  Language summary_language = Language::en;
  std::vector<DocumentPair> pairs;
};

struct StatsReport {
  std::size_t n_pairs = 0;
  double avg_doc_words = 0.0;
  double avg_summary_words = 0.0;
  double avg_coverage = 0.0;
  double avg_density = 0.0;
};

/// A maximal shared token run: `length` tokens starting at `summary_start` in
/// the summary equal the tokens starting at `doc_start` in the document.
struct Fragment {
  std::size_t summary_start = 0;
  std::size_t doc_start = 0;
  std::size_t length = 0;
};

struct CoverageDensity {
  double coverage = 0.0;
  double density = 0.0;
};

/// Pre-training corpus document: {id, text, language}.
struct CorpusDocument {
  std::string id;
  std::string text;
  Language language = Language::en;
};

Judgment make_judgment(std::string id, std::string text, Language lang);
GoldSummary make_summary(std::string judgment_id, std::string text, Language lang);

/// Reads one split of a JSON-Lines dataset with records
/// {id, split, doc_text, summary_en, summary_hi} (optionally doc_language and
/// schema_version). Errors carry the 1-based line number.
DatasetSplit load_dataset(const std::filesystem::path& path, SplitName split,
                          Language summary_language);

/// Streaming reader over a dataset file; yields pairs of the requested split
/// one at a time so corpus-scale subcommands hold a single document.
class DatasetReader {
 public:
  DatasetReader(const std::filesystem::path& path, SplitName split, Language summary_language);

  std::optional<DocumentPair> next();
  std::size_t line_number() const noexcept { return line_no_; }

 private:
  std::ifstream in_;
  std::string path_;
  SplitName split_;
  Language summary_language_;
  std::size_t line_no_ = 0;
  std::size_t records_seen_ = 0;
};

/// Streaming reader for pre-training corpora ({id, text, language}).
class CorpusReader {
 public:
  explicit CorpusReader(const std::filesystem::path& path);
  std::optional<CorpusDocument> next();

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t line_no_ = 0;
};

std::vector<CorpusDocument> load_pretrain_corpus(const std::filesystem::path& path);

/// Greedy left-to-right fragment matching: at each summary position take the
/// longest run shared with the document (earliest document position on ties),
/// otherwise advance one token.
std::vector<Fragment> extractive_fragments(const Tokens& doc_tokens, const Tokens& summary_tokens);

CoverageDensity coverage_density(const Tokens& doc_tokens, const Tokens& summary_tokens);

StatsReport corpus_stats(const DatasetSplit& split);

/// Per-pair inputs to a StatsReport.
struct PairStats {
  double doc_words = 0.0;
  double summary_words = 0.0;
  CoverageDensity extractiveness;
};

PairStats measure_pair(const DocumentPair& pair);

/// Accumulates a StatsReport pair by pair without holding the split.
class StatsAccumulator {
 public:
  void add(const DocumentPair& pair) { add(measure_pair(pair)); }
  void add(const PairStats& stats);
  StatsReport report() const;

 private:
  std::size_t n_ = 0;
  double doc_words_ = 0.0;
  double summary_words_ = 0.0;
  double coverage_ = 0.0;
  double density_ = 0.0;
};

}  // namespace lexsum::corpus
