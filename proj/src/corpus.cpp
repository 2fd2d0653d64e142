#include "lexsum/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "lexsum/rouge.hpp"

namespace lexsum::corpus {
namespace {

using nlohmann::json;

[[noreturn]] void fail_at(const std::string& path, std::size_t line, const std::string& msg) {
  throw Error("corpus", path + ":" + std::to_string(line) + ": " + msg);
}

std::string require_string(const json& rec, const char* field, const std::string& path,
                           std::size_t line) {
  auto it = rec.find(field);
  if (it == rec.end() || !it->is_string()) {
    fail_at(path, line, std::string("malformed record: missing string field '") + field + "'");
  }
  return it->get<std::string>();
}

void check_schema(const json& rec, const std::string& path, std::size_t line) {
  auto it = rec.find("schema_version");
  if (it == rec.end()) return;
  if (!it->is_number_integer() || it->get<int>() < kSchemaVersion - 1 ||
      it->get<int>() > kSchemaVersion) {
    fail_at(path, line, "unsupported schema_version " + it->dump());
  }
}

json parse_line(const std::string& line, const std::string& path, std::size_t line_no) {
  json rec = json::parse(line, nullptr, false);
  if (rec.is_discarded() || !rec.is_object()) fail_at(path, line_no, "malformed record: not a JSON object");
  check_schema(rec, path, line_no);
  return rec;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace

std::string_view to_string(SplitName split) noexcept {
  switch (split) {
    case SplitName::train: return "train";
    case SplitName::validation: return "validation";
    case SplitName::test: return "test";
  }
  return "train";
}

SplitName parse_split(std::string_view name) {
  if (name == "train") return SplitName::train;
  if (name == "validation" || name == "val") return SplitName::validation;
  if (name == "test") return SplitName::test;
  throw Error("corpus", "unknown split '" + std::string(name) + "'");
}

Judgment make_judgment(std::string id, std::string text, Language lang) {
  Judgment j;
  j.id = std::move(id);
  j.language = lang;
  j.text = std::move(text);
  j.sentences = textseg::split_sentences(j.text, lang);
  for (auto& tok : textseg::tokenize_with_offsets(j.text, lang)) {
    j.tokens.push_back(std::move(tok.text));
    j.token_bytes.emplace_back(tok.begin, tok.end);
  }
  return j;
}

GoldSummary make_summary(std::string judgment_id, std::string text, Language lang) {
  GoldSummary s;
  s.judgment_id = std::move(judgment_id);
  s.language = lang;
  s.text = std::move(text);
  s.sentences = textseg::split_sentences(s.text, lang);
  for (const auto& sent : s.sentences) {
    s.tokens.insert(s.tokens.end(), sent.tokens.begin(), sent.tokens.end());
  }
  return s;
}

DatasetReader::DatasetReader(const std::filesystem::path& path, SplitName split,
                             Language summary_language)
    : in_(path), path_(path.string()), split_(split), summary_language_(summary_language) {
  if (!in_) throw Error("corpus", "cannot open dataset file '" + path_ + "'");
}

std::optional<DocumentPair> DatasetReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (blank(line)) continue;
    const json rec = parse_line(line, path_, line_no_);
    ++records_seen_;

    std::string id = require_string(rec, "id", path_, line_no_);
    const std::string split = require_string(rec, "split", path_, line_no_);
    SplitName rec_split;
    try {
      rec_split = parse_split(split);
    } catch (const Error& e) {
      fail_at(path_, line_no_, e.what());
    }
    if (rec_split != split_) continue;

    Language doc_lang = Language::en;
    if (auto it = rec.find("doc_language"); it != rec.end()) {
      if (!it->is_string()) fail_at(path_, line_no_, "malformed record: doc_language");
      try {
        doc_lang = parse_language(it->get<std::string>());
      } catch (const Error& e) {
        fail_at(path_, line_no_, e.what());
      }
    }
    std::string doc = require_string(rec, "doc_text", path_, line_no_);
    const char* field = summary_language_ == Language::hi ? "summary_hi" : "summary_en";
    std::string summary = require_string(rec, field, path_, line_no_);
    if (blank(doc)) fail_at(path_, line_no_, "malformed record: empty doc_text");
    if (blank(summary)) fail_at(path_, line_no_, std::string("malformed record: empty ") + field);

    DocumentPair pair{make_judgment(id, std::move(doc), doc_lang),
                      make_summary(id, std::move(summary), summary_language_)};
    return pair;
  }
  return std::nullopt;
}

DatasetSplit load_dataset(const std::filesystem::path& path, SplitName split,
                          Language summary_language) {
  DatasetReader reader(path, split, summary_language);
  DatasetSplit out;
  out.name = split;
  out.summary_language = summary_language;
  std::unordered_set<std::string> ids;
  while (auto pair = reader.next()) {
    if (!ids.insert(pair->judgment.id).second) {
      fail_at(path.string(), reader.line_number(),
              "duplicate id '" + pair->judgment.id + "' in split " + std::string(to_string(split)));
    }
    out.pairs.push_back(std::move(*pair));
  }
  if (out.pairs.empty()) {
    throw Error("corpus", "no records for split '" + std::string(to_string(split)) + "' in '" +
                              path.string() + "'");
  }
  return out;
}

CorpusReader::CorpusReader(const std::filesystem::path& path) : in_(path), path_(path.string()) {
  if (!in_) throw Error("corpus", "cannot open corpus file '" + path_ + "'");
}

std::optional<CorpusDocument> CorpusReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (blank(line)) continue;
    const json rec = parse_line(line, path_, line_no_);
    CorpusDocument doc;
    doc.id = require_string(rec, "id", path_, line_no_);
    doc.text = require_string(rec, "text", path_, line_no_);
    try {
      doc.language = parse_language(require_string(rec, "language", path_, line_no_));
    } catch (const Error& e) {
      fail_at(path_, line_no_, e.what());
    }
    return doc;
  }
  return std::nullopt;
}

std::vector<CorpusDocument> load_pretrain_corpus(const std::filesystem::path& path) {
  CorpusReader reader(path);
  std::vector<CorpusDocument> docs;
  while (auto doc = reader.next()) docs.push_back(std::move(*doc));
  if (docs.empty()) throw Error("corpus", "no records in '" + path.string() + "'");
  return docs;
}

std::vector<Fragment> extractive_fragments(const Tokens& doc_tokens, const Tokens& summary_tokens) {
  std::vector<Fragment> fragments;
  if (doc_tokens.empty() || summary_tokens.empty()) return fragments;

  rouge::Vocabulary vocab;
  const auto doc = vocab.intern(doc_tokens);
  const auto sum = vocab.intern(summary_tokens);

  std::unordered_map<std::uint32_t, std::vector<std::size_t>> postings;
  for (std::size_t j = 0; j < doc.size(); ++j) postings[doc[j]].push_back(j);

  std::size_t i = 0;
  while (i < sum.size()) {
    Fragment best{i, 0, 0};
    if (auto it = postings.find(sum[i]); it != postings.end()) {
      for (std::size_t j : it->second) {
        std::size_t len = 0;
        while (i + len < sum.size() && j + len < doc.size() && sum[i + len] == doc[j + len]) ++len;
        if (len > best.length) best = {i, j, len};
      }
    }
    if (best.length > 0) {
      fragments.push_back(best);
      i += best.length;
    } else {
      ++i;
    }
  }
  return fragments;
}

CoverageDensity coverage_density(const Tokens& doc_tokens, const Tokens& summary_tokens) {
  if (summary_tokens.empty()) throw Error("corpus", "coverage/density needs a non-empty summary");
  double covered = 0.0;
  double squared = 0.0;
  for (const auto& f : extractive_fragments(doc_tokens, summary_tokens)) {
    const auto len = static_cast<double>(f.length);
    covered += len;
    squared += len * len;
  }
  const auto n = static_cast<double>(summary_tokens.size());
  return {covered / n, squared / n};
}

PairStats measure_pair(const DocumentPair& pair) {
  PairStats stats;
  stats.doc_words = static_cast<double>(textseg::whitespace_word_count(pair.judgment.text));
  stats.summary_words = static_cast<double>(textseg::whitespace_word_count(pair.summary.text));
  stats.extractiveness = coverage_density(pair.judgment.tokens, pair.summary.tokens);
  return stats;
}

void StatsAccumulator::add(const PairStats& stats) {
  ++n_;
  doc_words_ += stats.doc_words;
  summary_words_ += stats.summary_words;
  coverage_ += stats.extractiveness.coverage;
  density_ += stats.extractiveness.density;
}

StatsReport StatsAccumulator::report() const {
  if (n_ == 0) throw Error("corpus", "corpus_stats needs a non-empty split");
  const auto n = static_cast<double>(n_);
  return {n_, doc_words_ / n, summary_words_ / n, coverage_ / n, density_ / n};
}

StatsReport corpus_stats(const DatasetSplit& split) {
  StatsAccumulator acc;
  for (const auto& pair : split.pairs) acc.add(pair);
  return acc.report();
}

}  // namespace lexsum::corpus
