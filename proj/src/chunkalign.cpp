#include "lexsum/chunkalign.hpp"

#include <algorithm>
#include <cmath>

namespace lexsum::chunkalign {
namespace {

// Sentence batches per provider request when embedding one document.
constexpr std::size_t kEmbedBatch = 64;

provider::Vector normalized(provider::Vector v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq > 0.0) {
    const double norm = std::sqrt(sq);
    for (double& x : v) x /= norm;
  }
  return v;
}

double dot(const provider::Vector& a, const provider::Vector& b) {
  if (a.size() != b.size()) {
    throw Error("chunkalign", "sentence vectors differ in dimension");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<provider::Vector> sentence_vectors(std::span<const textseg::Sentence> sentences,
                                               Language lang, provider::Provider& embedder,
                                               std::string_view side) {
  std::vector<provider::Vector> out;
  out.reserve(sentences.size());
  for (std::size_t b = 0; b < sentences.size(); b += kEmbedBatch) {
    const std::size_t e = std::min(sentences.size(), b + kEmbedBatch);
    std::vector<std::string> texts;
    for (std::size_t i = b; i < e; ++i) texts.push_back(sentences[i].text);
    std::vector<std::vector<provider::Vector>> per_token;
    try {
      per_token = embedder.embed_tokens(texts, lang);
    } catch (const std::exception& ex) {
      throw Error("chunkalign", std::string(side) + " sentences " + std::to_string(b) + ".." +
                                    std::to_string(e) + ": " + ex.what());
    }
    for (const auto& tokens : per_token) {
      provider::Vector mean;
      for (const auto& v : tokens) {
        if (mean.empty()) mean.assign(v.size(), 0.0);
        if (v.size() != mean.size()) throw Error("chunkalign", "token vectors differ in dimension");
        for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k];
      }
      for (double& x : mean) x /= static_cast<double>(std::max<std::size_t>(tokens.size(), 1));
      out.push_back(normalized(std::move(mean)));
    }
  }
  return out;
}

}  // namespace

std::vector<TokenSpan> chunk_spans(std::size_t token_count, std::size_t n) {
  if (n == 0) throw Error("chunkalign", "chunk budget n must be >= 1");
  std::vector<TokenSpan> spans;
  spans.reserve(token_count / n + 1);
  for (std::size_t start = 0; start < token_count; start += n) {
    spans.push_back({start, std::min(token_count, start + n)});
  }
  return spans;
}

std::size_t anchor_chunk(const textseg::Sentence& sentence, std::size_t n) {
  if (n == 0) throw Error("chunkalign", "chunk budget n must be >= 1");
  return sentence.token_offset / n;
}

std::vector<Chunk> chunk_document(std::span<const textseg::Sentence> sentences, std::size_t n,
                                  std::string judgment_id) {
  std::size_t total = 0;
  for (const auto& s : sentences) total = std::max(total, s.token_offset + s.tokens.size());
  if (total == 0) throw Error("chunkalign", "cannot chunk a document without tokens");

  const auto spans = chunk_spans(total, n);
  std::vector<Chunk> chunks;
  chunks.reserve(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    Chunk c;
    c.judgment_id = judgment_id;
    c.index = i;
    c.token_span = spans[i];
    c.m = spans.size();
    c.n = n;
    chunks.push_back(std::move(c));
  }
  for (const auto& s : sentences) {
    if (s.tokens.empty()) continue;
    const std::size_t first = s.token_offset / n;
    const std::size_t last = (s.token_offset + s.tokens.size() - 1) / n;
    for (std::size_t k = first; k <= last; ++k) chunks[k].sentence_indices.push_back(s.index);
  }
  return chunks;
}

SentenceMapping map_by_vectors(std::span<const provider::Vector> doc_vectors,
                               std::span<const provider::Vector> summary_vectors) {
  if (doc_vectors.empty() || summary_vectors.empty()) {
    throw Error("chunkalign", "sentence mapping needs document and summary sentences");
  }
  std::vector<provider::Vector> docs;
  docs.reserve(doc_vectors.size());
  for (const auto& v : doc_vectors) docs.push_back(normalized(v));

  SentenceMapping mapping;
  for (std::size_t s = 0; s < summary_vectors.size(); ++s) {
    const auto query = normalized(summary_vectors[s]);
    MappingEntry best{s, 0, dot(query, docs[0])};
    for (std::size_t d = 1; d < docs.size(); ++d) {
      const double sim = dot(query, docs[d]);
      if (sim > best.similarity) best = {s, d, sim};
    }
    best.similarity = std::clamp(best.similarity, -1.0, 1.0);
    mapping.entries.push_back(best);
  }
  return mapping;
}

SentenceMapping map_summary_sentences(std::span<const textseg::Sentence> doc_sentences,
                                      Language doc_language,
                                      std::span<const textseg::Sentence> summary_sentences,
                                      Language summary_language, provider::Provider& embedder) {
  if (doc_sentences.empty() || summary_sentences.empty()) {
    throw Error("chunkalign", "sentence mapping needs document and summary sentences");
  }
  const auto doc_vecs = sentence_vectors(doc_sentences, doc_language, embedder, "document");
  const auto sum_vecs = sentence_vectors(summary_sentences, summary_language, embedder, "summary");
  return map_by_vectors(doc_vecs, sum_vecs);
}

PairingResult build_chunk_pairs(std::span<const Chunk> chunks, const SentenceMapping& mapping,
                                std::span<const textseg::Sentence> doc_sentences,
                                std::span<const textseg::Sentence> summary_sentences) {
  if (mapping.entries.size() != summary_sentences.size()) {
    throw Error("chunkalign", "mapping does not cover every summary sentence");
  }
  PairingResult result;
  if (chunks.empty()) return result;
  const std::size_t n = chunks.front().n;

  std::vector<std::vector<std::size_t>> grouped(chunks.size());
  // Entries are visited in summary order, so each group stays in summary order.
  std::vector<MappingEntry> entries = mapping.entries;
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.summary_sentence_index < b.summary_sentence_index;
  });
  for (const auto& e : entries) {
    if (e.doc_sentence_index >= doc_sentences.size() ||
        e.summary_sentence_index >= summary_sentences.size()) {
      throw Error("chunkalign", "mapping refers to a sentence out of range");
    }
    const std::size_t k = std::min(anchor_chunk(doc_sentences[e.doc_sentence_index], n),
                                   chunks.size() - 1);
    grouped[k].push_back(e.summary_sentence_index);
  }

  for (std::size_t k = 0; k < chunks.size(); ++k) {
    if (grouped[k].empty()) {
      result.dropped_chunks.push_back(chunks[k].index);
      continue;
    }
    AlignedPair pair;
    pair.chunk = chunks[k];
    pair.summary_sentence_indices = grouped[k];
    for (std::size_t i = 0; i < grouped[k].size(); ++i) {
      if (i) pair.summary_text += ' ';
      pair.summary_text += summary_sentences[grouped[k][i]].text;
    }
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

std::string reassemble(std::span<const ChunkOutput> outputs,
                       std::optional<std::size_t> expected_count) {
  std::size_t m = expected_count.value_or(0);
  if (!expected_count) {
    for (const auto& o : outputs) m = std::max(m, o.index + 1);
  }
  std::vector<const ChunkOutput*> slots(m, nullptr);
  for (const auto& o : outputs) {
    if (o.index >= m) {
      throw Error("chunkalign", "chunk index " + std::to_string(o.index) + " out of range for m=" +
                                    std::to_string(m));
    }
    if (slots[o.index] != nullptr) {
      throw Error("chunkalign", "duplicate chunk " + std::to_string(o.index));
    }
    slots[o.index] = &o;
  }
  std::string text;
  for (std::size_t i = 0; i < m; ++i) {
    if (slots[i] == nullptr) throw Error("chunkalign", "missing chunk " + std::to_string(i));
    if (i) text += ' ';
    text += slots[i]->text;
  }
  return text;
}

std::size_t summary_budget(std::size_t reference_summary_tokens, std::size_t m) {
  if (m == 0) throw Error("chunkalign", "chunk count m must be >= 1");
  return std::max<std::size_t>(1, (reference_summary_tokens + m - 1) / m);
}

}  // namespace lexsum::chunkalign
