#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lexsum/common.hpp"
#include "lexsum/provider.hpp"
#include "lexsum/textseg.hpp"

namespace lexsum::chunkalign {

struct Chunk {
  std::string judgment_id;
  std::size_t index = 0;
  TokenSpan token_span;
  /// Sentences overlapping the span, fully or partially.
  std::vector<std::size_t> sentence_indices;
  std::size_t m = 0;
  std::size_t n = 0;
};

struct MappingEntry {
  std::size_t summary_sentence_index = 0;
  std::size_t doc_sentence_index = 0;
  double similarity = 0.0;
};

struct SentenceMapping {
  std::vector<MappingEntry> entries;
};

struct AlignedPair {
  Chunk chunk;
  std::vector<std::size_t> summary_sentence_indices;
  std::string summary_text;
};

struct PairingResult {
  std::vector<AlignedPair> pairs;
  /// Chunks that received no summary sentence and were left out.
  std::vector<std::size_t> dropped_chunks;
};

struct ChunkOutput {
  std::size_t index = 0;
  std::string text;
};

/// Half-open spans of exactly `n` tokens (the last may be shorter).
std::vector<TokenSpan> chunk_spans(std::size_t token_count, std::size_t n);

/// Chunks a document whose token stream is the concatenation of `sentences`'
/// tokens. Throws when n == 0 or the document has no tokens.
std::vector<Chunk> chunk_document(std::span<const textseg::Sentence> sentences, std::size_t n,
                                  std::string judgment_id = {});

/// Chunk owning a sentence: the one holding its first token.
std::size_t anchor_chunk(const textseg::Sentence& sentence, std::size_t n);

/// Argmax-cosine mapping over precomputed sentence vectors. Vectors are
/// L2-normalized here; ties go to the smallest document index.
SentenceMapping map_by_vectors(std::span<const provider::Vector> doc_vectors,
                               std::span<const provider::Vector> summary_vectors);

/// Sentence vectors are the mean of the provider's token vectors.
SentenceMapping map_summary_sentences(std::span<const textseg::Sentence> doc_sentences,
                                      Language doc_language,
                                      std::span<const textseg::Sentence> summary_sentences,
                                      Language summary_language, provider::Provider& embedder);

PairingResult build_chunk_pairs(std::span<const Chunk> chunks, const SentenceMapping& mapping,
                                std::span<const textseg::Sentence> doc_sentences,
                                std::span<const textseg::Sentence> summary_sentences);

/// Joins chunk outputs with single spaces in ascending chunk index. When
/// `expected_count` is given the indices must be exactly 0..expected_count-1.
std::string reassemble(std::span<const ChunkOutput> outputs,
                       std::optional<std::size_t> expected_count = std::nullopt);

/// Per-chunk summary length t = max(1, ceil(reference_tokens / m)).
std::size_t summary_budget(std::size_t reference_summary_tokens, std::size_t m);

}  // namespace lexsum::chunkalign
