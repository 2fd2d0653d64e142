#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lexsum/common.hpp"

namespace lexsum::textseg {

/// A word token together with the byte range it was cut from in the source
/// text. `text` is normalized (NFKC, Latin lowercased); the byte range refers
/// to the original, unnormalized input.
struct WordToken {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct Sentence {
  std::size_t index = 0;
  std::string text;
  Tokens tokens;
  /// Position of this sentence's first token in the parent token stream.
  std::size_t token_offset = 0;
  /// Byte range of `text` inside the parent text.
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Multiset of n-grams. Keys are the n tokens joined by U+001F, which can
/// never occur inside a word token.
struct NGramBag {
  int n = 1;
  std::unordered_map<std::string, std::size_t> counts;

  std::size_t total() const noexcept;
  std::size_t count(const Tokens& gram) const;
};

std::string nfkc(std::string_view text);

/// Word tokenization: NFKC, Latin-script lowercasing, split on anything that
/// is not a letter, mark, digit or joiner. Devanagari words consist only of
/// letters and marks, so they break on whitespace and punctuation (danda)
/// alone.
Tokens tokenize_words(std::string_view text, Language lang = Language::en);

std::vector<WordToken> tokenize_with_offsets(std::string_view text,
                                             Language lang = Language::en);

/// Number of whitespace-delimited words after NFKC normalization.
std::size_t whitespace_word_count(std::string_view text);

/// Splits into sentences on ., ?, ! (and the danda for Hindi), with an
/// abbreviation guard for English legal text. Sentences that would carry no
/// word tokens are merged into a neighbour. A blank line also ends a sentence.
std::vector<Sentence> split_sentences(std::string_view text, Language lang);

/// Throws Error("textseg", ...) when n < 1.
NGramBag ngrams(const Tokens& tokens, int n);

/// True if `word` (without its trailing period) is on the English abbreviation
/// guard list.
bool is_guarded_abbreviation(std::string_view word);

}  // namespace lexsum::textseg
