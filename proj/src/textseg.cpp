#include "lexsum/textseg.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/uscript.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <array>
#include <cctype>

namespace lexsum {

std::string_view to_string(Language lang) noexcept {
  return lang == Language::hi ? "hi" : "en";
}

Language parse_language(std::string_view tag) {
  if (tag == "en") return Language::en;
  if (tag == "hi") return Language::hi;
  throw Error("corpus", "unknown language tag '" + std::string(tag) + "'");
}

std::string join(const Tokens& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace lexsum

namespace lexsum::textseg {
namespace {

constexpr char kGramSep = '\x1f';

const icu::Normalizer2& nfkc_instance() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status) || norm == nullptr) {
    throw Error("textseg", "ICU NFKC normalizer unavailable");
  }
  return *norm;
}

bool is_token_char(UChar32 c) {
  if (c == 0x200C || c == 0x200D) return true;  // ZWNJ / ZWJ inside Indic words
  const std::uint32_t mask = U_GET_GC_MASK(c);
  return (mask & (U_GC_L_MASK | U_GC_M_MASK | U_GC_N_MASK)) != 0;
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }

bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char ch) { return static_cast<unsigned char>(ch) < 0x80; });
}

// NFKC + Latin lowercasing of one run of token characters.
std::string normalize_run(std::string_view run) {
  if (is_ascii(run)) {
    std::string out(run);
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
  }
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString ustr = icu::UnicodeString::fromUTF8(
      icu::StringPiece(run.data(), static_cast<int32_t>(run.size())));
  icu::UnicodeString normalized = nfkc_instance().normalize(ustr, status);
  if (U_FAILURE(status)) throw Error("textseg", "NFKC normalization failed");

  icu::UnicodeString lowered;
  for (int32_t i = 0; i < normalized.length();) {
    UChar32 c = normalized.char32At(i);
    UErrorCode script_status = U_ZERO_ERROR;
    if (uscript_getScript(c, &script_status) == USCRIPT_LATIN) c = u_tolower(c);
    lowered.append(c);
    i += U16_LENGTH(c);
  }
  std::string out;
  lowered.toUTF8String(out);
  return out;
}

struct Codepoint {
  UChar32 value;
  std::size_t begin;
  std::size_t end;
};

Codepoint decode_at(std::string_view text, std::size_t pos) {
  int32_t i = static_cast<int32_t>(pos);
  UChar32 c;
  U8_NEXT(reinterpret_cast<const uint8_t*>(text.data()), i,
          static_cast<int32_t>(text.size()), c);
  if (c < 0) c = 0xFFFD;
  return {c, pos, static_cast<std::size_t>(i)};
}

std::vector<Codepoint> decode(std::string_view text) {
  std::vector<Codepoint> cps;
  cps.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    Codepoint cp = decode_at(text, pos);
    cps.push_back(cp);
    pos = cp.end;
  }
  return cps;
}

// Splits an already-normalized run again: NFKC can introduce separator
// characters (e.g. the fraction slash in "½").
void push_normalized(std::string_view run, std::size_t begin, std::size_t end,
                     std::vector<WordToken>& out) {
  std::string norm = normalize_run(run);
  std::string piece;
  for (std::size_t pos = 0; pos < norm.size();) {
    Codepoint cp = decode_at(norm, pos);
    if (is_token_char(cp.value)) {
      piece.append(norm, cp.begin, cp.end - cp.begin);
    } else if (!piece.empty()) {
      out.push_back({std::move(piece), begin, end});
      piece.clear();
    }
    pos = cp.end;
  }
  if (!piece.empty()) out.push_back({std::move(piece), begin, end});
}

constexpr std::array<std::string_view, 65> kAbbreviations = {
    "no",    "nos",  "vs",   "v",    "hon'ble", "honble", "mr",   "mrs",
    "ms",    "dr",   "sr",   "jr",   "st",      "sh",     "smt",  "kum",
    "ltd",   "pvt",  "co",   "corp", "inc",     "govt",   "dept", "crl",
    "cr",    "civ",  "cri",  "art",  "arts",    "sec",    "secs", "s",
    "ss",    "cl",   "para", "paras", "r",      "rr",     "j",    "jj",
    "cj",    "viz",  "i.e",  "e.g",  "w.e.f",   "u/s",    "r/w",  "anr",
    "ors",   "vol",  "pp",   "p",    "fig",     "ch",     "ibid", "cf",
    "sl",    "addl", "spl",  "asst", "distt",   "misc",   "approx", "w.p",
    "rs"};

bool is_opening_punct(char ch) {
  return ch == '(' || ch == '[' || ch == '"' || ch == '\'';
}

bool is_closing_cp(UChar32 c) {
  return c == ')' || c == ']' || c == '"' || c == '\'' || c == 0x2019 ||
         c == 0x201D;
}

bool is_terminator(UChar32 c, Language lang) {
  if (c == '.' || c == '?' || c == '!') return true;
  return lang == Language::hi && (c == 0x0964 || c == 0x0965);
}

}  // namespace

std::size_t NGramBag::total() const noexcept {
  std::size_t sum = 0;
  for (const auto& [gram, c] : counts) sum += c;
  return sum;
}

std::size_t NGramBag::count(const Tokens& gram) const {
  std::string key;
  for (std::size_t i = 0; i < gram.size(); ++i) {
    if (i) key += kGramSep;
    key += gram[i];
  }
  auto it = counts.find(key);
  return it == counts.end() ? 0 : it->second;
}

std::string nfkc(std::string_view text) {
  if (is_ascii(text)) return std::string(text);
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString ustr = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized = nfkc_instance().normalize(ustr, status);
  if (U_FAILURE(status)) throw Error("textseg", "NFKC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::vector<WordToken> tokenize_with_offsets(std::string_view text, Language) {
  std::vector<WordToken> out;
  std::size_t run_begin = 0;
  bool in_run = false;
  for (std::size_t pos = 0; pos < text.size();) {
    Codepoint cp = decode_at(text, pos);
    const bool token_char = is_token_char(cp.value);
    if (token_char && !in_run) {
      run_begin = cp.begin;
      in_run = true;
    } else if (!token_char && in_run) {
      push_normalized(text.substr(run_begin, cp.begin - run_begin), run_begin,
                      cp.begin, out);
      in_run = false;
    }
    pos = cp.end;
  }
  if (in_run) {
    push_normalized(text.substr(run_begin), run_begin, text.size(), out);
  }
  return out;
}

Tokens tokenize_words(std::string_view text, Language lang) {
  Tokens tokens;
  for (auto& tok : tokenize_with_offsets(text, lang)) tokens.push_back(std::move(tok.text));
  return tokens;
}

std::size_t whitespace_word_count(std::string_view text) {
  const std::string normalized = nfkc(text);
  std::size_t count = 0;
  bool in_word = false;
  for (std::size_t pos = 0; pos < normalized.size();) {
    Codepoint cp = decode_at(normalized, pos);
    if (is_space(cp.value)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
    pos = cp.end;
  }
  return count;
}

bool is_guarded_abbreviation(std::string_view word) {
  while (!word.empty() && is_opening_punct(word.front())) word.remove_prefix(1);
  if (word.empty()) return false;

  std::string lower;
  for (std::size_t i = 0; i < word.size(); ++i) {
    // U+2019 right single quotation mark, used in "Hon’ble"
    if (word.compare(i, 3, "\xE2\x80\x99") == 0) {
      lower += '\'';
      i += 2;
      continue;
    }
    lower += static_cast<char>(std::tolower(static_cast<unsigned char>(word[i])));
  }
  auto listed = [](std::string_view w) {
    return std::find(kAbbreviations.begin(), kAbbreviations.end(), w) !=
           kAbbreviations.end();
  };
  if (listed(lower)) return true;

  // "Crl.A", "S.L.P": judge the last dotted segment
  const auto dot = lower.rfind('.');
  if (dot != std::string::npos && dot + 1 < lower.size()) {
    const std::string_view last = std::string_view(lower).substr(dot + 1);
    if (listed(last)) return true;
    if (last.size() == 1 && std::isalpha(static_cast<unsigned char>(last[0]))) return true;
  }
  return false;
}

namespace {

bool is_initial(std::string_view word) {
  while (!word.empty() && is_opening_punct(word.front())) word.remove_prefix(1);
  return word.size() == 2 && std::isupper(static_cast<unsigned char>(word[0])) && word[1] == '.';
}

bool starts_upper(std::string_view word) {
  while (!word.empty() && is_opening_punct(word.front())) word.remove_prefix(1);
  return !word.empty() && std::isupper(static_cast<unsigned char>(word[0]));
}

std::string_view word_before(std::string_view text, std::size_t end, std::size_t floor) {
  while (end > floor && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  std::size_t begin = end;
  while (begin > floor && !std::isspace(static_cast<unsigned char>(text[begin - 1]))) --begin;
  return text.substr(begin, end - begin);
}

std::string_view word_after(std::string_view text, std::size_t begin) {
  while (begin < text.size() && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  std::size_t end = begin;
  while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
  return text.substr(begin, end - begin);
}

}  // namespace

std::vector<Sentence> split_sentences(std::string_view text, Language lang) {
  const std::vector<Codepoint> cps = decode(text);

  std::vector<std::pair<std::size_t, std::size_t>> segments;  // byte ranges
  std::size_t seg_begin = 0;

  auto first_word_only = [&](std::size_t seg, std::size_t word_begin) {
    for (std::size_t b = seg; b < word_begin; ++b) {
      if (!std::isspace(static_cast<unsigned char>(text[b]))) return false;
    }
    return true;
  };

  for (std::size_t i = 0; i < cps.size(); ++i) {
    const UChar32 c = cps[i].value;

    if (c == '\n') {
      std::size_t j = i + 1;
      while (j < cps.size() && cps[j].value != '\n' && is_space(cps[j].value)) ++j;
      if (j < cps.size() && cps[j].value == '\n') {
        segments.emplace_back(seg_begin, cps[i].begin);
        seg_begin = cps[i].begin;
        i = j;
        continue;
      }
    }

    if (!is_terminator(c, lang)) continue;

    std::size_t j = i;
    while (j + 1 < cps.size() &&
           (is_terminator(cps[j + 1].value, lang) || is_closing_cp(cps[j + 1].value))) {
      ++j;
    }
    const bool at_end = j + 1 == cps.size();
    if (!at_end && !is_space(cps[j + 1].value)) {
      i = j;
      continue;
    }

    if (c == '.' && j == i) {
      std::size_t word_begin = cps[i].begin;
      while (word_begin > seg_begin &&
             !std::isspace(static_cast<unsigned char>(text[word_begin - 1]))) {
        --word_begin;
      }
      const std::string_view word = text.substr(word_begin, cps[i].begin - word_begin);
      const bool numbered_para =
          !word.empty() &&
          std::all_of(word.begin(), word.end(),
                      [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }) &&
          first_word_only(seg_begin, word_begin);
      // A lone capital is an initial inside a name ("A. K. Sharma",
      // "Justice A. Sharma") but may also end a sentence ("held X. The").
      bool initial = false;
      if (is_initial(std::string_view(text).substr(word_begin, cps[i].end - word_begin))) {
        const auto next = word_after(text, cps[j].end);
        const auto prev = word_before(text, word_begin, seg_begin);
        initial = is_initial(next) || ((is_initial(prev) || starts_upper(prev)) && starts_upper(next));
      }
      if (!at_end && (is_guarded_abbreviation(word) || numbered_para || initial)) {
        i = j;
        continue;
      }
    }

    segments.emplace_back(seg_begin, cps[j].end);
    seg_begin = cps[j].end;
    i = j;
  }
  if (seg_begin < text.size()) segments.emplace_back(seg_begin, text.size());

  struct Piece {
    std::size_t begin, end;
    Tokens tokens;
  };
  std::vector<Piece> pieces;
  for (auto [b, e] : segments) {
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    // Unicode whitespace beyond ASCII is rare enough to trim via decode
    while (b < e) {
      Codepoint cp = decode_at(text, b);
      if (!is_space(cp.value)) break;
      b = cp.end;
    }
    if (b == e) continue;
    pieces.push_back({b, e, tokenize_words(text.substr(b, e - b), lang)});
  }

  // Token-less pieces ("...", stray brackets) merge into a neighbour.
  std::vector<Piece> merged;
  for (auto& piece : pieces) {
    if (piece.tokens.empty() && !merged.empty()) {
      merged.back().end = piece.end;
      continue;
    }
    if (!merged.empty() && merged.back().tokens.empty()) {
      merged.back().end = piece.end;
      merged.back().tokens = std::move(piece.tokens);
      continue;
    }
    merged.push_back(std::move(piece));
  }

  std::vector<Sentence> sentences;
  std::size_t offset = 0;
  for (auto& piece : merged) {
    if (piece.tokens.empty()) continue;
    Sentence s;
    s.index = sentences.size();
    s.text = std::string(text.substr(piece.begin, piece.end - piece.begin));
    s.begin = piece.begin;
    s.end = piece.end;
    s.token_offset = offset;
    s.tokens = std::move(piece.tokens);
    offset += s.tokens.size();
    sentences.push_back(std::move(s));
  }
  return sentences;
}

NGramBag ngrams(const Tokens& tokens, int n) {
  if (n < 1) throw Error("textseg", "n-gram order must be >= 1");
  NGramBag bag;
  bag.n = n;
  const auto order = static_cast<std::size_t>(n);
  if (tokens.size() < order) return bag;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < order; ++k) {
      key += kGramSep;
      key += tokens[i + k];
    }
    ++bag.counts[key];
  }
  return bag;
}

}  // namespace lexsum::textseg
