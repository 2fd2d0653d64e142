#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lexsum/common.hpp"
#include "lexsum/corpus.hpp"

namespace lexsum::corruptor {

inline constexpr std::string_view kDocSeparator = "</s>";

/// "<extra_id_i>", the sentinel vocabulary of T5-family models.
std::string sentinel(std::size_t i);
std::optional<std::size_t> sentinel_index(std::string_view token) noexcept;

struct CorruptionConfig {
  std::size_t sequence_length = 512;
  double mask_rate = 0.15;
  double mean_span_length = 3.0;
  std::size_t max_target_length = 128;
  std::uint64_t seed = 0;

  /// Throws Error("corruptor", ...) when an invariant does not hold.
  void validate() const;
};

struct DenoisingSample {
  Tokens input_tokens;
  Tokens target_tokens;
  TokenSpan source_window;
};

struct NextTokenSample {
  Tokens tokens;
  TokenSpan source_window;
};

/// Portable seeded generator: std::mt19937_64 (bit-exact by the standard)
/// with our own bounded-integer mapping, since std distributions differ
/// between standard libraries. Streams are derived with splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  static Rng for_stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Masked budget, span count and span placement for one window.
struct SpanPlan {
  std::size_t masked = 0;
  std::vector<TokenSpan> spans;
};

/// masked = round(mask_rate * L); k = max(1, round(masked / mean_span_length)),
/// reduced until k + masked + 1 <= max_target_length. Span lengths differ by at
/// most one (order shuffled); kept tokens are split over k+1 gaps uniformly
/// with every interior gap >= 1.
SpanPlan plan_spans(std::size_t length, const CorruptionConfig& config, Rng& rng);

/// `stream` selects an independent generator under config.seed (e.g. the
/// window ordinal), so samples can be produced in any order or in parallel.
DenoisingSample span_corrupt(std::span<const std::string> window, const CorruptionConfig& config,
                             std::uint64_t stream = 0);

/// Inverse of span_corrupt. Throws on any sentinel mismatch.
Tokens reconstruct(const DenoisingSample& sample);

std::vector<NextTokenSample> next_token_samples(std::span<const std::string> stream,
                                                std::size_t window);

// ---------------------------------------------------------------------------
// Pre-training corpus generation
// ---------------------------------------------------------------------------

enum class MixPreset { en_only, hi_only, en_hi };
enum class Objective { span_corruption, next_token };

MixPreset parse_mix(std::string_view name);
std::string_view to_string(MixPreset mix) noexcept;

using DocumentSource = std::function<std::optional<corpus::CorpusDocument>()>;

/// Tiles one language's documents into fixed windows: documents are tokenized,
/// joined with kDocSeparator, and cut into consecutive windows; the tail is
/// discarded. Documents of other languages are skipped.
class WindowStream {
 public:
  WindowStream(DocumentSource source, Language lang, std::size_t window);

  /// Next window, or nullopt once the pool is exhausted.
  std::optional<std::pair<Tokens, TokenSpan>> next();
  std::size_t produced() const noexcept { return produced_; }

 private:
  bool refill();

  DocumentSource source_;
  Language lang_;
  std::size_t window_;
  Tokens buffer_;
  std::size_t head_ = 0;  // first unread token in buffer_
  std::size_t buffer_start_ = 0;  // stream position of the next window
  bool any_doc_ = false;
  bool exhausted_ = false;
  std::size_t produced_ = 0;
};

struct PretrainOptions {
  Objective objective = Objective::span_corruption;
  CorruptionConfig config;
  std::size_t ntp_window = 128;
  MixPreset mix = MixPreset::en_only;
  /// Total samples; split equally for en_hi. nullopt means every window
  /// (single-language presets only).
  std::optional<std::size_t> quota;
};

struct PretrainSample {
  Language language = Language::en;
  std::size_t ordinal = 0;  // window index within its language stream
  std::variant<DenoisingSample, NextTokenSample> sample;
};

using SampleSink = std::function<void(const PretrainSample&)>;

/// Emits samples to `sink` in a seeded interleaving of the languages the preset
/// asks for. `sources` must return a fresh source for a given language (the
/// same underlying corpus may be read once per language). Throws with the
/// shortfall when a pool runs out before its quota.
void build_pretrain_corpus(const std::function<DocumentSource(Language)>& sources,
                           const PretrainOptions& options, const SampleSink& sink);

std::vector<PretrainSample> build_pretrain_corpus(std::span<const corpus::CorpusDocument> docs,
                                                  const PretrainOptions& options);

}  // namespace lexsum::corruptor
