#include "lexsum/corruptor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "lexsum/textseg.hpp"

namespace lexsum::corruptor {
namespace {

constexpr std::string_view kSentinelPrefix = "<extra_id_";
constexpr std::uint64_t kInterleaveStream = 0x696e746572ULL;  // "inter"

std::uint64_t language_stream(Language lang, std::size_t ordinal) {
  return (static_cast<std::uint64_t>(lang == Language::hi ? 2 : 1) << 48) ^ ordinal;
}

}  // namespace

std::string sentinel(std::size_t i) {
  return std::string(kSentinelPrefix) + std::to_string(i) + ">";
}

std::optional<std::size_t> sentinel_index(std::string_view token) noexcept {
  if (!token.starts_with(kSentinelPrefix) || !token.ends_with('>')) return std::nullopt;
  const auto digits = token.substr(kSentinelPrefix.size(), token.size() - kSentinelPrefix.size() - 1);
  if (digits.empty()) return std::nullopt;
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return value;
}

void CorruptionConfig::validate() const {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw Error("corruptor", "mask_rate must be in (0, 1)");
  if (!(mean_span_length >= 1.0)) throw Error("corruptor", "mean_span_length must be >= 1");
  if (static_cast<double>(sequence_length) < mean_span_length) {
    throw Error("corruptor", "sequence_length must be >= mean_span_length");
  }
  if (sequence_length < 2) throw Error("corruptor", "sequence_length must be >= 2");
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::for_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(seed) ^ splitmix64(stream ^ 0xa0761d6478bd642fULL));
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error("corruptor", "Rng::below needs a positive bound");
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t x = engine_();
    if (x >= threshold) return x % bound;
  }
}

SpanPlan plan_spans(std::size_t length, const CorruptionConfig& config, Rng& rng) {
  config.validate();
  auto masked = static_cast<std::size_t>(std::llround(config.mask_rate * static_cast<double>(length)));
  masked = std::clamp<std::size_t>(masked, 1, length - 1);

  auto spans = static_cast<std::size_t>(
      std::llround(static_cast<double>(masked) / config.mean_span_length));
  spans = std::max<std::size_t>(spans, 1);
  if (masked + 2 > config.max_target_length) {
    throw Error("corruptor", "masked budget of " + std::to_string(masked) +
                                 " tokens cannot fit max_target_length " +
                                 std::to_string(config.max_target_length));
  }
  // target = k sentinels + masked tokens + closing sentinel
  spans = std::min(spans, config.max_target_length - masked - 1);
  const std::size_t kept = length - masked;
  spans = std::min(spans, kept + 1);  // interior gaps need one kept token each

  std::vector<std::size_t> lengths(spans, masked / spans);
  for (std::size_t i = 0; i < masked % spans; ++i) ++lengths[i];
  rng.shuffle(lengths);

  // Stars and bars: `spans` bars among leftover + spans slots (Floyd sampling).
  const std::size_t leftover = kept - (spans - 1);
  const std::size_t slots = leftover + spans;
  std::set<std::size_t> bars;
  for (std::size_t j = slots - spans; j < slots; ++j) {
    const auto t = static_cast<std::size_t>(rng.below(j + 1));
    if (!bars.insert(t).second) bars.insert(j);
  }

  SpanPlan plan;
  plan.masked = masked;
  std::size_t pos = 0;
  std::size_t prev_bar = 0;
  std::size_t k = 0;
  for (std::size_t bar : bars) {
    const std::size_t gap = k == 0 ? bar : bar - prev_bar - 1;
    pos += gap + (k == 0 ? 0 : 1);
    plan.spans.push_back({pos, pos + lengths[k]});
    pos += lengths[k];
    prev_bar = bar;
    ++k;
  }
  return plan;
}

DenoisingSample span_corrupt(std::span<const std::string> window, const CorruptionConfig& config,
                             std::uint64_t stream) {
  config.validate();
  if (window.size() != config.sequence_length) {
    throw Error("corruptor", "window has " + std::to_string(window.size()) +
                                 " tokens, expected sequence_length " +
                                 std::to_string(config.sequence_length));
  }
  Rng rng = Rng::for_stream(config.seed, stream);
  const SpanPlan plan = plan_spans(window.size(), config, rng);

  DenoisingSample sample;
  sample.source_window = {0, window.size()};
  sample.input_tokens.reserve(window.size() - plan.masked + plan.spans.size());
  sample.target_tokens.reserve(plan.masked + plan.spans.size() + 1);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < plan.spans.size(); ++i) {
    const auto& span = plan.spans[i];
    sample.input_tokens.insert(sample.input_tokens.end(), window.begin() + pos,
                               window.begin() + span.start);
    sample.input_tokens.push_back(sentinel(i));
    sample.target_tokens.push_back(sentinel(i));
    sample.target_tokens.insert(sample.target_tokens.end(), window.begin() + span.start,
                                window.begin() + span.end);
    pos = span.end;
  }
  sample.input_tokens.insert(sample.input_tokens.end(), window.begin() + pos, window.end());
  sample.target_tokens.push_back(sentinel(plan.spans.size()));
  return sample;
}

Tokens reconstruct(const DenoisingSample& sample) {
  // Split the target into its spans, checking sentinel order.
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end) into target
  const auto& target = sample.target_tokens;
  if (target.empty() || sentinel_index(target.front()) != std::optional<std::size_t>(0)) {
    throw Error("corruptor", "sentinel mismatch: target must start with " + sentinel(0));
  }
  std::size_t expected = 0;
  std::size_t span_begin = 1;
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (auto idx = sentinel_index(target[i])) {
      if (*idx != expected + 1) {
        throw Error("corruptor", "sentinel mismatch: " + target[i] + " out of order in target");
      }
      spans.emplace_back(span_begin, i);
      span_begin = i + 1;
      ++expected;
    }
  }
  if (span_begin != target.size() || spans.empty()) {
    throw Error("corruptor", "sentinel mismatch: target must end with a closing sentinel");
  }

  Tokens out;
  std::size_t next = 0;
  for (const auto& tok : sample.input_tokens) {
    if (auto idx = sentinel_index(tok)) {
      if (*idx != next || next >= spans.size()) {
        throw Error("corruptor", "sentinel mismatch: unexpected " + tok + " in input");
      }
      out.insert(out.end(), target.begin() + static_cast<std::ptrdiff_t>(spans[next].first),
                 target.begin() + static_cast<std::ptrdiff_t>(spans[next].second));
      ++next;
    } else {
      out.push_back(tok);
    }
  }
  if (next != spans.size()) {
    throw Error("corruptor", "sentinel mismatch: target has " + sentinel(next) +
                                 " but the input does not");
  }
  return out;
}

std::vector<NextTokenSample> next_token_samples(std::span<const std::string> stream,
                                                std::size_t window) {
  if (window < 2) throw Error("corruptor", "next-token window must be >= 2");
  std::vector<NextTokenSample> out;
  out.reserve(stream.size() / window);
  for (std::size_t start = 0; start + window <= stream.size(); start += window) {
    out.push_back({Tokens(stream.begin() + start, stream.begin() + start + window),
                   {start, start + window}});
  }
  return out;
}

MixPreset parse_mix(std::string_view name) {
  if (name == "en") return MixPreset::en_only;
  if (name == "hi") return MixPreset::hi_only;
  if (name == "en+hi" || name == "en_hi") return MixPreset::en_hi;
  throw Error("corruptor", "unknown language mix '" + std::string(name) + "' (en | hi | en+hi)");
}

std::string_view to_string(MixPreset mix) noexcept {
  switch (mix) {
    case MixPreset::en_only: return "en";
    case MixPreset::hi_only: return "hi";
    case MixPreset::en_hi: return "en+hi";
  }
  return "en";
}

WindowStream::WindowStream(DocumentSource source, Language lang, std::size_t window)
    : source_(std::move(source)), lang_(lang), window_(window) {
  if (window_ == 0) throw Error("corruptor", "window length must be >= 1");
}

bool WindowStream::refill() {
  while (!exhausted_) {
    auto doc = source_();
    if (!doc) {
      exhausted_ = true;
      return false;
    }
    if (doc->language != lang_) continue;
    Tokens tokens = textseg::tokenize_words(doc->text, lang_);
    if (tokens.empty()) continue;
    if (any_doc_) buffer_.emplace_back(kDocSeparator);
    any_doc_ = true;
    buffer_.insert(buffer_.end(), std::make_move_iterator(tokens.begin()),
                   std::make_move_iterator(tokens.end()));
    return true;
  }
  return false;
}

std::optional<std::pair<Tokens, TokenSpan>> WindowStream::next() {
  while (buffer_.size() - head_ < window_) {
    if (head_ > 0) {
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(head_));
      head_ = 0;
    }
    if (!refill()) return std::nullopt;
  }
  const auto first = buffer_.begin() + static_cast<std::ptrdiff_t>(head_);
  Tokens window(std::make_move_iterator(first),
                std::make_move_iterator(first + static_cast<std::ptrdiff_t>(window_)));
  head_ += window_;
  TokenSpan span{buffer_start_, buffer_start_ + window_};
  buffer_start_ += window_;
  ++produced_;
  return std::make_pair(std::move(window), span);
}

void build_pretrain_corpus(const std::function<DocumentSource(Language)>& sources,
                           const PretrainOptions& options, const SampleSink& sink) {
  const bool denoise = options.objective == Objective::span_corruption;
  if (denoise) options.config.validate();
  const std::size_t window = denoise ? options.config.sequence_length : options.ntp_window;
  if (!denoise && window < 2) throw Error("corruptor", "next-token window must be >= 2");

  std::vector<Language> languages;
  if (options.mix != MixPreset::hi_only) languages.push_back(Language::en);
  if (options.mix != MixPreset::en_only) languages.push_back(Language::hi);

  std::optional<std::size_t> per_language;
  if (options.quota) {
    if (languages.size() == 2 && *options.quota % 2 != 0) {
      throw Error("corruptor", "en+hi quota must be even for an exact 50/50 mix");
    }
    per_language = *options.quota / languages.size();
  } else if (languages.size() == 2) {
    throw Error("corruptor", "the en+hi preset needs an explicit quota");
  }

  std::vector<WindowStream> streams;
  for (Language lang : languages) streams.emplace_back(sources(lang), lang, window);

  auto emit = [&](std::size_t which) {
    auto& stream = streams[which];
    auto next = stream.next();
    if (!next) return false;
    PretrainSample s;
    s.language = languages[which];
    s.ordinal = stream.produced() - 1;
    if (denoise) {
      DenoisingSample d = span_corrupt(next->first, options.config,
                                       language_stream(s.language, s.ordinal));
      d.source_window = next->second;
      s.sample = std::move(d);
    } else {
      s.sample = NextTokenSample{std::move(next->first), next->second};
    }
    sink(s);
    return true;
  };

  auto shortfall = [&](std::size_t which) {
    // Drain to report exactly how many windows the pool holds.
    while (streams[which].next()) {
    }
    const std::size_t available = streams[which].produced();
    throw Error("corruptor", std::string(lexsum::to_string(languages[which])) +
                                 " pool exhausted: requested " + std::to_string(*per_language) +
                                 " windows, " + std::to_string(available) +
                                 " available (shortfall " +
                                 std::to_string(*per_language - available) + ")");
  };

  if (!per_language) {
    while (emit(0)) {
    }
    return;
  }

  std::vector<std::size_t> order;
  order.reserve(*per_language * languages.size());
  for (std::size_t l = 0; l < languages.size(); ++l) order.insert(order.end(), *per_language, l);
  if (languages.size() > 1) {
    Rng rng = Rng::for_stream(options.config.seed, kInterleaveStream);
    rng.shuffle(order);
  }
  for (std::size_t which : order) {
    if (!emit(which)) shortfall(which);
  }
}

std::vector<PretrainSample> build_pretrain_corpus(std::span<const corpus::CorpusDocument> docs,
                                                  const PretrainOptions& options) {
  std::vector<PretrainSample> out;
  build_pretrain_corpus(
      [&](Language) -> DocumentSource {
        return [&docs, i = std::size_t{0}]() mutable -> std::optional<corpus::CorpusDocument> {
          if (i >= docs.size()) return std::nullopt;
          return docs[i++];
        };
      },
      options, [&](const PretrainSample& s) { out.push_back(s); });
  return out;
}

}  // namespace lexsum::corruptor
