#include "lexsum/provider.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <set>

#include "lexsum/textseg.hpp"

namespace lexsum::provider {
namespace {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void normalize_in_place(Vector& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq <= 0.0) return;
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
}

Vector mean_pool(const std::vector<Vector>& vectors, std::size_t dim) {
  Vector out(dim, 0.0);
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < dim; ++i) out[i] += v[i];
  }
  if (!vectors.empty()) {
    for (double& x : out) x /= static_cast<double>(vectors.size());
  }
  normalize_in_place(out);
  return out;
}

bool starts_upper(std::string_view word) {
  int32_t i = 0;
  UChar32 c;
  U8_NEXT(reinterpret_cast<const uint8_t*>(word.data()), i, static_cast<int32_t>(word.size()), c);
  return c > 0 && u_isupper(c);
}

bool is_determiner(std::string_view word) {
  static const std::set<std::string_view> kWords = {"The", "A", "An", "In", "On", "This",
                                                    "That", "These", "Those", "By", "Of"};
  return kWords.count(word) > 0;
}

ProviderInfo stub_info() {
  ProviderInfo info;
  info.backend = "stub";
  info.dim = StubProvider::kDim;
  info.models = {{"embed", "stub-trigram-hash-64"},
                 {"ner", "stub-capitalized-runs"},
                 {"nli", "stub-token-jaccard"}};
  return info;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stub backend
// ---------------------------------------------------------------------------

Vector StubProvider::token_vector(std::string_view token) {
  Vector v(kDim, 0.0);
  std::string padded;
  padded.reserve(token.size() + 2);
  padded += '<';
  padded += token;
  padded += '>';
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    v[fnv1a64(std::string_view(padded).substr(i, 3)) % kDim] += 1.0;
  }
  normalize_in_place(v);
  return v;
}

std::vector<std::vector<Vector>> StubProvider::embed_tokens(std::span<const std::string> texts,
                                                            Language lang) {
  std::vector<std::vector<Vector>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<Vector> vectors;
    for (const auto& tok : textseg::tokenize_words(text, lang)) vectors.push_back(token_vector(tok));
    out.push_back(std::move(vectors));
  }
  return out;
}

std::vector<Vector> StubProvider::embed_sentences(std::span<const std::string> texts,
                                                  Language lang) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& per_text : embed_tokens(texts, lang)) out.push_back(mean_pool(per_text, kDim));
  return out;
}

std::vector<Entity> StubProvider::stub_entities(std::string_view text) {
  const auto words = textseg::tokenize_with_offsets(text, Language::en);
  std::vector<Entity> out;

  auto sentence_initial = [&](std::size_t begin) {
    std::size_t p = begin;
    while (p > 0 && std::isspace(static_cast<unsigned char>(text[p - 1]))) --p;
    if (p == 0) return true;
    const char prev = text[p - 1];
    return prev == '.' || prev == '?' || prev == '!' || prev == '"' || prev == ':';
  };
  auto only_space_between = [&](std::size_t a, std::size_t b) {
    for (std::size_t p = a; p < b; ++p) {
      if (!std::isspace(static_cast<unsigned char>(text[p]))) return false;
    }
    return true;
  };
  auto word_at = [&](std::size_t k) {
    return text.substr(words[k].begin, words[k].end - words[k].begin);
  };

  std::size_t i = 0;
  while (i < words.size()) {
    if (!starts_upper(word_at(i))) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < words.size() && starts_upper(word_at(j)) &&
           only_space_between(words[j - 1].end, words[j].begin)) {
      ++j;
    }
    std::size_t first = i;
    bool initial = sentence_initial(words[i].begin);
    while (first < j && is_determiner(word_at(first))) {
      ++first;
      initial = false;
    }
    const std::size_t len = j - first;
    if (len >= 2 || (len == 1 && !initial)) {
      out.push_back({std::string(text.substr(words[first].begin, words[j - 1].end - words[first].begin)),
                     "ENT"});
    }
    i = j;
  }
  return out;
}

std::vector<std::vector<Entity>> StubProvider::ner(std::span<const std::string> texts, Language lang) {
  std::vector<std::vector<Entity>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    // Devanagari has no case, so the capitalization rule finds nothing there.
    out.push_back(lang == Language::en ? stub_entities(text) : std::vector<Entity>{});
  }
  return out;
}

NliProbs StubProvider::stub_nli(std::string_view premise, std::string_view hypothesis) {
  const auto p = textseg::tokenize_words(premise);
  const auto h = textseg::tokenize_words(hypothesis);
  const std::set<std::string> ps(p.begin(), p.end());
  const std::set<std::string> hs(h.begin(), h.end());
  std::size_t inter = 0;
  for (const auto& t : hs) inter += ps.count(t);
  const std::size_t uni = ps.size() + hs.size() - inter;
  NliProbs probs;
  probs.entail = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  probs.neutral = 1.0 - probs.entail;
  return probs;
}

std::vector<NliProbs> StubProvider::nli(std::span<const NliPair> pairs) {
  std::vector<NliProbs> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) out.push_back(stub_nli(pair.premise, pair.hypothesis));
  return out;
}

ProviderInfo StubProvider::info() { return stub_info(); }

// ---------------------------------------------------------------------------
// Wire protocol
// ---------------------------------------------------------------------------

std::string_view to_string(Op op) noexcept {
  switch (op) {
    case Op::embed_tokens: return "embed_tokens";
    case Op::embed_sentences: return "embed_sentences";
    case Op::ner: return "ner";
    case Op::nli: return "nli";
  }
  return "";
}

std::optional<Op> parse_op(std::string_view name) noexcept {
  if (name == "embed_tokens") return Op::embed_tokens;
  if (name == "embed_sentences") return Op::embed_sentences;
  if (name == "ner") return Op::ner;
  if (name == "nli") return Op::nli;
  return std::nullopt;
}

std::string encode_request(std::uint64_t id, Op op, const ordered_json& payload) {
  ordered_json msg;
  msg["id"] = id;
  msg["op"] = std::string(to_string(op));
  msg["payload"] = payload;
  return msg.dump();
}

std::string encode_result(std::uint64_t id, const ordered_json& result) {
  ordered_json msg;
  msg["id"] = id;
  msg["result"] = result;
  return msg.dump();
}

std::string encode_error(std::uint64_t id, std::string_view message) {
  ordered_json msg;
  msg["id"] = id;
  msg["error"] = std::string(message);
  return msg.dump();
}

std::string handle_request_line(Provider& backend, std::string_view line) {
  const json req = json::parse(line, nullptr, false);
  if (req.is_discarded() || !req.is_object()) return encode_error(0, "malformed request: not JSON");
  if (!req.contains("id") || !req["id"].is_number_unsigned()) {
    return encode_error(0, "malformed request: missing id");
  }
  const auto id = req["id"].get<std::uint64_t>();
  if (!req.contains("op") || !req["op"].is_string()) return encode_error(id, "malformed request: missing op");
  const auto op = parse_op(req["op"].get<std::string>());
  if (!op) return encode_error(id, "unknown op '" + req["op"].get<std::string>() + "'");
  if (!req.contains("payload") || !req["payload"].is_object()) {
    return encode_error(id, "malformed request: missing payload");
  }
  const json& payload = req["payload"];

  try {
    ordered_json result;
    if (*op == Op::nli) {
      std::vector<NliPair> pairs;
      for (const auto& p : payload.at("pairs")) {
        pairs.push_back({p.at("premise").get<std::string>(), p.at("hypothesis").get<std::string>()});
      }
      auto probs = backend.nli(pairs);
      result["probs"] = ordered_json::array();
      for (const auto& pr : probs) {
        result["probs"].push_back(
            {{"entail", pr.entail}, {"neutral", pr.neutral}, {"contradict", pr.contradict}});
      }
      return encode_result(id, result);
    }

    const auto texts = payload.at("texts").get<std::vector<std::string>>();
    const Language lang = parse_language(payload.value("language", std::string("en")));
    switch (*op) {
      case Op::embed_tokens:
        result["vectors"] = backend.embed_tokens(texts, lang);
        break;
      case Op::embed_sentences:
        result["vectors"] = backend.embed_sentences(texts, lang);
        break;
      case Op::ner: {
        result["entities"] = ordered_json::array();
        for (const auto& ents : backend.ner(texts, lang)) {
          ordered_json arr = ordered_json::array();
          for (const auto& e : ents) arr.push_back({{"surface", e.surface}, {"type", e.type}});
          result["entities"].push_back(std::move(arr));
        }
        break;
      }
      case Op::nli: break;
    }
    return encode_result(id, result);
  } catch (const std::exception& e) {
    return encode_error(id, std::string("bad payload: ") + e.what());
  }
}

void serve(Provider& backend, std::istream& in, std::ostream& out) {
  const ProviderInfo info = backend.info();
  ordered_json ready;
  ready["ready"] = true;
  ready["dim"] = info.dim;
  ready["models"] = info.models;
  out << ready.dump() << '\n' << std::flush;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle_request_line(backend, line) << '\n' << std::flush;
  }
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

RemoteProvider::RemoteProvider(std::unique_ptr<Channel> channel, std::string backend_name,
                               ClientOptions options)
    : channel_(std::move(channel)), backend_name_(std::move(backend_name)), options_(options) {
  if (options_.batch_size == 0) options_.batch_size = 1;
  handshake_ = channel_->handshake();
  if (handshake_ && handshake_->contains("dim") && (*handshake_)["dim"].is_number_unsigned()) {
    dim_ = (*handshake_)["dim"].get<std::size_t>();
  }
}

void RemoteProvider::check_dimension(std::size_t dim) {
  std::lock_guard lock(mutex_);
  if (!dim_) {
    dim_ = dim;
  } else if (*dim_ != dim) {
    throw Error("provider", "vector dimension drift: session dimension " + std::to_string(*dim_) +
                                ", got " + std::to_string(dim));
  }
}

std::vector<json> RemoteProvider::run_batches(
    Op op, std::size_t count, const std::function<ordered_json(std::size_t, std::size_t)>& payload) {
  struct Pending {
    std::size_t begin, end;
    std::future<json> response;
  };
  std::vector<Pending> pending;
  for (std::size_t b = 0; b < count; b += options_.batch_size) {
    const std::size_t e = std::min(count, b + options_.batch_size);
    std::uint64_t id;
    {
      std::lock_guard lock(mutex_);
      id = next_id_++;
    }
    pending.push_back({b, e, channel_->call(id, encode_request(id, op, payload(b, e)))});
  }

  std::vector<json> results;
  results.reserve(pending.size());
  for (std::size_t k = 0; k < pending.size(); ++k) {
    auto& p = pending[k];
    const std::string where = std::string(to_string(op)) + " batch " + std::to_string(k) +
                              " (items " + std::to_string(p.begin) + ".." +
                              std::to_string(p.end) + ")";
    json response;
    try {
      response = p.response.get();
    } catch (const std::exception& e) {
      throw Error("provider", backend_name_ + ": " + where + ": " + e.what());
    }
    if (response.contains("error")) {
      throw Error("provider", backend_name_ + ": " + where + ": " +
                                  response["error"].get<std::string>());
    }
    if (!response.contains("result") || !response["result"].is_object()) {
      throw Error("provider", backend_name_ + ": " + where + ": response without result");
    }
    results.push_back(std::move(response["result"]));
  }
  return results;
}

std::vector<std::vector<Vector>> RemoteProvider::embed_tokens(std::span<const std::string> texts,
                                                              Language lang) {
  auto results = run_batches(Op::embed_tokens, texts.size(), [&](std::size_t b, std::size_t e) {
    return ordered_json{{"texts", std::vector<std::string>(texts.begin() + b, texts.begin() + e)},
                        {"language", std::string(to_string(lang))}};
  });
  std::vector<std::vector<Vector>> out;
  for (auto& r : results) {
    for (auto& per_text : r.at("vectors")) {
      auto vectors = per_text.get<std::vector<Vector>>();
      for (const auto& v : vectors) check_dimension(v.size());
      out.push_back(std::move(vectors));
    }
  }
  if (out.size() != texts.size()) {
    throw Error("provider", backend_name_ + ": embed_tokens returned " + std::to_string(out.size()) +
                                " texts for " + std::to_string(texts.size()));
  }
  return out;
}

std::vector<Vector> RemoteProvider::embed_sentences(std::span<const std::string> texts,
                                                    Language lang) {
  auto results = run_batches(Op::embed_sentences, texts.size(), [&](std::size_t b, std::size_t e) {
    return ordered_json{{"texts", std::vector<std::string>(texts.begin() + b, texts.begin() + e)},
                        {"language", std::string(to_string(lang))}};
  });
  std::vector<Vector> out;
  for (auto& r : results) {
    for (auto& v : r.at("vectors")) {
      out.push_back(v.get<Vector>());
      check_dimension(out.back().size());
    }
  }
  if (out.size() != texts.size()) {
    throw Error("provider", backend_name_ + ": embed_sentences returned " +
                                std::to_string(out.size()) + " vectors for " +
                                std::to_string(texts.size()));
  }
  return out;
}

std::vector<std::vector<Entity>> RemoteProvider::ner(std::span<const std::string> texts,
                                                     Language lang) {
  auto results = run_batches(Op::ner, texts.size(), [&](std::size_t b, std::size_t e) {
    return ordered_json{{"texts", std::vector<std::string>(texts.begin() + b, texts.begin() + e)},
                        {"language", std::string(to_string(lang))}};
  });
  std::vector<std::vector<Entity>> out;
  for (auto& r : results) {
    for (auto& ents : r.at("entities")) {
      std::vector<Entity> list;
      for (auto& e : ents) list.push_back({e.at("surface").get<std::string>(), e.value("type", "")});
      out.push_back(std::move(list));
    }
  }
  if (out.size() != texts.size()) {
    throw Error("provider", backend_name_ + ": ner returned " + std::to_string(out.size()) +
                                " entity lists for " + std::to_string(texts.size()));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (const auto& e : out[i]) {
      if (texts[i].find(e.surface) == std::string::npos) {
        throw Error("provider", backend_name_ + ": ner surface '" + e.surface +
                                    "' is not a substring of its input");
      }
    }
  }
  return out;
}

std::vector<NliProbs> RemoteProvider::nli(std::span<const NliPair> pairs) {
  auto results = run_batches(Op::nli, pairs.size(), [&](std::size_t b, std::size_t e) {
    ordered_json arr = ordered_json::array();
    for (std::size_t i = b; i < e; ++i) {
      arr.push_back({{"premise", pairs[i].premise}, {"hypothesis", pairs[i].hypothesis}});
    }
    return ordered_json{{"pairs", std::move(arr)}};
  });
  std::vector<NliProbs> out;
  for (auto& r : results) {
    for (auto& p : r.at("probs")) {
      NliProbs probs{p.at("entail").get<double>(), p.at("neutral").get<double>(),
                     p.at("contradict").get<double>()};
      const double sum = probs.entail + probs.neutral + probs.contradict;
      if (std::abs(sum - 1.0) > 1e-6 || probs.entail < 0 || probs.neutral < 0 || probs.contradict < 0) {
        throw Error("provider", backend_name_ + ": nli probabilities do not form a distribution");
      }
      out.push_back(probs);
    }
  }
  if (out.size() != pairs.size()) {
    throw Error("provider", backend_name_ + ": nli returned " + std::to_string(out.size()) +
                                " results for " + std::to_string(pairs.size()));
  }
  return out;
}

ProviderInfo RemoteProvider::info() {
  ProviderInfo info;
  info.backend = backend_name_;
  if (handshake_ && handshake_->contains("models")) info.models = (*handshake_)["models"];
  if (!dim_) {
    const std::vector<std::string> probe = {"providers check"};
    embed_sentences(probe, Language::en);
  }
  std::lock_guard lock(mutex_);
  info.dim = dim_.value_or(0);
  return info;
}

std::unique_ptr<Provider> make_provider(std::string_view spec, ClientOptions options) {
  if (spec == "stub") return std::make_unique<StubProvider>();
  if (spec.starts_with("subprocess:")) {
    const std::string command(spec.substr(std::string_view("subprocess:").size()));
    if (command.empty()) throw Error("provider", "subprocess backend needs a command");
    return std::make_unique<RemoteProvider>(make_subprocess_channel(command, options.max_in_flight),
                                            "subprocess:" + command, options);
  }
  if (spec.starts_with("http:")) {
    // Accept both "http:http://host:port/path" and plain "http://host:port/path".
    std::string url(spec.substr(std::string_view("http:").size()));
    if (url.starts_with("//")) url = std::string(spec);
    return std::make_unique<RemoteProvider>(make_http_channel(url, options.max_in_flight),
                                            "http:" + url, options);
  }
  throw Error("provider", "unknown provider backend '" + std::string(spec) +
                              "' (expected stub | subprocess:<command> | http:<url>)");
}

std::unique_ptr<Provider> provider_from_env(ClientOptions options) {
  const char* value = std::getenv(kBackendEnv);
  if (value == nullptr || *value == '\0') return nullptr;
  return make_provider(value, options);
}

}  // namespace lexsum::provider
