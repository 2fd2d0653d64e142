#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexsum/common.hpp"

namespace lexsum::provider {

using Vector = std::vector<double>;

struct Entity {
  std::string surface;
  std::string type;
  bool operator==(const Entity&) const = default;
};

struct NliPair {
  std::string premise;
  std::string hypothesis;
};

struct NliProbs {
  double entail = 0.0;
  double neutral = 0.0;
  double contradict = 0.0;
};

struct ProviderInfo {
  std::string backend;
  std::size_t dim = 0;
  nlohmann::json models = nlohmann::json::object();
};

/// External neural capabilities. Implementations must be safe to call from
/// several threads.
class Provider {
 public:
  virtual ~Provider() = default;

  /// One vector per word token per text.
  virtual std::vector<std::vector<Vector>> embed_tokens(std::span<const std::string> texts,
                                                        Language lang) = 0;
  virtual std::vector<Vector> embed_sentences(std::span<const std::string> texts,
                                              Language lang) = 0;
  virtual std::vector<std::vector<Entity>> ner(std::span<const std::string> texts,
                                               Language lang) = 0;
  virtual std::vector<NliProbs> nli(std::span<const NliPair> pairs) = 0;
  virtual ProviderInfo info() = 0;
};

/// Deterministic in-process backend.
///
/// Token vectors are 64-dimensional feature-hashed character trigrams of
/// "<token>" (FNV-1a 64 over UTF-8 bytes), L2-normalized. Sentence vectors are
/// the normalized mean of token vectors. NER flags runs of capitalized words
/// (runs of one word only when not sentence-initial, leading determiners
/// dropped). NLI returns entail = Jaccard overlap of the token sets,
/// neutral = 1 - entail, contradict = 0.
class StubProvider final : public Provider {
 public:
  static constexpr std::size_t kDim = 64;

  std::vector<std::vector<Vector>> embed_tokens(std::span<const std::string> texts,
                                                Language lang) override;
  std::vector<Vector> embed_sentences(std::span<const std::string> texts, Language lang) override;
  std::vector<std::vector<Entity>> ner(std::span<const std::string> texts, Language lang) override;
  std::vector<NliProbs> nli(std::span<const NliPair> pairs) override;
  ProviderInfo info() override;

  static Vector token_vector(std::string_view token);
  static std::vector<Entity> stub_entities(std::string_view text);
  static NliProbs stub_nli(std::string_view premise, std::string_view hypothesis);
};

// ---------------------------------------------------------------------------
// Wire protocol: one JSON object per line.
//   request  {"id":u64,"op":string,"payload":{...}}
//   response {"id":u64,"result":{...}} or {"id":u64,"error":string}
// ---------------------------------------------------------------------------

using ordered_json = nlohmann::ordered_json;

enum class Op { embed_tokens, embed_sentences, ner, nli };

std::string_view to_string(Op op) noexcept;
std::optional<Op> parse_op(std::string_view name) noexcept;

std::string encode_request(std::uint64_t id, Op op, const ordered_json& payload);
std::string encode_result(std::uint64_t id, const ordered_json& result);
std::string encode_error(std::uint64_t id, std::string_view message);

/// Server side: answers one request line with one response line. Malformed
/// requests produce an error response (id 0 when the id is unreadable).
std::string handle_request_line(Provider& backend, std::string_view line);

/// Serves the protocol on a pair of streams until EOF; emits the ready line
/// {"ready":true,"dim":N,"models":{...}} first.
void serve(Provider& backend, std::istream& in, std::ostream& out);

/// Bidirectional line channel that matches responses to requests by id.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual std::future<nlohmann::json> call(std::uint64_t id, std::string request_line) = 0;
  virtual std::optional<nlohmann::json> handshake() { return std::nullopt; }
};

struct ClientOptions {
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 8;
};

/// Provider speaking the wire protocol over a Channel. Batches requests,
/// keeps up to `max_in_flight` outstanding, and enforces a constant vector
/// dimension for the life of the session.
class RemoteProvider final : public Provider {
 public:
  RemoteProvider(std::unique_ptr<Channel> channel, std::string backend_name,
                 ClientOptions options = {});

  std::vector<std::vector<Vector>> embed_tokens(std::span<const std::string> texts,
                                                Language lang) override;
  std::vector<Vector> embed_sentences(std::span<const std::string> texts, Language lang) override;
  std::vector<std::vector<Entity>> ner(std::span<const std::string> texts, Language lang) override;
  std::vector<NliProbs> nli(std::span<const NliPair> pairs) override;
  ProviderInfo info() override;

 private:
  std::vector<nlohmann::json> run_batches(Op op, std::size_t count,
                                          const std::function<ordered_json(std::size_t, std::size_t)>& payload);
  void check_dimension(std::size_t dim);

  std::unique_ptr<Channel> channel_;
  std::string backend_name_;
  ClientOptions options_;
  std::mutex mutex_;
  std::uint64_t next_id_ = 1;
  std::optional<std::size_t> dim_;
  std::optional<nlohmann::json> handshake_;
};

/// Channel over a pair of file descriptors (write requests to `write_fd`,
/// read responses from `read_fd`). Takes ownership of both descriptors.
std::unique_ptr<Channel> make_fd_channel(int read_fd, int write_fd, bool expect_ready_line,
                                         std::size_t max_in_flight = 8);

/// Spawns `/bin/sh -c command` and talks to it over its stdin/stdout. Waits for
/// the ready line.
std::unique_ptr<Channel> make_subprocess_channel(const std::string& command,
                                                 std::size_t max_in_flight = 8);

/// POSTs each request line to `url`; the response body is the response line.
std::unique_ptr<Channel> make_http_channel(const std::string& url, std::size_t max_in_flight = 8);

inline constexpr const char* kBackendEnv = "LEXSUM_PROVIDER";

/// Builds a provider from "stub", "subprocess:<command>" or "http:<url>".
std::unique_ptr<Provider> make_provider(std::string_view spec, ClientOptions options = {});

/// Reads LEXSUM_PROVIDER; returns nullptr when it is unset or empty.
std::unique_ptr<Provider> provider_from_env(ClientOptions options = {});

}  // namespace lexsum::provider
