#include <doctest.h>

#include <httplib.h>
#include <poll.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <functional>
#include <thread>

#include "lexsum/provider.hpp"

using namespace lexsum;
using namespace lexsum::provider;
using nlohmann::json;

namespace {

using Handler = std::function<std::string(const std::string& request_line)>;

/// In-process backend on a pair of pipes. Replies are sent out of order: each
/// request is held until the next one arrives (or 20 ms pass), then the newer
/// request is answered first.
class PipeServer {
 public:
  explicit PipeServer(Handler handler, bool send_ready = true, std::size_t dim = StubProvider::kDim)
      : handler_(std::move(handler)) {
    ::signal(SIGPIPE, SIG_IGN);
    int to_server[2], to_client[2];
    REQUIRE(::pipe(to_server) == 0);
    REQUIRE(::pipe(to_client) == 0);
    server_in_ = to_server[0];
    server_out_ = to_client[1];
    client_read_ = to_client[0];
    client_write_ = to_server[1];
    if (send_ready) {
      write_line(json{{"ready", true}, {"dim", dim}, {"models", {{"embed", "test"}}}}.dump());
    }
    thread_ = std::thread([this] { loop(); });
  }

  ~PipeServer() {
    if (thread_.joinable()) thread_.join();
    ::close(server_in_);
  }

  std::unique_ptr<Channel> channel(bool expect_ready = true, std::size_t in_flight = 8) {
    return make_fd_channel(client_read_, client_write_, expect_ready, in_flight);
  }

  std::size_t requests() const { return requests_; }

 private:
  void write_line(const std::string& line) {
    const std::string data = line + "\n";
    if (::write(server_out_, data.data(), data.size()) < 0) eof_ = true;
  }

  bool read_line(std::string& line, int timeout_ms) {
    while (true) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return true;
      }
      pollfd pfd{server_in_, POLLIN, 0};
      if (::poll(&pfd, 1, timeout_ms) <= 0) return false;
      char chunk[4096];
      const ssize_t n = ::read(server_in_, chunk, sizeof chunk);
      if (n <= 0) {
        eof_ = true;
        return false;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void loop() {
    std::optional<std::string> held;
    std::string line;
    while (!eof_) {
      if (read_line(line, held ? 20 : -1)) {
        ++requests_;
        if (held) {
          write_line(handler_(line));
          write_line(handler_(*held));
          held.reset();
        } else {
          held = line;
        }
      } else if (held) {
        write_line(handler_(*held));
        held.reset();
      }
    }
    ::close(server_out_);
  }

  Handler handler_;
  int server_in_, server_out_, client_read_, client_write_;
  std::string buffer_;
  bool eof_ = false;
  std::atomic<std::size_t> requests_{0};
  std::thread thread_;
};

Handler stub_handler() {
  return [](const std::string& line) {
    static StubProvider stub;
    return handle_request_line(stub, line);
  };
}

std::vector<std::string> sample_texts(std::size_t n) {
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n; ++i) {
    texts.push_back("The High Court of Delhi heard appeal number " + std::to_string(i) + " today");
  }
  return texts;
}

void check_matches_stub(Provider& remote) {
  StubProvider stub;
  const auto texts = sample_texts(150);
  CHECK(remote.embed_tokens(texts, Language::en) == stub.embed_tokens(texts, Language::en));
  CHECK(remote.embed_sentences(texts, Language::en) == stub.embed_sentences(texts, Language::en));
  CHECK(remote.ner(texts, Language::en) == stub.ner(texts, Language::en));
  const std::vector<NliPair> pairs = {{"a b c", "a b"}, {"x", "y"}, {"same text", "same text"}};
  const auto got = remote.nli(pairs);
  const auto want = stub.nli(pairs);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].entail == want[i].entail);
}

}  // namespace

TEST_CASE("stub provider semantics") {
  StubProvider stub;
  const auto v = StubProvider::token_vector("court");
  CHECK(v.size() == StubProvider::kDim);
  CHECK(v == StubProvider::token_vector("court"));
  double norm = 0;
  for (double x : v) norm += x * x;
  CHECK(norm == doctest::Approx(1.0));
  const std::vector<std::string> texts = {"the court held", "a court"};
  const auto tv = stub.embed_tokens(texts, Language::en);
  CHECK(tv[0][1] == tv[1][1]);

  const auto e = StubProvider::stub_entities("the Supreme Court of India ruled");
  REQUIRE_FALSE(e.empty());
  CHECK(e[0].surface == "Supreme Court");
  CHECK(StubProvider::stub_entities("").empty());
  CHECK(StubProvider::stub_entities("The appeal failed.").empty());

  CHECK(StubProvider::stub_nli("the appeal", "the appeal").entail == 1.0);
  CHECK(StubProvider::stub_nli("alpha beta", "gamma").neutral == 1.0);
  CHECK(StubProvider::stub_nli("a b c d", "a b").entail == doctest::Approx(0.5));
  CHECK(stub.info().dim == StubProvider::kDim);
}

TEST_CASE("wire protocol") {
  CHECK(encode_request(7, Op::nli, ordered_json{{"pairs", json::array()}}) ==
        R"({"id":7,"op":"nli","payload":{"pairs":[]}})");
  CHECK(encode_result(3, ordered_json{{"vectors", json::array()}}) == R"({"id":3,"result":{"vectors":[]}})");
  CHECK(encode_error(4, "boom") == R"({"id":4,"error":"boom"})");
  CHECK(parse_op("embed_sentences") == Op::embed_sentences);
  CHECK_FALSE(parse_op("translate").has_value());

  StubProvider stub;
  const auto ok = json::parse(handle_request_line(
      stub, R"({"id":5,"op":"embed_sentences","payload":{"texts":["a b"],"language":"en"}})"));
  CHECK(ok["id"] == 5);
  CHECK(ok["result"]["vectors"][0].size() == StubProvider::kDim);
  const auto bad = json::parse(handle_request_line(stub, "not json"));
  CHECK(bad["id"] == 0);
  CHECK(bad.contains("error"));
  CHECK(json::parse(handle_request_line(stub, R"({"id":9,"op":"translate","payload":{}})")).contains("error"));
  CHECK(json::parse(handle_request_line(stub, R"({"id":9,"op":"nli","payload":{}})")).contains("error"));

  std::istringstream in(R"({"id":1,"op":"ner","payload":{"texts":["the Supreme Court"],"language":"en"}})" "\n");
  std::ostringstream out;
  serve(stub, in, out);
  std::istringstream lines(out.str());
  std::string ready, reply;
  std::getline(lines, ready);
  std::getline(lines, reply);
  CHECK(json::parse(ready)["ready"] == true);
  CHECK(json::parse(reply)["result"]["entities"][0][0]["surface"] == "Supreme Court");
}

TEST_CASE("fd channel matches out-of-order replies") {
  PipeServer server(stub_handler());
  RemoteProvider remote(server.channel(true, 4), "pipe", {16, 4});
  check_matches_stub(remote);
  CHECK(server.requests() > 10);
  CHECK(remote.info().dim == StubProvider::kDim);
}

TEST_CASE("backend errors carry batch context") {
  PipeServer server([](const std::string& line) {
    const auto req = json::parse(line);
    return encode_error(req["id"].get<std::uint64_t>(), "model not loaded");
  });
  RemoteProvider remote(server.channel(), "pipe", {4, 2});
  CHECK_THROWS_WITH_AS(remote.embed_sentences(sample_texts(10), Language::en),
                       doctest::Contains("embed_sentences batch 0 (items 0..4): model not loaded"),
                       Error);
}

TEST_CASE("vector dimension drift is fatal") {
  std::atomic<int> calls{0};
  PipeServer server(
      [&](const std::string& line) {
        const auto req = json::parse(line);
        const std::size_t dim = calls++ == 0 ? 3 : 4;
        ordered_json vectors = json::array();
        for (std::size_t i = 0; i < req["payload"]["texts"].size(); ++i) vectors.push_back(std::vector<double>(dim, 0.5));
        return encode_result(req["id"].get<std::uint64_t>(), {{"vectors", vectors}});
      },
      false);
  RemoteProvider remote(server.channel(false), "pipe", {64, 1});
  const std::vector<std::string> one = {"x"};
  CHECK(remote.embed_sentences(one, Language::en)[0].size() == 3);
  CHECK_THROWS_WITH_AS(remote.embed_sentences(one, Language::en), doctest::Contains("dimension drift"), Error);
}

TEST_CASE("malformed backend answers are rejected") {
  SUBCASE("nli probabilities must sum to one") {
    PipeServer server([](const std::string& line) {
      const auto req = json::parse(line);
      return encode_result(req["id"].get<std::uint64_t>(),
                           {{"probs", {{{"entail", 0.2}, {"neutral", 0.2}, {"contradict", 0.1}}}}});
    });
    RemoteProvider remote(server.channel(), "pipe");
    const std::vector<NliPair> pairs = {{"a", "b"}};
    CHECK_THROWS_WITH_AS(remote.nli(pairs), doctest::Contains("distribution"), Error);
  }
  SUBCASE("entity surfaces must come from the text") {
    PipeServer server([](const std::string& line) {
      const auto req = json::parse(line);
      return encode_result(req["id"].get<std::uint64_t>(),
                           {{"entities", {{{{"surface", "Bombay"}, {"type", "LOC"}}}}}});
    });
    RemoteProvider remote(server.channel(), "pipe");
    const std::vector<std::string> texts = {"Delhi High Court"};
    CHECK_THROWS_AS(remote.ner(texts, Language::en), Error);
  }
  SUBCASE("garbage response line closes the session") {
    PipeServer server([](const std::string&) { return std::string("garbage"); });
    RemoteProvider remote(server.channel(), "pipe");
    const std::vector<std::string> texts = {"x"};
    CHECK_THROWS_WITH_AS(remote.embed_sentences(texts, Language::en), doctest::Contains("malformed response"), Error);
  }
}

#ifdef LEXSUM_CLI_PATH
TEST_CASE("subprocess backend speaks to serve-stub") {
  auto remote = make_provider(std::string("subprocess:") + LEXSUM_CLI_PATH + " serve-stub");
  check_matches_stub(*remote);
  const auto info = remote->info();
  CHECK(info.dim == StubProvider::kDim);
  CHECK(info.models.contains("embed"));
}
#endif

TEST_CASE("subprocess backend failures") {
  CHECK_THROWS_WITH_AS(make_provider("subprocess:exit 3"), doctest::Contains("ready line"), Error);
  CHECK_THROWS_WITH_AS(make_provider("subprocess:echo hello; cat"), doctest::Contains("invalid ready line"), Error);
  CHECK_THROWS_AS(make_provider("subprocess:"), Error);
  CHECK_THROWS_AS(make_provider("carrier-pigeon"), Error);
  CHECK_THROWS_AS(make_provider("http:https://example.org"), Error);
}

TEST_CASE("http backend") {
  StubProvider stub;
  httplib::Server server;
  server.Post("/rpc", [&](const httplib::Request& req, httplib::Response& res) {
    std::string body = req.body;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    res.set_content(handle_request_line(stub, body), "application/x-ndjson");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto remote = make_provider("http://127.0.0.1:" + std::to_string(port) + "/rpc");
  check_matches_stub(*remote);
  auto prefixed = make_provider("http:http://127.0.0.1:" + std::to_string(port) + "/rpc");
  CHECK(prefixed->info().dim == StubProvider::kDim);

  auto wrong_path = make_provider("http://127.0.0.1:" + std::to_string(port) + "/missing");
  const std::vector<std::string> one = {"x"};
  CHECK_THROWS_WITH_AS(wrong_path->embed_sentences(one, Language::en), doctest::Contains("http status 404"), Error);

  server.stop();
  thread.join();
}

TEST_CASE("backend selection from the environment") {
  ::unsetenv(kBackendEnv);
  CHECK(provider_from_env() == nullptr);
  ::setenv(kBackendEnv, "stub", 1);
  auto p = provider_from_env();
  REQUIRE(p != nullptr);
  CHECK(p->info().backend == "stub");
  ::unsetenv(kBackendEnv);
}
