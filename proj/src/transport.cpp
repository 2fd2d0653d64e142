#include <httplib.h>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <semaphore>
#include <thread>
#include <unordered_map>

#include "lexsum/provider.hpp"

namespace lexsum::provider {
namespace {

using nlohmann::json;

constexpr std::ptrdiff_t kMaxInFlightCeiling = 1024;

std::size_t clamp_in_flight(std::size_t n) {
  return std::clamp<std::size_t>(n, 1, static_cast<std::size_t>(kMaxInFlightCeiling));
}

class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  std::optional<std::string> next() {
    while (true) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      char chunk[65536];
      const ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return std::nullopt;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

bool write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

class FdChannel : public Channel {
 public:
  FdChannel(int read_fd, int write_fd, bool expect_ready, std::size_t max_in_flight)
      : read_fd_(read_fd), write_fd_(write_fd), reader_(read_fd),
        slots_(static_cast<std::ptrdiff_t>(clamp_in_flight(max_in_flight))) {
    if (expect_ready) {
      auto line = reader_.next();
      if (!line) {
        close_fds();
        throw Error("provider", "backend exited before its ready line");
      }
      json ready = json::parse(*line, nullptr, false);
      if (ready.is_discarded() || !ready.is_object() || !ready.value("ready", false)) {
        close_fds();
        throw Error("provider", "backend sent an invalid ready line: " + *line);
      }
      handshake_ = std::move(ready);
    }
    thread_ = std::thread([this] { read_loop(); });
  }

  ~FdChannel() override { shutdown(); }

  std::future<json> call(std::uint64_t id, std::string request_line) override {
    slots_.acquire();
    std::promise<json> promise;
    auto future = promise.get_future();
    {
      std::lock_guard lock(mutex_);
      if (closed_) {
        slots_.release();
        promise.set_exception(std::make_exception_ptr(Error("provider", "transport closed")));
        return future;
      }
      pending_.emplace(id, std::move(promise));
    }
    request_line += '\n';
    bool ok;
    {
      std::lock_guard lock(write_mutex_);
      ok = write_fd_ >= 0 && write_all(write_fd_, request_line);
    }
    if (!ok) fail(id, "transport write failed");
    return future;
  }

  std::optional<json> handshake() override { return handshake_; }

 protected:
  void shutdown() {
    {
      std::lock_guard lock(write_mutex_);
      if (write_fd_ >= 0) {
        ::close(write_fd_);
        write_fd_ = -1;
      }
    }
    on_write_closed();
    if (thread_.joinable()) thread_.join();
    if (read_fd_ >= 0) {
      ::close(read_fd_);
      read_fd_ = -1;
    }
  }

  virtual void on_write_closed() {}

 private:
  void close_fds() {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0) ::close(write_fd_);
    read_fd_ = write_fd_ = -1;
  }

  void fail(std::uint64_t id, const std::string& message) {
    std::lock_guard lock(mutex_);
    auto it = pending_.find(id);
    if (it == pending_.end()) return;
    it->second.set_exception(std::make_exception_ptr(Error("provider", message)));
    pending_.erase(it);
    slots_.release();
  }

  void read_loop() {
    std::string reason = "transport closed by backend";
    while (auto line = reader_.next()) {
      if (line->empty()) continue;
      json msg = json::parse(*line, nullptr, false);
      if (msg.is_discarded() || !msg.is_object() || !msg.contains("id") ||
          !msg["id"].is_number_unsigned()) {
        reason = "malformed response line: " + line->substr(0, 200);
        break;
      }
      const auto id = msg["id"].get<std::uint64_t>();
      std::lock_guard lock(mutex_);
      auto it = pending_.find(id);
      if (it == pending_.end()) continue;  // late reply to a failed request
      it->second.set_value(std::move(msg));
      pending_.erase(it);
      slots_.release();
    }
    std::lock_guard lock(mutex_);
    closed_ = true;
    for (auto& [id, promise] : pending_) {
      promise.set_exception(std::make_exception_ptr(Error("provider", reason)));
      slots_.release();
    }
    pending_.clear();
  }

  int read_fd_;
  int write_fd_;
  LineReader reader_;
  std::counting_semaphore<kMaxInFlightCeiling> slots_;
  std::mutex mutex_;
  std::mutex write_mutex_;
  std::unordered_map<std::uint64_t, std::promise<json>> pending_;
  bool closed_ = false;
  std::optional<json> handshake_;
  std::thread thread_;
};

class SubprocessChannel final : public FdChannel {
 public:
  SubprocessChannel(int read_fd, int write_fd, pid_t pid, std::size_t max_in_flight)
      : FdChannel(read_fd, write_fd, true, max_in_flight), pid_(pid) {}

  ~SubprocessChannel() override { shutdown(); }

 private:
  void on_write_closed() override {
    if (pid_ <= 0) return;
    using namespace std::chrono;
    const auto deadline = steady_clock::now() + seconds(5);
    int status = 0;
    while (::waitpid(pid_, &status, WNOHANG) == 0) {
      if (steady_clock::now() > deadline) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(milliseconds(5));
    }
    pid_ = -1;
  }

  pid_t pid_;
};

// Reaps a child that failed before the channel took ownership.
void reap(pid_t pid) {
  int status = 0;
  ::kill(pid, SIGKILL);
  ::waitpid(pid, &status, 0);
}

class HttpChannel final : public Channel {
 public:
  HttpChannel(std::string base, std::string path, std::size_t max_in_flight)
      : base_(std::move(base)), path_(std::move(path)),
        slots_(static_cast<std::ptrdiff_t>(clamp_in_flight(max_in_flight))) {}

  std::future<json> call(std::uint64_t id, std::string request_line) override {
    return std::async(std::launch::async, [this, id, line = std::move(request_line)]() {
      slots_.acquire();
      struct Release {
        std::counting_semaphore<kMaxInFlightCeiling>& s;
        ~Release() { s.release(); }
      } release{slots_};
      httplib::Client client(base_);
      client.set_read_timeout(600, 0);
      auto res = client.Post(path_, line + "\n", "application/x-ndjson");
      if (!res) {
        throw Error("provider", "http transport failed: " + httplib::to_string(res.error()));
      }
      if (res->status != 200) {
        throw Error("provider", "http status " + std::to_string(res->status));
      }
      json msg = json::parse(res->body, nullptr, false);
      if (msg.is_discarded() || !msg.is_object() || msg.value("id", std::uint64_t{0}) != id) {
        throw Error("provider", "http response does not answer request " + std::to_string(id));
      }
      return msg;
    });
  }

 private:
  std::string base_;
  std::string path_;
  std::counting_semaphore<kMaxInFlightCeiling> slots_;
};

}  // namespace

std::unique_ptr<Channel> make_fd_channel(int read_fd, int write_fd, bool expect_ready_line,
                                         std::size_t max_in_flight) {
  return std::make_unique<FdChannel>(read_fd, write_fd, expect_ready_line, max_in_flight);
}

std::unique_ptr<Channel> make_subprocess_channel(const std::string& command,
                                                 std::size_t max_in_flight) {
  // A dead backend must surface as a write error, not kill the client.
  ::signal(SIGPIPE, SIG_IGN);

  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error("provider", "pipe() failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw Error("provider", "pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw Error("provider", std::string("fork() failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  try {
    return std::make_unique<SubprocessChannel>(from_child[0], to_child[1], pid, max_in_flight);
  } catch (...) {
    reap(pid);
    throw;
  }
}

std::unique_ptr<Channel> make_http_channel(const std::string& url, std::size_t max_in_flight) {
  std::string rest = url;
  std::string scheme = "http://";
  if (rest.starts_with("http://")) {
    rest = rest.substr(7);
  } else if (rest.starts_with("https://")) {
    throw Error("provider", "https endpoints are not supported; use a local http proxy");
  }
  const auto slash = rest.find('/');
  const std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
  if (host.empty()) throw Error("provider", "http backend needs host[:port]");
  return std::make_unique<HttpChannel>(scheme + host, path, max_in_flight);
}

}  // namespace lexsum::provider
