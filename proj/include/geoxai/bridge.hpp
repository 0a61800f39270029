/*
 * Copyright 2026 The GeoXAI Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoxai/error.hpp"
#include "geoxai/matrix.hpp"
#include "geoxai/predictor.hpp"

// Client side of the external-predictor wire protocol: newline-delimited
// JSON, one object per line, one request in flight per connection.
//
//   -> {"op":"handshake"}            <- {"ok":true,"name":str,"n_features":int,"version":1}
//   -> {"op":"predict","X":[[...]]}  <- {"ok":true,"y":[...]}
//   -> anything                      <- {"ok":false,"error":str}
//
// In stdio mode the server is a child process (spawned through /bin/sh -c)
// reading requests on stdin and replying on stdout; in tcp mode the same
// framing runs over a socket.
namespace geoxai {

inline constexpr int kProtocolVersion = 1;

enum class Transport { kStdio, kTcp };

struct BridgeConfig {
  Transport transport = Transport::kStdio;
  std::string command;  // stdio mode
  std::string host = "127.0.0.1";
  int port = 0;  // tcp mode
  double timeout_s = 30.0;
  std::size_t max_batch = 1024;
  bool check_arity = true;

  void validate() const {
    if (!(timeout_s > 0.0)) throw Error(ErrorCode::kInvalidConfig, "bridge timeout must be > 0");
    if (max_batch < 1) throw Error(ErrorCode::kInvalidConfig, "bridge max batch must be >= 1");
    if (transport == Transport::kStdio && command.empty())
      throw Error(ErrorCode::kInvalidConfig, "stdio bridge needs a launch command");
    if (transport == Transport::kTcp && (port <= 0 || port > 65535))
      throw Error(ErrorCode::kInvalidConfig, "tcp bridge needs a port in 1..65535");
  }
};

struct RemoteDescriptor {
  std::string name;
  std::size_t n_features = 0;
  int version = 0;
};

namespace detail {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Fd& operator=(Fd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

using Clock = std::chrono::steady_clock;

inline int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

inline std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

}  // namespace detail

class BridgeClient {
 public:
  explicit BridgeClient(BridgeConfig config) : config_(std::move(config)) {
    config_.validate();
    // A server that dies mid-write must surface as TransportError, not SIGPIPE.
    ::signal(SIGPIPE, SIG_IGN);
    if (config_.transport == Transport::kStdio) spawn();
    else connect_tcp();
  }

  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  ~BridgeClient() { shutdown(); }

  RemoteDescriptor handshake() {
    std::lock_guard guard(mutex_);
    return handshake_locked();
  }

  // Rows are sent in chunks of at most max_batch; replies are reassembled in
  // request order.
  std::vector<double> predict_batch(const Matrix& rows) {
    std::lock_guard guard(mutex_);
    if (!descriptor_) handshake_locked();
    if (rows.rows() == 0) return {};
    if (config_.check_arity && rows.cols() != descriptor_->n_features)
      throw Error(ErrorCode::kArityMismatch, "remote model expects " +
                                                 std::to_string(descriptor_->n_features) +
                                                 " features, request has " +
                                                 std::to_string(rows.cols()));
    for (const double v : rows.values())
      if (!std::isfinite(v))
        throw Error(ErrorCode::kPredictorFailure, "refusing to send a non-finite value");
    std::vector<double> out;
    out.reserve(rows.rows());
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < rows.rows(); start += config_.max_batch, ++batch_index) {
      const std::size_t stop = std::min(rows.rows(), start + config_.max_batch);
      nlohmann::json x = nlohmann::json::array();
      for (std::size_t r = start; r < stop; ++r) {
        const auto row = rows.row(r);
        x.push_back(std::vector<double>(row.begin(), row.end()));
      }
      const nlohmann::json request{{"op", "predict"}, {"X", std::move(x)}};
      const auto reply = request_locked(request.dump(), "batch " + std::to_string(batch_index));
      const auto& y = reply.at("y");
      if (!y.is_array() || y.size() != stop - start)
        throw Error(ErrorCode::kMalformedReply,
                    "batch " + std::to_string(batch_index) + ": expected " +
                        std::to_string(stop - start) + " predictions, got " +
                        (y.is_array() ? std::to_string(y.size()) : std::string("non-array")));
      for (const auto& v : y) {
        if (!v.is_number())
          throw Error(ErrorCode::kMalformedReply, "batch " + std::to_string(batch_index) +
                                                      ": non-numeric prediction");
        out.push_back(v.get<double>());
      }
    }
    return out;
  }

  // Sends one raw request line and returns the raw reply line.
  std::string exchange(const std::string& line) {
    std::lock_guard guard(mutex_);
    const auto deadline = detail::Clock::now() + timeout();
    write_line(line, deadline, "raw request");
    return read_line(deadline, "raw request");
  }

  std::size_t requests_sent() const {
    std::lock_guard guard(mutex_);
    return requests_;
  }

  std::size_t arity() const {
    std::lock_guard guard(mutex_);
    if (!descriptor_) throw Error(ErrorCode::kTransportError, "handshake has not completed");
    return descriptor_->n_features;
  }

  const BridgeConfig& config() const { return config_; }

 private:
  std::chrono::milliseconds timeout() const {
    return std::chrono::milliseconds(static_cast<long long>(std::ceil(config_.timeout_s * 1000.0)));
  }

  RemoteDescriptor handshake_locked() {
    const auto reply = request_locked(R"({"op":"handshake"})", "handshake");
    RemoteDescriptor d;
    try {
      d.version = reply.at("version").get<int>();
      if (d.version != kProtocolVersion)
        throw Error(ErrorCode::kVersionMismatch, "server speaks protocol version " +
                                                     std::to_string(d.version) + ", client " +
                                                     std::to_string(kProtocolVersion));
      d.name = reply.value("name", std::string());
      const auto n = reply.at("n_features");
      if (!n.is_number_integer() || n.get<long long>() < 1)
        throw Error(ErrorCode::kMalformedReply, "handshake n_features must be a positive integer");
      d.n_features = n.get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedReply, std::string("handshake reply: ") + e.what());
    }
    descriptor_ = d;
    return d;
  }

  nlohmann::json request_locked(const std::string& line, const std::string& context) {
    if (broken_) throw Error(ErrorCode::kTransportError, "connection is unusable after an earlier failure");
    const auto deadline = detail::Clock::now() + timeout();
    write_line(line, deadline, context);
    ++requests_;
    const auto text = read_line(deadline, context);
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::kMalformedReply, context + ": reply is not JSON");
    }
    if (!reply.is_object() || !reply.contains("ok") || !reply["ok"].is_boolean())
      throw Error(ErrorCode::kMalformedReply, context + ": reply lacks boolean 'ok'");
    if (!reply["ok"].get<bool>()) {
      const auto message = reply.contains("error") && reply["error"].is_string()
                               ? reply["error"].get<std::string>()
                               : std::string("unspecified error");
      throw Error(ErrorCode::kRemoteError, context + ": " + message);
    }
    if (context.rfind("batch", 0) == 0 && !reply.contains("y"))
      throw Error(ErrorCode::kMalformedReply, context + ": reply lacks 'y'");
    return reply;
  }

  void write_line(const std::string& line, detail::Clock::time_point deadline,
                  const std::string& context) {
    const std::string data = line + "\n";
    std::size_t sent = 0;
    while (sent < data.size()) {
      pollfd pfd{write_fd(), POLLOUT, 0};
      const int ready = ::poll(&pfd, 1, detail::remaining_ms(deadline));
      if (ready == 0) fail(ErrorCode::kTimeout, context + ": timed out sending request");
      if (ready < 0) {
        if (errno == EINTR) continue;
        fail(ErrorCode::kTransportError, detail::errno_text("poll"));
      }
      const ssize_t n = config_.transport == Transport::kTcp
                            ? ::send(write_fd(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL)
                            : ::write(write_fd(), data.data() + sent, data.size() - sent);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        fail(ErrorCode::kTransportError, context + ": " + detail::errno_text("write"));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(detail::Clock::time_point deadline, const std::string& context) {
    while (true) {
      const auto newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      pollfd pfd{read_fd(), POLLIN, 0};
      const int ready = ::poll(&pfd, 1, detail::remaining_ms(deadline));
      if (ready == 0) fail(ErrorCode::kTimeout, context + ": no reply within " +
                                                    std::to_string(config_.timeout_s) + " s");
      if (ready < 0) {
        if (errno == EINTR) continue;
        fail(ErrorCode::kTransportError, detail::errno_text("poll"));
      }
      char chunk[65536];
      const ssize_t n = ::read(read_fd(), chunk, sizeof(chunk));
      if (n == 0) fail(ErrorCode::kTransportError, context + ": server closed the connection");
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        fail(ErrorCode::kTransportError, context + ": " + detail::errno_text("read"));
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  [[noreturn]] void fail(ErrorCode code, const std::string& message) {
    broken_ = true;
    throw Error(code, message);
  }

  int write_fd() const { return config_.transport == Transport::kTcp ? socket_.get() : to_child_.get(); }
  int read_fd() const { return config_.transport == Transport::kTcp ? socket_.get() : from_child_.get(); }

  void spawn() {
    int in_pipe[2], out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0)
      throw Error(ErrorCode::kTransportError, detail::errno_text("pipe"));
    const pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::kTransportError, detail::errno_text("fork"));
    if (pid == 0) {
      // Own process group, so shutdown can reach whatever the shell starts.
      ::setpgid(0, 0);
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", config_.command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid, pid);
    child_ = pid;
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = detail::Fd(in_pipe[1]);
    from_child_ = detail::Fd(out_pipe[0]);
  }

  void connect_tcp() {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const auto port = std::to_string(config_.port);
    if (::getaddrinfo(config_.host.c_str(), port.c_str(), &hints, &result) != 0 || !result)
      throw Error(ErrorCode::kTransportError, "cannot resolve " + config_.host);
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(result, &::freeaddrinfo);
    const auto deadline = detail::Clock::now() + timeout();
    std::string last_error = "no address";
    for (auto* ai = result; ai; ai = ai->ai_next) {
      detail::Fd fd(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol));
      if (!fd) continue;
      if (::connect(fd.get(), ai->ai_addr, ai->ai_addrlen) != 0) {
        if (errno != EINPROGRESS) {
          last_error = detail::errno_text("connect");
          continue;
        }
        pollfd pfd{fd.get(), POLLOUT, 0};
        const int ready = ::poll(&pfd, 1, detail::remaining_ms(deadline));
        if (ready == 0) throw Error(ErrorCode::kTimeout, "connect to " + config_.host + ":" + port + " timed out");
        int so_error = 0;
        socklen_t len = sizeof(so_error);
        ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &so_error, &len);
        if (ready < 0 || so_error != 0) {
          last_error = std::string("connect: ") + std::strerror(so_error ? so_error : errno);
          continue;
        }
      }
      socket_ = std::move(fd);
      return;
    }
    throw Error(ErrorCode::kTransportError, config_.host + ":" + port + ": " + last_error);
  }

  void shutdown() {
    socket_.reset();
    to_child_.reset();
    from_child_.reset();
    if (child_ > 0) {
      // EOF on stdin asks the server to exit; escalate if it lingers.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(child_, nullptr, WNOHANG) == child_) {
          ::kill(-child_, SIGKILL);
          child_ = -1;
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(-child_, SIGTERM);
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(child_, nullptr, WNOHANG) == child_) {
          child_ = -1;
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(-child_, SIGKILL);
      ::waitpid(child_, nullptr, 0);
      child_ = -1;
    }
  }

  BridgeConfig config_;
  mutable std::mutex mutex_;
  detail::Fd socket_;
  detail::Fd to_child_;
  detail::Fd from_child_;
  pid_t child_ = -1;
  std::string buffer_;
  std::optional<RemoteDescriptor> descriptor_;
  std::size_t requests_ = 0;
  bool broken_ = false;
};

// Predictor view of a bridge connection. One connection is serial, so the
// returned Predictor funnels every call through a single lock.
class BridgePredictor {
 public:
  explicit BridgePredictor(std::shared_ptr<BridgeClient> client) : client_(std::move(client)) {
    arity_ = client_->handshake().n_features;
  }
  std::vector<double> predict(const Matrix& rows) const { return client_->predict_batch(rows); }
  std::size_t arity() const { return arity_; }
  const std::shared_ptr<BridgeClient>& client() const { return client_; }

 private:
  std::shared_ptr<BridgeClient> client_;
  std::size_t arity_ = 0;
};

inline Predictor make_bridge_predictor(const BridgeConfig& config) {
  return Predictor(BridgePredictor(std::make_shared<BridgeClient>(config)), /*serial=*/true);
}

}  // namespace geoxai
