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

// Native protocol server used by the bridge tests in place of an external
// adapter. Reads one JSON request per line and writes one reply per line.
//
//   bridge_fixture [--model sum|linear:w1,w2,...|gbdt:FILE] [--n-features N]
//                  [--name NAME] [--version V] [--fault none|badlen|nonjson|error|hang]
//                  [--tcp PORT]
//
// With --tcp the server listens on 127.0.0.1 (PORT 0 picks a free port),
// prints "listening PORT" on stdout and serves connections one at a time.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoxai/config.hpp"
#include "geoxai/gbdt.hpp"

namespace {

using nlohmann::json;

double number(const std::string& text, const std::string& what) {
  const auto v = geoxai::parse_double(text);
  if (!v) throw std::runtime_error(what + ": not a number: " + text);
  return *v;
}

long long integer(const std::string& text, const std::string& what) {
  const auto v = geoxai::parse_int(text);
  if (!v) throw std::runtime_error(what + ": not an integer: " + text);
  return *v;
}

struct Options {
  std::string model = "sum";
  std::size_t n_features = 2;
  bool n_features_set = false;
  std::string name;
  int version = 1;
  std::string fault = "none";
  std::optional<int> tcp_port;
};

class Model {
 public:
  explicit Model(const Options& opt) {
    if (opt.model == "sum") {
      kind_ = Kind::kSum;
      n_ = opt.n_features;
    } else if (opt.model.rfind("linear:", 0) == 0) {
      kind_ = Kind::kLinear;
      for (const auto& w : geoxai::split(opt.model.substr(7), ','))
        weights_.push_back(number(w, "weight"));
      n_ = weights_.size();
    } else if (opt.model.rfind("gbdt:", 0) == 0) {
      kind_ = Kind::kGbdt;
      gbdt_ = geoxai::GbdtModel::load(opt.model.substr(5));
      n_ = gbdt_.arity();
    } else {
      throw std::runtime_error("unknown model '" + opt.model + "'");
    }
    if (opt.n_features_set) n_ = opt.n_features;
  }

  std::size_t arity() const { return n_; }

  std::vector<double> predict(const json& x) const {
    std::vector<double> y;
    for (const auto& row : x) {
      if (!row.is_array() || row.size() != n_) throw std::runtime_error("row width must be " + std::to_string(n_));
      std::vector<double> v;
      for (const auto& e : row) {
        if (!e.is_number()) throw std::runtime_error("non-numeric entry");
        v.push_back(e.get<double>());
      }
      switch (kind_) {
        case Kind::kSum: {
          double s = 0.0;
          for (double e : v) s += e;
          y.push_back(s);
          break;
        }
        case Kind::kLinear: {
          double s = 0.0;
          for (std::size_t j = 0; j < v.size(); ++j) s += weights_[j] * v[j];
          y.push_back(s);
          break;
        }
        case Kind::kGbdt:
          y.push_back(gbdt_.predict_row(v));
          break;
      }
    }
    return y;
  }

 private:
  enum class Kind { kSum, kLinear, kGbdt };
  Kind kind_ = Kind::kSum;
  std::size_t n_ = 0;
  std::vector<double> weights_;
  geoxai::GbdtModel gbdt_;
};

std::string handle(const std::string& line, const Model& model, const Options& opt) {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception&) {
    return json{{"ok", false}, {"error", "request is not valid JSON"}}.dump();
  }
  if (!request.is_object() || !request.contains("op") || !request["op"].is_string())
    return json{{"ok", false}, {"error", "request lacks string 'op'"}}.dump();
  const auto op = request["op"].get<std::string>();
  if (op == "handshake") {
    return json{{"ok", true},
                {"name", opt.name.empty() ? opt.model : opt.name},
                {"n_features", model.arity()},
                {"version", opt.version}}
        .dump();
  }
  if (op != "predict") return json{{"ok", false}, {"error", "unknown op '" + op + "'"}}.dump();
  if (opt.fault == "hang") {
    std::this_thread::sleep_for(std::chrono::hours(1));
  }
  if (opt.fault == "nonjson") return "this is not json";
  if (opt.fault == "error") return json{{"ok", false}, {"error", "model exploded"}}.dump();
  if (!request.contains("X") || !request["X"].is_array())
    return json{{"ok", false}, {"error", "predict needs array 'X'"}}.dump();
  try {
    auto y = model.predict(request["X"]);
    if (opt.fault == "badlen") y.push_back(0.0);
    return json{{"ok", true}, {"y", y}}.dump();
  } catch (const std::exception& e) {
    return json{{"ok", false}, {"error", e.what()}}.dump();
  }
}

void serve_stream(std::FILE* in, std::FILE* out, const Model& model, const Options& opt) {
  std::string line;
  int c;
  while ((c = std::fgetc(in)) != EOF) {
    if (c != '\n') {
      line.push_back(static_cast<char>(c));
      continue;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto reply = handle(line, model, opt);
    std::fputs(reply.c_str(), out);
    std::fputc('\n', out);
    std::fflush(out);
    line.clear();
  }
}

int serve_tcp(int port, const Model& model, const Options& opt) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listener, 4) != 0) {
    std::perror("bind");
    return 1;
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  std::printf("listening %d\n", ntohs(addr.sin_port));
  std::fflush(stdout);
  while (true) {
    const int conn = ::accept(listener, nullptr, nullptr);
    if (conn < 0) continue;
    std::FILE* in = ::fdopen(conn, "r");
    std::FILE* out = ::fdopen(::dup(conn), "w");
    serve_stream(in, out, model, opt);
    std::fclose(in);
    std::fclose(out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  ::signal(SIGPIPE, SIG_IGN);
  Options opt;
  try {
    for (int i = 1; i < argc; ++i) {
      const std::string arg = argv[i];
      auto value = [&]() -> std::string {
        if (i + 1 >= argc) throw std::runtime_error(arg + " needs a value");
        return argv[++i];
      };
      if (arg == "--model") opt.model = value();
      else if (arg == "--n-features") {
        opt.n_features = static_cast<std::size_t>(integer(value(), "--n-features"));
        opt.n_features_set = true;
      } else if (arg == "--name") opt.name = value();
      else if (arg == "--version") opt.version = static_cast<int>(integer(value(), "--version"));
      else if (arg == "--fault") opt.fault = value();
      else if (arg == "--tcp") opt.tcp_port = static_cast<int>(integer(value(), "--tcp"));
      else throw std::runtime_error("unknown argument " + arg);
    }
    const Model model(opt);
    if (opt.tcp_port) return serve_tcp(*opt.tcp_port, model, opt);
    serve_stream(stdin, stdout, model, opt);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bridge_fixture: %s\n", e.what());
    return 1;
  }
}
