// SPDX-License-Identifier: Apache-2.0
#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <istream>
#include <ostream>

#include "vlu/protocol.hpp"

namespace vlu {
namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw Error(Errc::ProviderError, what + ": " + std::strerror(errno));
}

class StreamChannel final : public LineChannel {
 public:
  StreamChannel(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

  void send_line(std::string_view line) override {
    out_ << line << '\n';
    out_.flush();
  }

  std::optional<std::string> recv_line() override {
    std::string line;
    if (!std::getline(in_, line)) return std::nullopt;
    return line;
  }

 private:
  std::istream& in_;
  std::ostream& out_;
};

/// Line framing over a pair of file descriptors.
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, bool socket) : read_fd_(read_fd), write_fd_(write_fd), socket_(socket) {}
  ~FdChannel() override { close_fds(); }
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void send_line(std::string_view line) override {
    std::string framed(line);
    framed.push_back('\n');
    std::size_t done = 0;
    while (done < framed.size()) {
      const ssize_t n = socket_ ? ::send(write_fd_, framed.data() + done, framed.size() - done, MSG_NOSIGNAL)
                                : ::write(write_fd_, framed.data() + done, framed.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::ProtocolError, std::string("write to provider failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> recv_line() override {
    while (true) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::ProtocolError, std::string("read from provider failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        if (buffer_.empty()) return std::nullopt;
        std::string line = std::move(buffer_);
        buffer_.clear();
        return line;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  void close_fds() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  int read_fd_;
  int write_fd_;
  bool socket_;
  std::string buffer_;
};

class ChildChannel final : public FdChannel {
 public:
  ChildChannel(int read_fd, int write_fd, pid_t pid) : FdChannel(read_fd, write_fd, false), pid_(pid) {}
  ~ChildChannel() override {
    close_fds();
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
  }

 private:
  pid_t pid_;
};

class RemoteProvider final : public ModelProvider {
 public:
  explicit RemoteProvider(std::unique_ptr<LineChannel> channel) : client_(std::move(channel)) {}

  ProviderInfo info() override {
    if (!info_) {
      const Json r = client_.call(op::kInfo);
      ProviderInfo info;
      try {
        info.name = r.at("name").get<std::string>();
        info.embedding_dim = r.at("embedding_dim").get<std::size_t>();
        info.has_mask_token = r.at("has_mask_token").get<bool>();
        if (r.contains("mask_token") && !r["mask_token"].is_null()) {
          info.mask_token = r["mask_token"].get<std::string>();
        }
        info.max_tokens = r.at("max_tokens").get<std::size_t>();
      } catch (const Json::exception& e) {
        throw Error(Errc::ProtocolError, std::string("bad info payload: ") + e.what());
      }
      info.validate();
      info_ = std::move(info);
    }
    return *info_;
  }

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
    const std::size_t dim = info().embedding_dim;
    auto vectors = get<std::vector<EmbeddingVector>>(client_.call(op::kEmbed, {{"texts", to_json(texts)}}), "vectors");
    if (vectors.size() != texts.size()) throw Error(Errc::ProtocolError, "embed returned wrong vector count");
    for (const auto& v : vectors) {
      if (v.size() != dim) throw Error(Errc::ProtocolError, "embed returned wrong dimension");
      for (const double x : v) {
        if (!std::isfinite(x)) throw Error(Errc::ProtocolError, "embed returned non-finite component");
      }
    }
    return vectors;
  }

  std::vector<double> mlm_logprobs(const std::string& masked_text, std::span<const std::string> candidates) override {
    auto lp = get<std::vector<double>>(
        client_.call(op::kMlmLogprobs, {{"masked_text", masked_text}, {"candidates", to_json(candidates)}}),
        "logprobs");
    if (lp.size() != candidates.size()) throw Error(Errc::ProtocolError, "mlm_logprobs returned wrong count");
    for (const double x : lp) {
      if (!std::isfinite(x) || x > 1e-9) throw Error(Errc::ProtocolError, "mlm_logprobs returned invalid log-prob");
    }
    return lp;
  }

  std::size_t token_count(const std::string& text) override {
    return get<std::size_t>(client_.call(op::kTokenCount, {{"text", text}}), "count");
  }

  std::vector<double> sequence_nll(std::span<const std::string> texts) override {
    auto nll = get<std::vector<double>>(client_.call(op::kSequenceNll, {{"texts", to_json(texts)}}), "nll");
    if (nll.size() != texts.size()) throw Error(Errc::ProtocolError, "sequence_nll returned wrong count");
    return nll;
  }

  NliProbs nli(const std::string& premise, const std::string& hypothesis) override {
    const Json r = client_.call(op::kNli, {{"premise", premise}, {"hypothesis", hypothesis}});
    NliProbs p{get<double>(r, "p_contradiction"), get<double>(r, "p_neutral"), get<double>(r, "p_entailment")};
    p.validate();
    return p;
  }

 private:
  static Json to_json(std::span<const std::string> texts) {
    Json arr = Json::array();
    for (const auto& t : texts) arr.push_back(t);
    return arr;
  }

  template <typename T>
  static T get(const Json& result, const char* key) {
    try {
      return result.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw Error(Errc::ProtocolError, std::string("bad field ") + key + ": " + e.what());
    }
  }

  ProtocolClient client_;
  std::optional<ProviderInfo> info_;
};

}  // namespace

std::unique_ptr<LineChannel> make_stream_channel(std::istream& in, std::ostream& out) {
  return std::make_unique<StreamChannel>(in, out);
}

std::unique_ptr<LineChannel> spawn_stdio_channel(const std::string& command) {
  std::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw_errno("pipe");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw_errno("pipe");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw_errno("fork");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ChildChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const auto service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &result); rc != 0) {
    throw Error(Errc::ProviderError, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0) throw Error(Errc::ProviderError, "cannot connect to " + host + ":" + service);
  return std::make_unique<FdChannel>(fd, fd, true);
}

TcpListener::TcpListener(std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw_errno("socket");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 8) != 0) {
    ::close(fd_);
    throw_errno("bind");
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<LineChannel> TcpListener::accept() {
  while (true) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return std::make_unique<FdChannel>(fd, fd, true);
    if (errno != EINTR) throw_errno("accept");
  }
}

std::unique_ptr<ModelProvider> make_remote_provider(std::unique_ptr<LineChannel> channel) {
  return std::make_unique<RemoteProvider>(std::move(channel));
}

}  // namespace vlu
