#include "mobagent/net/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>

namespace mobagent::net {

namespace {

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  int get() const { return fd_; }
  int release() { return std::exchange(fd_, -1); }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

[[noreturn]] void fail(const std::string& what) {
  throw Error(Errc::kNetwork, what + ": " + std::strerror(errno));
}

void set_timeouts(int fd, int timeout_ms) {
  timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

Fd connect_to(const Endpoint& to, int timeout_ms) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto port = std::to_string(to.port);
  if (int rc = ::getaddrinfo(to.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw Error(Errc::kNetwork, "resolve " + to.str() + ": " + ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);

  Fd fd(::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol));
  if (fd.get() < 0) fail("socket");
  const int flags = ::fcntl(fd.get(), F_GETFL);
  ::fcntl(fd.get(), F_SETFL, flags | O_NONBLOCK);
  if (::connect(fd.get(), res->ai_addr, res->ai_addrlen) != 0) {
    if (errno != EINPROGRESS) fail("connect " + to.str());
    pollfd p{fd.get(), POLLOUT, 0};
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc == 0) throw Error(Errc::kNetwork, "connect " + to.str() + ": timed out");
    if (rc < 0) fail("connect " + to.str());
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      errno = err;
      fail("connect " + to.str());
    }
  }
  ::fcntl(fd.get(), F_SETFL, flags);
  int one = 1;
  ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  set_timeouts(fd.get(), timeout_ms);
  return fd;
}

void write_all(int fd, const Bytes& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("send");
    }
    off += static_cast<std::size_t>(n);
  }
}

proto::ByteSource reader(int fd) {
  return [fd](std::span<std::uint8_t> out) {
    std::size_t off = 0;
    while (off < out.size()) {
      const auto n = ::recv(fd, out.data() + off, out.size() - off, 0);
      if (n == 0) return false;
      if (n < 0) {
        if (errno == EINTR) continue;
        fail("recv");
      }
      off += static_cast<std::size_t>(n);
    }
    return true;
  };
}

proto::MsgType frame_type(const Bytes& frame) {
  return proto::parse_header(std::span(frame).first(std::min(frame.size(), proto::kHeaderSize))).type;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(Errc::kFieldRange, "expected host:port, got '" + std::string(text) + "'");
  }
  unsigned port = 0;
  const auto digits = text.substr(colon + 1);
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc{} || p != digits.data() + digits.size() || port == 0 || port > 65535) {
    throw Error(Errc::kFieldRange, "bad port in '" + std::string(text) + "'");
  }
  return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

void TcpTransport::send(const Endpoint& to, const Bytes& frame) {
  auto fd = connect_to(to, timeout_ms_);
  write_all(fd.get(), frame);
  ::shutdown(fd.get(), SHUT_WR);
  // Wait for the peer to finish reading so that a send that returns has been
  // consumed by a live process.
  std::uint8_t sink[64];
  while (::recv(fd.get(), sink, sizeof sink, 0) > 0) {
  }
}

proto::Frame TcpTransport::request(const Endpoint& to, const Bytes& frame) {
  auto fd = connect_to(to, timeout_ms_);
  write_all(fd.get(), frame);
  auto reply = proto::read_frame(reader(fd.get()));
  if (!reply) throw Error(Errc::kNetwork, "no reply from " + to.str());
  return *reply;
}

std::uint64_t CapturingTransport::record(const Endpoint& to, const Bytes& frame) {
  std::lock_guard lock(mu_);
  frames_.push_back({to.str(), frame_type(frame), frame, false});
  seqs_.push_back(next_seq_);
  return next_seq_++;
}

void CapturingTransport::mark_delivered(std::uint64_t seq) {
  std::lock_guard lock(mu_);
  for (std::size_t i = seqs_.size(); i-- > 0;) {
    if (seqs_[i] != seq) continue;
    frames_[i].delivered = true;
    return;
  }
}

// Recorded before the write: the receiver may act on a frame before send returns.
void CapturingTransport::send(const Endpoint& to, const Bytes& frame) {
  const auto seq = record(to, frame);
  inner_->send(to, frame);
  mark_delivered(seq);
}

proto::Frame CapturingTransport::request(const Endpoint& to, const Bytes& frame) {
  const auto seq = record(to, frame);
  auto reply = inner_->request(to, frame);
  mark_delivered(seq);
  return reply;
}

std::vector<CapturedFrame> CapturingTransport::frames() const {
  std::lock_guard lock(mu_);
  return frames_;
}

std::size_t CapturingTransport::size() const {
  std::lock_guard lock(mu_);
  return frames_.size();
}

void CapturingTransport::clear() {
  std::lock_guard lock(mu_);
  frames_.clear();
  seqs_.clear();
}

FrameServer::FrameServer(std::string bind_address, std::uint16_t port, Handler handler)
    : bind_address_(std::move(bind_address)), port_(port), handler_(std::move(handler)) {}

FrameServer::~FrameServer() { stop(); }

void FrameServer::start() {
  if (running_) return;
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (fd.get() < 0) fail("socket");
  int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port_);
  if (::inet_pton(AF_INET, bind_address_.c_str(), &addr.sin_addr) != 1) {
    throw Error(Errc::kNetwork, "bad bind address " + bind_address_);
  }
  if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    fail("bind " + bind_address_ + ":" + std::to_string(port_));
  }
  if (::listen(fd.get(), 64) != 0) fail("listen");
  socklen_t len = sizeof addr;
  ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  listen_fd_ = fd.release();
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void FrameServer::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::list<Worker> workers;
  {
    std::lock_guard lock(workers_mu_);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.thread.join();
}

void FrameServer::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int client = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (client < 0) continue;
    std::lock_guard lock(workers_mu_);
    // Reap finished connections so the list stays small.
    for (auto it = workers_.begin(); it != workers_.end();) {
      if (it->done->load()) {
        it->thread.join();
        it = workers_.erase(it);
      } else {
        ++it;
      }
    }
    auto done = std::make_shared<std::atomic<bool>>(false);
    workers_.push_back({std::thread([this, client, done] {
                          serve(client);
                          done->store(true);
                        }),
                        done});
  }
}

void FrameServer::serve(int raw) {
  Fd fd(raw);
  set_timeouts(fd.get(), 5000);
  try {
    auto frame = proto::read_frame(reader(fd.get()));
    if (!frame) return;
    auto reply = handler_(*frame);
    if (reply) write_all(fd.get(), *reply);
  } catch (const std::exception&) {
    // Malformed or interrupted frames are dropped with the connection.
  }
}

}  // namespace mobagent::net
