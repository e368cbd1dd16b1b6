#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mobagent/common.hpp"
#include "mobagent/proto/frame.hpp"

namespace mobagent::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  // "host:port"; throws FIELD_RANGE.
  static Endpoint parse(std::string_view text);
  std::string str() const { return host + ":" + std::to_string(port); }
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

// Frame delivery between daemons. One connection per frame; a request gets
// its reply on the same connection.
class Transport {
 public:
  virtual ~Transport() = default;
  // Throws NETWORK when the peer cannot be reached or the write fails.
  virtual void send(const Endpoint& to, const Bytes& frame) = 0;
  virtual proto::Frame request(const Endpoint& to, const Bytes& frame) = 0;
};

class TcpTransport : public Transport {
 public:
  explicit TcpTransport(int timeout_ms = 3000) : timeout_ms_(timeout_ms) {}
  void send(const Endpoint& to, const Bytes& frame) override;
  proto::Frame request(const Endpoint& to, const Bytes& frame) override;

 private:
  int timeout_ms_;
};

struct CapturedFrame {
  std::string to;
  proto::MsgType type = proto::MsgType::kAgentState;
  Bytes bytes;
  bool delivered = false;
};

// Records every frame handed to the wrapped transport, delivered or not.
class CapturingTransport : public Transport {
 public:
  explicit CapturingTransport(std::shared_ptr<Transport> inner) : inner_(std::move(inner)) {}
  void send(const Endpoint& to, const Bytes& frame) override;
  proto::Frame request(const Endpoint& to, const Bytes& frame) override;

  std::vector<CapturedFrame> frames() const;
  std::size_t size() const;
  void clear();

 private:
  std::uint64_t record(const Endpoint& to, const Bytes& frame);
  void mark_delivered(std::uint64_t seq);

  std::shared_ptr<Transport> inner_;
  mutable std::mutex mu_;
  std::vector<CapturedFrame> frames_;
  std::vector<std::uint64_t> seqs_;
  std::uint64_t next_seq_ = 0;
};

// Accepts framed connections and hands each frame to the handler; a returned
// frame is written back on the same connection.
class FrameServer {
 public:
  using Handler = std::function<std::optional<Bytes>(const proto::Frame&)>;

  FrameServer(std::string bind_address, std::uint16_t port, Handler handler);
  ~FrameServer();
  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;

  // Binds and starts accepting. Port 0 picks an ephemeral port.
  void start();
  void stop();
  std::uint16_t port() const { return port_; }
  Endpoint endpoint() const { return {bind_address_, port_}; }

 private:
  void accept_loop();
  void serve(int fd);

  std::string bind_address_;
  std::uint16_t port_;
  Handler handler_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::mutex workers_mu_;
  std::list<Worker> workers_;
};

}  // namespace mobagent::net
