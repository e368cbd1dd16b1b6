#pragma once

#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "mobagent/net/transport.hpp"
#include "mobagent/proto/messages.hpp"
#include "mobagent/security/crypto.hpp"

namespace mobagent::testing {

// Key generation is slow; tests share two pairs per process.
inline const security::KeyPair& manager_key() {
  static const auto k = security::KeyPair::generate();
  return k;
}

inline const security::KeyPair& stranger_key() {
  static const auto k = security::KeyPair::generate();
  return k;
}

inline security::TrustStore trust_manager() {
  security::TrustStore t;
  t.add(manager_key().public_key());
  return t;
}

// Removed with everything in it when the test ends.
class TempDir {
 public:
  TempDir();
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::string& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (std::filesystem::path(path_) / name).string(); }

 private:
  std::string path_;
};

// In-memory transport: records every frame; addresses in `down` refuse.
class FakeTransport : public net::Transport {
 public:
  struct Sent {
    std::string to;
    proto::Frame frame;
  };

  void send(const net::Endpoint& to, const Bytes& frame) override;
  proto::Frame request(const net::Endpoint& to, const Bytes& frame) override;

  std::vector<Sent> sent() const;
  // Decoded RESULT notices, in send order.
  std::vector<proto::ResultNotice> notices() const;
  // Decoded AGENT_STATE frames sent to `to`, or to anyone when empty.
  std::vector<proto::AgentState> agents_to(const std::string& to = {}) const;
  void set_down(const std::string& address, bool down = true);
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<Sent> sent_;
  std::set<std::string> down_;
};

proto::ControlRequest signed_request(proto::ControlVerb verb, const std::string& agent_id = {},
                                     std::uint32_t argument = 0, const security::KeyPair& key = manager_key());

}  // namespace mobagent::testing
