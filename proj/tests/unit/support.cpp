#include "support.hpp"

#include "mobagent/bench/cluster.hpp"

namespace mobagent::testing {

TempDir::TempDir() : path_(bench::make_temp_dir("mobagent-test")) {}

void FakeTransport::send(const net::Endpoint& to, const Bytes& frame) {
  std::lock_guard lock(mu_);
  if (down_.count(to.str())) throw Error(Errc::kNetwork, "connection refused: " + to.str());
  sent_.push_back({to.str(), proto::decode_frame(frame)});
}

proto::Frame FakeTransport::request(const net::Endpoint& to, const Bytes&) {
  throw Error(Errc::kNetwork, "no request peer at " + to.str());
}

std::vector<FakeTransport::Sent> FakeTransport::sent() const {
  std::lock_guard lock(mu_);
  return sent_;
}

std::vector<proto::ResultNotice> FakeTransport::notices() const {
  std::vector<proto::ResultNotice> out;
  for (const auto& s : sent()) {
    if (s.frame.type == proto::MsgType::kResult) out.push_back(proto::decode_result_notice(proto::unpack_payload(s.frame)));
  }
  return out;
}

std::vector<proto::AgentState> FakeTransport::agents_to(const std::string& to) const {
  std::vector<proto::AgentState> out;
  for (const auto& s : sent()) {
    if (s.frame.type == proto::MsgType::kAgentState && (to.empty() || s.to == to)) {
      out.push_back(proto::decode_agent_state(proto::unpack_payload(s.frame)));
    }
  }
  return out;
}

void FakeTransport::set_down(const std::string& address, bool down) {
  std::lock_guard lock(mu_);
  if (down) down_.insert(address);
  else down_.erase(address);
}

void FakeTransport::clear() {
  std::lock_guard lock(mu_);
  sent_.clear();
}

proto::ControlRequest signed_request(proto::ControlVerb verb, const std::string& agent_id, std::uint32_t argument,
                                     const security::KeyPair& key) {
  static std::uint64_t next = 1;
  proto::ControlRequest r;
  r.request_id = next++;
  r.verb = verb;
  r.agent_id = agent_id;
  r.argument = argument;
  r.issued_at = 1;
  r.signature = security::sign(proto::encode_control_unsigned(r), key);
  return r;
}

}  // namespace mobagent::testing
