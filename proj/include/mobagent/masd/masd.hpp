#pragma once

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mobagent/masd/scheduler.hpp"
#include "mobagent/mibsim/mib.hpp"
#include "mobagent/net/transport.hpp"
#include "mobagent/proto/messages.hpp"
#include "mobagent/runtime/agent.hpp"
#include "mobagent/security/crypto.hpp"

namespace mobagent::masd {

using proto::AgentStatus;
using proto::MaInfo;

struct MasdConfig {
  std::string host_id = "h1";
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 7701;
  // Address other daemons use to reach this one; defaults to bind_address.
  std::string advertise_address;
  std::string manager_address = "127.0.0.1:7700";
  // PEM public keys whose signatures are accepted (the manager's).
  std::vector<std::string> trusted_keys;
  // Recipient of sealed data-folder entries; defaults to the first trusted key.
  std::string seal_key;
  std::string cache_dir = "masd-cache";
  std::string mib_script;
  // "wall": MIB time follows the daemon's clock. "logical": only tick() moves it.
  std::string mib_clock = "wall";
  std::vector<std::string> device_classes;
  std::uint32_t announce_interval_ms = 10000;
  unsigned workers = 2;
  // Host-side limits; intersected with each bundle's own policy.
  proto::AuthPolicy policy;

  static MasdConfig parse(std::string_view json_text);
  static MasdConfig load(const std::string& path);
};

// Resident-agent table keyed by agent id.
class Registry {
 public:
  // Throws DUPLICATE_ID.
  void add(const MaInfo& info);
  // Throws UNKNOWN_ID.
  void remove(const std::string& agent_id);
  std::optional<MaInfo> find(const std::string& agent_id) const;
  // Sorted by arrival time, then id.
  std::vector<MaInfo> list() const;
  std::size_t size() const;

  // Throws UNKNOWN_ID.
  void set_status(const std::string& agent_id, AgentStatus status);
  void set_frequency(const std::string& agent_id, std::uint32_t seconds);
  // Blocks while the agent is SUSPENDED; returns false once it is gone.
  bool wait_runnable(const std::string& agent_id);
  // Wakes every waiter (used on shutdown).
  void release_all();

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, MaInfo> agents_;
  bool released_ = false;
};

// Latest accepted bundle per class name, mirrored to a directory.
class CodeCache {
 public:
  explicit CodeCache(std::string dir);

  // Reloads the newest verifiable bundle per name from the directory.
  void load(const security::TrustStore& trusted);
  // Validates and replaces any older version. Throws BAD_SIGNATURE,
  // INVALID_PROGRAM or STALE_VERSION.
  void accept(const proto::CodeBundle& bundle, const security::TrustStore& trusted);
  std::optional<proto::CodeBundle> get(const std::string& name) const;
  std::vector<proto::BundleDigest> digests() const;
  std::size_t size() const;

 private:
  std::string dir_;
  mutable std::mutex mu_;
  std::map<std::string, proto::CodeBundle> bundles_;
};

struct AuditEntry {
  std::string agent_id;
  proto::SfOp op = proto::SfOp::kGetScalar;
  std::size_t query_size = 0;
};

class AuditLog {
 public:
  void record(AuditEntry e);
  std::vector<AuditEntry> entries() const;
  std::size_t count_for(const std::string& agent_id) const;

 private:
  mutable std::mutex mu_;
  std::vector<AuditEntry> entries_;
};

// CPU and memory of this process from /proc.
class LoadSampler {
 public:
  proto::HostLoad sample(TimestampMs now);

 private:
  std::mutex mu_;
  double last_cpu_s_ = -1;
  TimestampMs last_wall_ = 0;
  TimestampMs last_sampled_ = 0;
  double last_percent_ = 0;
};

enum class DispatchResult { kSent, kReturnedHome, kParked };

// The agent server daemon.
class Masd {
 public:
  Masd(MasdConfig config, security::TrustStore trusted, security::PublicKey seal_key,
       std::shared_ptr<mibsim::Mib> mib, std::shared_ptr<net::Transport> transport = nullptr,
       std::shared_ptr<Clock> clock = nullptr);
  ~Masd();
  Masd(const Masd&) = delete;
  Masd& operator=(const Masd&) = delete;

  // Loads keys, MIB script and cache directory named by the config.
  static std::unique_ptr<Masd> from_config(const MasdConfig& config,
                                           std::shared_ptr<net::Transport> transport = nullptr);

  void start();
  void stop();
  bool running() const { return running_; }

  const std::string& host_id() const { return config_.host_id; }
  std::string address() const;
  const MasdConfig& config() const { return config_; }

  std::optional<Bytes> handle_frame(const proto::Frame& frame);
  // Agent arrival pipeline; rejected agents produce a RESULT notice.
  void receive_agent(const Bytes& canonical_state);
  proto::ControlResponse accept_bundle(const proto::CodeBundle& bundle);
  proto::ControlResponse control(const proto::ControlRequest& request);

  proto::Announce make_announce();
  // Sends one ANNOUNCE; throws NETWORK on failure.
  void announce_now();

  // Manual scheduling (workers = 0).
  std::size_t run_pending() { return scheduler_.run_pending(); }
  void drain() { scheduler_.drain(); }

  Registry& registry() { return registry_; }
  CodeCache& cache() { return cache_; }
  AuditLog& audit() { return audit_; }
  runtime::SampleMemory& samples() { return samples_; }
  mibsim::Mib& mib() { return *mib_; }
  // Set before agents arrive.
  runtime::LifecycleHooks& hooks() { return hooks_; }
  std::size_t parked_count() const;

 private:
  struct Pending {
    proto::AgentState state;
    bool parked = false;
  };

  void run_agent(const std::string& agent_id);
  DispatchResult dispatch(proto::AgentState& state, const proto::AuthPolicy& policy);
  void notify(Errc code, const proto::AgentState* state, const std::string& agent_id,
              const proto::AgentClassId& class_id, const std::string& origin, const std::string& message,
              bool attach_state);
  void finish(const std::string& agent_id);
  proto::AgentState resident_state(const std::string& agent_id) const;
  void announce_loop();
  proto::AuthPolicy host_policy() const;
  proto::ControlResponse reply(std::uint64_t id, Errc code, const std::string& message) const;

  MasdConfig config_;
  security::TrustStore trusted_;
  security::PublicKey seal_key_;
  std::shared_ptr<mibsim::Mib> mib_;
  std::shared_ptr<net::Transport> transport_;
  std::shared_ptr<Clock> clock_;
  TimestampMs started_at_ = 0;

  Registry registry_;
  CodeCache cache_;
  AuditLog audit_;
  LoadSampler load_;
  runtime::SampleMemory samples_;
  runtime::LifecycleHooks hooks_;
  PriorityScheduler scheduler_;

  mutable std::mutex mu_;
  std::map<std::string, Pending> agents_;
  std::map<std::string, std::uint32_t> frequency_overrides_;

  std::unique_ptr<net::FrameServer> server_;
  std::atomic<bool> running_{false};
  std::thread announcer_;
  std::mutex announce_mu_;
  std::condition_variable announce_cv_;
};

}  // namespace mobagent::masd
