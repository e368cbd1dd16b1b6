#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobagent/itinerary/planner.hpp"
#include "mobagent/net/transport.hpp"
#include "mobagent/proto/messages.hpp"
#include "mobagent/runtime/agent.hpp"
#include "mobagent/security/crypto.hpp"
#include "mobagent/taskmodel/bundle.hpp"

namespace mobagent::manager {

using nlohmann::json;

struct ManagerConfig {
  std::string host_id = "manager";
  std::string bind_address = "127.0.0.1";
  std::uint16_t frame_port = 7700;
  std::uint16_t http_port = 7780;
  // Address agents use to come home; defaults to bind_address.
  std::string advertise_address;
  std::string key_path;
  std::string data_dir = "manager-data";
  // Empty: complete unit-cost graph over the discovered hosts.
  std::string topology_file;
  TimestampMs host_ttl_ms = 30000;
  TimestampMs lost_timeout_ms = 60000;
  std::size_t k_max = itinerary::kDefaultMaxAgents;
  itinerary::CostParams cost;
  std::uint32_t tick_interval_ms = 200;
  // Console files served by the HTTP API at "/"; nothing served when empty.
  std::string static_dir;

  static ManagerConfig parse(std::string_view json_text);
  static ManagerConfig load(const std::string& path);
};

enum class HostState { kActive, kInactive };
std::string_view to_string(HostState s);

struct DirectoryEntry {
  std::string host_id;
  std::string address;  // host:port of the agent listener
  TimestampMs last_announce = 0;
  proto::HostLoad load;
  std::vector<proto::BundleDigest> bundles;
  std::vector<std::string> device_classes;
  HostState state = HostState::kActive;
};

json to_json(const DirectoryEntry& e);

// Announce-driven membership. A host is INACTIVE once its last announce is
// older than the TTL.
class ServerDirectory {
 public:
  explicit ServerDirectory(TimestampMs ttl_ms) : ttl_ms_(ttl_ms) {}

  // Returns true when the host is new or comes back from INACTIVE.
  bool upsert(const proto::Announce& a, TimestampMs now);
  // Hosts that went INACTIVE during this call.
  std::vector<std::string> expire(TimestampMs now);
  std::optional<DirectoryEntry> find(const std::string& host_id) const;
  std::optional<std::string> host_for_address(const std::string& address) const;
  std::vector<DirectoryEntry> list() const;
  std::vector<DirectoryEntry> active() const;

 private:
  TimestampMs ttl_ms_;
  mutable std::mutex mu_;
  std::map<std::string, DirectoryEntry> entries_;
};

struct ResultRecord {
  std::string task;
  std::uint64_t round = 0;
  std::string agent_id;
  std::string host;
  TimestampMs timestamp = 0;
  std::string kind;  // VALUES | ROWS | ALARM | ERROR
  std::uint32_t class_version = 0;
  json data;
};

json to_json(const ResultRecord& r);
ResultRecord result_from_json(const json& j);

struct ResultFilter {
  std::optional<std::string> task;
  std::optional<std::string> host;
  std::optional<std::string> kind;
  std::optional<TimestampMs> since;
  std::optional<TimestampMs> until;
};

// Append-only JSON-lines file, one record per line.
class ResultStore {
 public:
  explicit ResultStore(std::string path);
  // Throws IO_ERROR.
  void append(const std::vector<ResultRecord>& records);
  std::vector<ResultRecord> query(const ResultFilter& filter) const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  mutable std::mutex mu_;
};

struct Event {
  std::uint64_t id = 0;
  std::string type;  // result | alarm | directory | dispatch
  json data;
};

class EventBus {
 public:
  class Subscription {
   public:
    // Next event, or nullopt on timeout or once the bus is closed.
    std::optional<Event> next(std::chrono::milliseconds timeout);
    bool closed() const;

   private:
    friend class EventBus;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Event> queue_;
    bool closed_ = false;
  };

  std::shared_ptr<Subscription> subscribe();
  void unsubscribe(const std::shared_ptr<Subscription>& s);
  void publish(const std::string& type, json data);
  void close();
  std::uint64_t published() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Subscription>> subs_;
  std::uint64_t next_id_ = 0;
  bool closed_ = false;
};

enum class AgentFate { kInFlight, kReturned, kRejected, kLost, kDispatchFailed };
std::string_view to_string(AgentFate f);

struct DispatchRecord {
  std::string agent_id;
  std::uint64_t round = 0;
  std::uint32_t class_version = 0;
  std::vector<std::string> route;  // host ids
  TimestampMs dispatched_at = 0;
  AgentFate fate = AgentFate::kInFlight;
  std::string code;  // errc name for rejected / failed agents
  bool redispatched = false;
};

json to_json(const DispatchRecord& d);

struct TaskRun {
  taskmodel::MagForm form;
  proto::AgentClassId class_id;
  bool enabled = true;
  std::uint64_t round = 0;
  std::uint64_t agent_seq = 0;
  TimestampMs next_due = 0;
  std::optional<itinerary::Plan> plan;
  std::string plan_error;
  std::map<std::string, DispatchRecord> agents;
};

struct CreateResult {
  proto::AgentClassId class_id;
  std::vector<std::string> distributed;
  // host id -> reason, for servers that rejected or missed the bundle.
  std::map<std::string, std::string> failed;
};

class Manager {
 public:
  Manager(ManagerConfig config, security::KeyPair key, std::shared_ptr<net::Transport> transport = nullptr,
          std::shared_ptr<Clock> clock = nullptr);
  ~Manager();
  Manager(const Manager&) = delete;
  Manager& operator=(const Manager&) = delete;

  static std::unique_ptr<Manager> from_config(const ManagerConfig& config,
                                              std::shared_ptr<net::Transport> transport = nullptr);

  // Starts the frame listener and, when requested, the housekeeping loop that
  // calls tick() every tick_interval_ms.
  void start(bool housekeeping = true);
  void stop();

  std::string address() const;
  const ManagerConfig& config() const { return config_; }
  const security::KeyPair& key() const { return key_; }

  std::optional<Bytes> handle_frame(const proto::Frame& frame);
  void on_announce(const proto::Announce& announce);
  void on_returning_agent(const Bytes& canonical_state);
  void on_notice(const proto::ResultNotice& notice);

  // Throws INVALID_FORM. Servers that miss the bundle are listed in the
  // result; the task is created regardless.
  CreateResult create_task(const taskmodel::MagForm& form);
  // Dispatches one agent per planned route. Throws UNKNOWN_TASK.
  std::vector<DispatchRecord> run_round(const std::string& task);
  // Directory expiry, lost-agent accounting and due rounds.
  void tick();

  // Throws UNKNOWN_HOST, HOST_INACTIVE, NETWORK or the downstream code.
  proto::ControlResponse control_proxy(const std::string& host_id, proto::ControlVerb verb,
                                       const std::string& agent_id = "", std::uint32_t argument = 0);
  json set_frequency(const std::string& task, std::uint32_t seconds);

  std::vector<ResultRecord> query_results(const ResultFilter& filter) const;
  json tasks_json() const;
  json task_json(const std::string& task) const;
  json hosts_json() const;
  json topology_json() const;
  std::vector<DispatchRecord> dispatches(const std::string& task) const;
  // Agents of the task still travelling.
  std::size_t in_flight(const std::string& task) const;
  std::uint64_t current_round(const std::string& task) const;
  std::optional<proto::CodeBundle> bundle(const std::string& task) const;

  ServerDirectory& directory() { return directory_; }
  EventBus& events() { return events_; }
  ResultStore& results() { return store_; }
  runtime::LifecycleHooks& hooks() { return hooks_; }
  Clock& clock() { return *clock_; }

 private:
  itinerary::Topology topology_for(const std::vector<std::string>& targets) const;
  std::vector<std::string> targets_for(const taskmodel::MagForm& form) const;
  void replan_all(const std::string& host, bool joined);
  std::string push_bundle(const DirectoryEntry& host, const proto::CodeBundle& bundle);
  void reconcile(const proto::Announce& announce);
  void persist_tasks() const;
  void load_tasks();
  void record(std::vector<ResultRecord> records);
  std::string host_name(const std::string& host_or_address) const;
  void housekeeping_loop();

  ManagerConfig config_;
  security::KeyPair key_;
  security::TrustStore self_trust_;
  std::shared_ptr<net::Transport> transport_;
  std::shared_ptr<Clock> clock_;
  std::optional<itinerary::Topology> file_topology_;

  ServerDirectory directory_;
  ResultStore store_;
  taskmodel::CodeRepository repo_;
  EventBus events_;
  runtime::LifecycleHooks hooks_;

  mutable std::mutex mu_;
  std::map<std::string, TaskRun> tasks_;
  std::atomic<std::uint64_t> request_seq_{0};

  std::unique_ptr<net::FrameServer> server_;
  std::atomic<bool> running_{false};
  std::thread housekeeper_;
  std::mutex tick_mu_;
  std::condition_variable tick_cv_;
};

}  // namespace mobagent::manager
