#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "mobagent/proto/messages.hpp"
#include "mobagent/security/crypto.hpp"

namespace mobagent::runtime {

using proto::AgentClassId;
using proto::AgentState;
using proto::DataEntry;
using proto::TaskProgram;

// Named extension points. Unset hooks are skipped.
struct LifecycleHooks {
  using AgentHook = std::function<void(const AgentState&)>;
  AgentHook on_create;
  AgentHook on_arrival;
  AgentHook on_before_dispatch;
  std::function<void(const AgentState&, const std::string& unreachable)> on_migration_failure;
  AgentHook on_start;
  AgentHook on_stop;
  AgentHook on_suspend;
  AgentHook on_resume;
};

template <typename Hook, typename... Args>
void fire(const Hook& hook, Args&&... args) {
  if (hook) hook(std::forward<Args>(args)...);
}

struct AgentHeader {
  std::string agent_id;
  AgentClassId class_id;
  std::string origin;
  TimestampMs created_at = 0;
  std::uint8_t priority = 5;
  bool encrypt = false;
  std::vector<std::string> itinerary;
};

// Seals and signs the header. Throws FIELD_RANGE for priority > 10 or an
// empty itinerary.
AgentState init_agent(const AgentHeader& header, const security::KeyPair& manager_key,
                      const LifecycleHooks* hooks = nullptr);

enum class HeaderField { kAgentId, kClassId, kOrigin, kCreatedAt, kPriority, kEncrypt, kItinerary };
using HeaderValue =
    std::variant<std::string, AgentClassId, TimestampMs, std::uint8_t, bool, std::vector<std::string>>;

// Header fields can be written only before initialisation; afterwards this
// always throws NOT_AUTHORIZED_TO_INITIALIZE and leaves the state untouched.
void set_immutable(AgentState& agent, HeaderField field, const HeaderValue& value);

bool verify_header(const AgentState& agent, const security::TrustStore& trusted);

struct Hop {
  std::string address;
  bool home = false;
  friend bool operator==(const Hop&, const Hop&) = default;
};

// Next itinerary host, or the origin once the itinerary is exhausted.
Hop advance_itinerary(AgentState& agent);
bool tour_complete(const AgentState& agent);

std::size_t folder_bytes(const AgentState& agent);

// Host services offered to a visiting agent.
class ServiceFacilitator {
 public:
  virtual ~ServiceFacilitator() = default;
  // Called before every query; may block (e.g. while the agent is suspended).
  virtual void checkpoint() {}
  virtual std::vector<proto::QueryValue> get_scalar(const std::vector<std::string>& oids) = 0;
  virtual std::vector<proto::Row> get_table(const std::string& table_oid) = 0;
};

// Last observation per (class, host, oid), kept by the host between visits so
// that threshold crossings and rates can be detected.
class SampleMemory {
 public:
  struct Sample {
    double value = 0;
    TimestampMs time = 0;
    bool satisfied = false;
  };

  std::optional<Sample> get(const std::string& class_name, const std::string& host,
                            const std::string& oid) const;
  void put(const std::string& class_name, const std::string& host, const std::string& oid, Sample sample);

 private:
  mutable std::mutex mu_;
  std::map<std::tuple<std::string, std::string, std::string>, Sample> samples_;
};

struct ExecContext {
  std::string host_id;
  const Clock* clock = nullptr;
  SampleMemory* memory = nullptr;
  // Recipient key for sealed entries; required when the agent has encrypt set.
  const security::PublicKey* seal_key = nullptr;
  const LifecycleHooks* hooks = nullptr;
};

struct VisitOutcome {
  bool ok = true;
  std::optional<Errc> error;
  std::size_t entries_appended = 0;
};

// Runs one host visit. Failures never escape: they are recorded as an ERROR
// entry and end the visit.
VisitOutcome execute_on_host(AgentState& agent, const TaskProgram& program, ServiceFacilitator& sf,
                             const proto::AuthPolicy& policy, const ExecContext& ctx);

// Appends an entry, sealing it when the agent requests encryption. Returns
// false (and appends nothing) if even an ERROR entry would not fit the folder
// quota.
bool append_entry(AgentState& agent, proto::EntryKind kind, Bytes payload, const std::string& host,
                  TimestampMs now, const security::PublicKey* seal_key, std::uint32_t max_folder_bytes);

// Plaintext of an entry, opening it with `key` when sealed.
Bytes entry_payload(const DataEntry& entry, const security::KeyPair* key);

bool compare(const proto::Value& lhs, proto::Comparator cmp, const proto::Value& rhs);
bool compare(double lhs, proto::Comparator cmp, double rhs);

}  // namespace mobagent::runtime
