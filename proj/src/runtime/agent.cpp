#include "mobagent/runtime/agent.hpp"

#include <chrono>

#include "mobagent/security/policy.hpp"

namespace mobagent::runtime {

using proto::Comparator;
using proto::EntryKind;
using proto::ServiceType;

namespace {

Bytes error_payload(Errc code, const std::string& message) {
  return proto::encode(proto::ErrorPayload{std::string(errc_name(code)), message});
}

template <typename T>
bool ordered(const T& a, Comparator c, const T& b) {
  switch (c) {
    case Comparator::kEq: return a == b;
    case Comparator::kNe: return a != b;
    case Comparator::kLt: return a < b;
    case Comparator::kLe: return a <= b;
    case Comparator::kGt: return a > b;
    case Comparator::kGe: return a >= b;
  }
  return false;
}

// Measures active execution time; time spent blocked in checkpoint() does not
// count against the per-host budget.
class VisitTimer {
 public:
  explicit VisitTimer(std::uint32_t budget_ms) : budget_(budget_ms), start_(Clock::now()) {}

  void checkpoint(ServiceFacilitator& sf) {
    const auto before = Clock::now();
    sf.checkpoint();
    paused_ += Clock::now() - before;
  }

  void check() const {
    const auto active = Clock::now() - start_ - paused_;
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(active).count();
    if (ms > budget_) {
      throw Error(Errc::kExecTimeout, "visit ran " + std::to_string(ms) + " ms, budget " + std::to_string(budget_) + " ms");
    }
  }

 private:
  using Clock = std::chrono::steady_clock;
  std::int64_t budget_;
  Clock::time_point start_;
  Clock::duration paused_{};
};

double numeric(const proto::QueryValue& v, const std::string& oid) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (std::holds_alternative<proto::NoSuchOid>(v)) throw Error(Errc::kSfError, "NO_SUCH_OID " + oid);
  throw Error(Errc::kSfError, "non-numeric value for " + oid);
}

}  // namespace

AgentState init_agent(const AgentHeader& h, const security::KeyPair& manager_key, const LifecycleHooks* hooks) {
  if (h.priority > proto::kMaxPriority) {
    throw Error(Errc::kFieldRange, "priority " + std::to_string(h.priority) + " exceeds 10");
  }
  if (h.itinerary.empty()) throw Error(Errc::kFieldRange, "itinerary needs at least one hop");
  if (h.agent_id.empty()) throw Error(Errc::kFieldRange, "agent id is empty");

  AgentState s;
  s.agent_id = h.agent_id;
  s.class_id = h.class_id;
  s.origin = h.origin;
  s.created_at = h.created_at;
  s.priority = h.priority;
  s.encrypt = h.encrypt;
  s.itinerary = h.itinerary;
  s.cursor = 0;
  s.header_signature = security::sign(proto::encode_agent_header(s), manager_key);
  s.init_done = true;
  if (hooks) fire(hooks->on_create, s);
  return s;
}

void set_immutable(AgentState& agent, HeaderField field, const HeaderValue& value) {
  if (agent.init_done) {
    throw Error(Errc::kNotAuthorizedToInitialize, "header of " + agent.agent_id + " is sealed");
  }
  switch (field) {
    case HeaderField::kAgentId: agent.agent_id = std::get<std::string>(value); break;
    case HeaderField::kClassId: agent.class_id = std::get<AgentClassId>(value); break;
    case HeaderField::kOrigin: agent.origin = std::get<std::string>(value); break;
    case HeaderField::kCreatedAt: agent.created_at = std::get<TimestampMs>(value); break;
    case HeaderField::kPriority: {
      const auto p = std::get<std::uint8_t>(value);
      if (p > proto::kMaxPriority) throw Error(Errc::kFieldRange, "priority exceeds 10");
      agent.priority = p;
      break;
    }
    case HeaderField::kEncrypt: agent.encrypt = std::get<bool>(value); break;
    case HeaderField::kItinerary: agent.itinerary = std::get<std::vector<std::string>>(value); break;
  }
}

bool verify_header(const AgentState& agent, const security::TrustStore& trusted) {
  if (!agent.init_done) return false;
  try {
    return security::verify(proto::encode_agent_header(agent), agent.header_signature, trusted);
  } catch (const Error&) {
    return false;
  }
}

Hop advance_itinerary(AgentState& agent) {
  if (agent.cursor < agent.itinerary.size()) {
    return Hop{agent.itinerary[agent.cursor++], false};
  }
  return Hop{agent.origin, true};
}

bool tour_complete(const AgentState& agent) { return agent.cursor >= agent.itinerary.size(); }

std::size_t folder_bytes(const AgentState& agent) {
  std::size_t total = 0;
  for (const auto& e : agent.data_folder) total += proto::encode(e).size();
  return total;
}

std::optional<SampleMemory::Sample> SampleMemory::get(const std::string& class_name, const std::string& host,
                                                      const std::string& oid) const {
  std::lock_guard lock(mu_);
  auto it = samples_.find({class_name, host, oid});
  if (it == samples_.end()) return std::nullopt;
  return it->second;
}

void SampleMemory::put(const std::string& class_name, const std::string& host, const std::string& oid,
                       Sample sample) {
  std::lock_guard lock(mu_);
  samples_[{class_name, host, oid}] = sample;
}

bool append_entry(AgentState& agent, EntryKind kind, Bytes payload, const std::string& host, TimestampMs now,
                  const security::PublicKey* seal_key, std::uint32_t max_folder_bytes) {
  auto build = [&](EntryKind k, Bytes p) {
    DataEntry e;
    e.host = host;
    e.timestamp = now;
    e.kind = k;
    if (agent.encrypt) {
      if (seal_key == nullptr || !seal_key->valid()) {
        throw Error(Errc::kKeyError, "agent requests encryption but no recipient key is configured");
      }
      e.sealed = security::seal(p, *seal_key, max_folder_bytes);
    } else {
      e.payload = std::move(p);
    }
    return e;
  };

  const auto used = folder_bytes(agent);
  try {
    auto entry = build(kind, std::move(payload));
    if (used + proto::encode(entry).size() <= max_folder_bytes) {
      agent.data_folder.push_back(std::move(entry));
      return true;
    }
  } catch (const Error& e) {
    if (e.code() != Errc::kOversize) throw;
  }
  auto err = build(EntryKind::kError,
                   error_payload(Errc::kOversize, "data folder quota of " + std::to_string(max_folder_bytes) +
                                                      " bytes reached"));
  if (used + proto::encode(err).size() > max_folder_bytes) return false;
  agent.data_folder.push_back(std::move(err));
  return true;
}

Bytes entry_payload(const DataEntry& entry, const security::KeyPair* key) {
  if (entry.payload) return *entry.payload;
  if (!entry.sealed) throw Error(Errc::kDecodeFailed, "entry has no payload");
  if (key == nullptr) throw Error(Errc::kOpenFailed, "sealed entry and no key");
  return security::open(*entry.sealed, *key);
}

bool compare(const proto::Value& lhs, Comparator cmp, const proto::Value& rhs) {
  if (lhs.index() != rhs.index()) return cmp == Comparator::kNe;
  if (const auto* a = std::get_if<std::int64_t>(&lhs)) return ordered(*a, cmp, std::get<std::int64_t>(rhs));
  return ordered(std::get<std::string>(lhs), cmp, std::get<std::string>(rhs));
}

bool compare(double lhs, Comparator cmp, double rhs) { return ordered(lhs, cmp, rhs); }

VisitOutcome execute_on_host(AgentState& agent, const TaskProgram& program, ServiceFacilitator& sf,
                             const proto::AuthPolicy& policy, const ExecContext& ctx) {
  const TimestampMs now = ctx.clock ? ctx.clock->now_ms() : SystemClock{}.now_ms();
  const auto max_folder = policy.max_data_folder_bytes;
  VisitOutcome outcome;
  auto append = [&](EntryKind kind, Bytes payload) {
    if (append_entry(agent, kind, std::move(payload), ctx.host_id, now, ctx.seal_key, max_folder)) {
      ++outcome.entries_appended;
    }
  };

  if (ctx.hooks) fire(ctx.hooks->on_start, agent);
  try {
    VisitTimer timer(policy.max_exec_millis_per_host);
    switch (program.service_type) {
      case ServiceType::kScalarPoll: {
        security::authorize(proto::SfOp::kGetScalar, program.oids.size(), policy);
        timer.checkpoint(sf);
        auto values = sf.get_scalar(program.oids);
        timer.check();
        if (values.size() != program.oids.size()) throw Error(Errc::kSfError, "facilitator returned wrong arity");
        proto::ValuesPayload p;
        for (std::size_t i = 0; i < values.size(); ++i) p.samples.push_back({program.oids[i], std::move(values[i])});
        append(EntryKind::kValues, proto::encode(p));
        break;
      }
      case ServiceType::kTableFilter: {
        const auto& table = program.oids.front();
        security::authorize(proto::SfOp::kGetTable, 1, policy);
        timer.checkpoint(sf);
        auto rows = sf.get_table(table);
        timer.check();
        proto::RowsPayload p;
        p.table_oid = table;
        p.total_rows = static_cast<std::uint32_t>(rows.size());
        const auto& f = *program.filter;
        for (auto& row : rows) {
          if (f.column < row.cells.size() && compare(row.cells[f.column], f.comparator, f.constant)) {
            p.rows.push_back(std::move(row));
          }
        }
        append(EntryKind::kRows, proto::encode(p));
        break;
      }
      case ServiceType::kThresholdMonitor: {
        const auto& t = *program.threshold;
        security::authorize(proto::SfOp::kGetScalar, program.oids.size(), policy);
        timer.checkpoint(sf);
        const auto values = sf.get_scalar(program.oids);
        timer.check();
        if (values.size() != program.oids.size()) throw Error(Errc::kSfError, "facilitator returned wrong arity");
        std::vector<proto::AlarmPayload> alarms;
        for (std::size_t i = 0; i < values.size(); ++i) {
          const auto& oid = program.oids[i];
          const double v = numeric(values[i], oid);
          const auto prior = ctx.memory ? ctx.memory->get(agent.class_id.name, ctx.host_id, oid) : std::nullopt;
          std::optional<double> observed;
          if (t.expr == proto::ThresholdExpr::kValue) {
            observed = v;
          } else if (prior && now > prior->time) {
            observed = (v - prior->value) / (static_cast<double>(now - prior->time) / 1000.0);
          }
          const bool satisfied = observed && compare(*observed, t.comparator, t.limit);
          if (ctx.memory) ctx.memory->put(agent.class_id.name, ctx.host_id, oid, {v, now, satisfied});
          // Edge-triggered: one alarm per transition into the satisfied state.
          if (satisfied && !(prior && prior->satisfied)) {
            alarms.push_back({oid, t.expr, t.comparator, t.limit, *observed});
          }
        }
        for (const auto& a : alarms) append(EntryKind::kAlarm, proto::encode(a));
        break;
      }
    }
  } catch (const Error& e) {
    outcome.ok = false;
    Errc code = e.code();
    if (code != Errc::kAuthorizationViolation && code != Errc::kExecTimeout) code = Errc::kSfError;
    outcome.error = code;
    std::string message = e.what();
    if (!e.detail().empty()) message += " [rule=" + e.detail() + "]";
    append(EntryKind::kError, error_payload(code, message));
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error = Errc::kSfError;
    append(EntryKind::kError, error_payload(Errc::kSfError, e.what()));
  }
  if (ctx.hooks) fire(ctx.hooks->on_stop, agent);
  return outcome;
}

}  // namespace mobagent::runtime
