#include "mobagent/proto/messages.hpp"

#include <algorithm>
#include <cctype>

#include "mobagent/proto/codec.hpp"

namespace mobagent::proto {

namespace {

template <typename E>
E checked_enum(std::uint8_t raw, std::uint8_t lo, std::uint8_t hi, const char* what) {
  if (raw < lo || raw > hi) {
    throw Error(Errc::kDecodeFailed, std::string("invalid ") + what + " " + std::to_string(raw));
  }
  return static_cast<E>(raw);
}

template <typename E>
void put_enum(Writer& w, E v) {
  w.u8(static_cast<std::uint8_t>(v));
}

template <typename T>
void require_sorted_unique(const std::vector<T>& v, const char* what) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i - 1] < v[i])) {
      throw Error(Errc::kDecodeFailed, std::string(what) + " not in canonical order");
    }
  }
}

// -- leaf types

void put(Writer& w, const KeyId& id) { w.raw(id); }

KeyId get_key_id(Reader& r) {
  KeyId id{};
  auto raw = r.raw(id.size());
  std::copy(raw.begin(), raw.end(), id.begin());
  return id;
}

void put(Writer& w, const SignatureBlock& s) {
  put(w, s.signer_key_id);
  w.bytes(s.signature);
}

SignatureBlock get_signature(Reader& r) {
  SignatureBlock s;
  s.signer_key_id = get_key_id(r);
  s.signature = r.bytes();
  return s;
}

void put(Writer& w, const SealedEntry& s) {
  w.bytes(s.wrapped_key);
  w.bytes(s.nonce);
  w.bytes(s.ciphertext);
}

SealedEntry get_sealed(Reader& r) {
  SealedEntry s;
  s.wrapped_key = r.bytes();
  s.nonce = r.bytes();
  s.ciphertext = r.bytes();
  return s;
}

void put(Writer& w, const AgentClassId& c) {
  w.str(c.name);
  w.u32(c.version);
}

AgentClassId get_class_id(Reader& r) {
  AgentClassId c;
  c.name = r.str();
  c.version = r.u32();
  return c;
}

void put(Writer& w, const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    w.u8(0);
    w.i64(*i);
  } else {
    w.u8(1);
    w.str(std::get<std::string>(v));
  }
}

Value get_value(Reader& r) {
  switch (r.u8()) {
    case 0: return r.i64();
    case 1: return r.str();
    default: throw Error(Errc::kDecodeFailed, "invalid value tag");
  }
}

void put(Writer& w, const QueryValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    w.u8(0);
    w.i64(*i);
  } else if (const auto* s = std::get_if<std::string>(&v)) {
    w.u8(1);
    w.str(*s);
  } else {
    w.u8(2);
  }
}

QueryValue get_query_value(Reader& r) {
  switch (r.u8()) {
    case 0: return r.i64();
    case 1: return r.str();
    case 2: return NoSuchOid{};
    default: throw Error(Errc::kDecodeFailed, "invalid query value tag");
  }
}

void put_strings(Writer& w, const std::vector<std::string>& v) {
  w.list(v, [](Writer& w, const std::string& s) { w.str(s); });
}

std::vector<std::string> get_strings(Reader& r) {
  return r.list([](Reader& r) { return r.str(); });
}

// -- programs and bundles

void put(Writer& w, const TaskProgram& p) {
  if (p.oids.empty()) throw Error(Errc::kFieldRange, "program has no OIDs");
  if (p.frequency_s < 1) throw Error(Errc::kFieldRange, "frequency_s must be >= 1");
  put_enum(w, p.service_type);
  put_strings(w, p.oids);
  w.optional(p.filter, [](Writer& w, const FilterPredicate& f) {
    w.u16(f.column);
    put_enum(w, f.comparator);
    put(w, f.constant);
  });
  w.optional(p.threshold, [](Writer& w, const ThresholdSpec& t) {
    put_enum(w, t.expr);
    put_enum(w, t.comparator);
    w.f64(t.limit);
  });
  put_enum(w, p.poll_mode);
  w.u32(p.frequency_s);
  w.boolean(p.encrypt);
  w.str(p.device_class);
}

TaskProgram get_program(Reader& r) {
  TaskProgram p;
  p.service_type = checked_enum<ServiceType>(r.u8(), 1, 3, "service type");
  p.oids = get_strings(r);
  p.filter = r.optional([](Reader& r) {
    FilterPredicate f;
    f.column = r.u16();
    f.comparator = checked_enum<Comparator>(r.u8(), 1, 6, "comparator");
    f.constant = get_value(r);
    return f;
  });
  p.threshold = r.optional([](Reader& r) {
    ThresholdSpec t;
    t.expr = checked_enum<ThresholdExpr>(r.u8(), 1, 2, "threshold expression");
    t.comparator = checked_enum<Comparator>(r.u8(), 1, 6, "comparator");
    t.limit = r.f64();
    return t;
  });
  p.poll_mode = checked_enum<PollMode>(r.u8(), 1, 2, "poll mode");
  p.frequency_s = r.u32();
  p.encrypt = r.boolean();
  p.device_class = r.str();
  return p;
}

void put(Writer& w, const AuthPolicy& p) {
  auto ops = p.allowed_ops;
  std::sort(ops.begin(), ops.end());
  ops.erase(std::unique(ops.begin(), ops.end()), ops.end());
  auto keys = p.trusted_signer_key_ids;
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  w.list(ops, [](Writer& w, SfOp op) { put_enum(w, op); });
  w.u32(p.max_oids_per_query);
  w.u32(p.max_exec_millis_per_host);
  w.u32(p.max_data_folder_bytes);
  w.list(keys, [](Writer& w, const KeyId& k) { put(w, k); });
}

AuthPolicy get_policy(Reader& r) {
  AuthPolicy p;
  p.allowed_ops = r.list([](Reader& r) { return checked_enum<SfOp>(r.u8(), 1, 2, "sf op"); });
  require_sorted_unique(p.allowed_ops, "allowed_ops");
  p.max_oids_per_query = r.u32();
  p.max_exec_millis_per_host = r.u32();
  p.max_data_folder_bytes = r.u32();
  p.trusted_signer_key_ids = r.list([](Reader& r) { return get_key_id(r); });
  require_sorted_unique(p.trusted_signer_key_ids, "trusted_signer_key_ids");
  return p;
}

void put_bundle_body(Writer& w, const CodeBundle& b) {
  put(w, b.class_id);
  put(w, b.program);
  w.str(b.program_text);
  w.i64(b.created_at);
  put(w, b.policy);
}

// -- agent state

void put(Writer& w, const DataEntry& e) {
  if (e.payload.has_value() == e.sealed.has_value()) {
    throw Error(Errc::kFieldRange, "data entry must carry exactly one of payload/sealed");
  }
  w.str(e.host);
  w.i64(e.timestamp);
  put_enum(w, e.kind);
  w.optional(e.payload, [](Writer& w, const Bytes& b) { w.bytes(b); });
  w.optional(e.sealed, [](Writer& w, const SealedEntry& s) { put(w, s); });
}

DataEntry get_entry(Reader& r) {
  DataEntry e;
  e.host = r.str();
  e.timestamp = r.i64();
  e.kind = checked_enum<EntryKind>(r.u8(), 1, 4, "entry kind");
  e.payload = r.optional([](Reader& r) { return r.bytes(); });
  e.sealed = r.optional([](Reader& r) { return get_sealed(r); });
  if (e.payload.has_value() == e.sealed.has_value()) {
    throw Error(Errc::kDecodeFailed, "data entry must carry exactly one of payload/sealed");
  }
  return e;
}

void put_agent_header(Writer& w, const AgentState& s) {
  if (s.priority > kMaxPriority) {
    throw Error(Errc::kFieldRange, "priority " + std::to_string(s.priority) + " exceeds 10");
  }
  w.str(s.agent_id);
  put(w, s.class_id);
  w.str(s.origin);
  w.i64(s.created_at);
  w.u8(s.priority);
  w.boolean(s.encrypt);
  put_strings(w, s.itinerary);
}

void put(Writer& w, const HostLoad& l) {
  w.f64(l.cpu_percent);
  w.u64(l.mem_bytes_used);
  w.i64(l.sampled_at);
}

HostLoad get_load(Reader& r) {
  HostLoad l;
  l.cpu_percent = r.f64();
  l.mem_bytes_used = r.u64();
  l.sampled_at = r.i64();
  return l;
}

void put(Writer& w, const MaInfo& m) {
  w.str(m.agent_id);
  w.str(m.class_name);
  w.u32(m.class_version);
  put_enum(w, m.poll_mode);
  w.u32(m.frequency_s);
  w.boolean(m.encrypt);
  w.i64(m.arrival_time);
  put_enum(w, m.status);
  w.u8(m.priority);
}

MaInfo get_ma_info(Reader& r) {
  MaInfo m;
  m.agent_id = r.str();
  m.class_name = r.str();
  m.class_version = r.u32();
  m.poll_mode = checked_enum<PollMode>(r.u8(), 1, 2, "poll mode");
  m.frequency_s = r.u32();
  m.encrypt = r.boolean();
  m.arrival_time = r.i64();
  m.status = checked_enum<AgentStatus>(r.u8(), 1, 3, "agent status");
  m.priority = r.u8();
  return m;
}

void put_control_body(Writer& w, const ControlRequest& c) {
  w.u64(c.request_id);
  put_enum(w, c.verb);
  w.str(c.agent_id);
  w.u32(c.argument);
  w.i64(c.issued_at);
}

template <typename T, typename Fn>
T decode_all(std::span<const std::uint8_t> b, Fn&& get) {
  Reader r(b);
  T v = get(r);
  r.expect_end();
  return v;
}

std::string normalize_token(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& all, const char* what) {
  const auto want = normalize_token(s);
  for (E e : all) {
    if (to_string(e) == want) return e;
  }
  throw Error(Errc::kFieldRange, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

}  // namespace

Bytes encode(const TaskProgram& v) {
  Writer w;
  put(w, v);
  return std::move(w).take();
}

Bytes encode_bundle_unsigned(const CodeBundle& v) {
  Writer w;
  put_bundle_body(w, v);
  return std::move(w).take();
}

Bytes encode(const CodeBundle& v) {
  Writer w;
  put_bundle_body(w, v);
  put(w, v.signature);
  return std::move(w).take();
}

Bytes encode(const DataEntry& v) {
  Writer w;
  put(w, v);
  return std::move(w).take();
}

Bytes encode_agent_header(const AgentState& v) {
  Writer w;
  put_agent_header(w, v);
  return std::move(w).take();
}

Bytes encode(const AgentState& v) {
  if (v.cursor > v.itinerary.size()) {
    throw Error(Errc::kFieldRange, "cursor beyond itinerary");
  }
  Writer w;
  put_agent_header(w, v);
  w.u32(v.cursor);
  w.list(v.data_folder, [](Writer& w, const DataEntry& e) { put(w, e); });
  put(w, v.header_signature);
  w.boolean(v.init_done);
  return std::move(w).take();
}

Bytes encode_control_unsigned(const ControlRequest& v) {
  Writer w;
  put_control_body(w, v);
  return std::move(w).take();
}

Bytes encode(const ControlRequest& v) {
  Writer w;
  put_control_body(w, v);
  put(w, v.signature);
  return std::move(w).take();
}

Bytes encode(const ControlResponse& v) {
  Writer w;
  w.u64(v.request_id);
  w.str(v.status);
  w.str(v.message);
  w.list(v.agents, [](Writer& w, const MaInfo& m) { put(w, m); });
  w.optional(v.load, [](Writer& w, const HostLoad& l) { put(w, l); });
  return std::move(w).take();
}

Bytes encode(const Announce& v) {
  auto bundles = v.bundles;
  std::sort(bundles.begin(), bundles.end(),
            [](const BundleDigest& a, const BundleDigest& b) { return a.name < b.name; });
  auto classes = v.device_classes;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  Writer w;
  w.str(v.host_id);
  w.str(v.address);
  w.u16(v.listen_port);
  put(w, v.load);
  w.list(bundles, [](Writer& w, const BundleDigest& d) {
    w.str(d.name);
    w.u32(d.version);
    w.raw(d.digest);
  });
  put_strings(w, classes);
  w.i64(v.sent_at);
  return std::move(w).take();
}

Bytes encode(const ResultNotice& v) {
  Writer w;
  w.str(v.code);
  w.str(v.agent_id);
  put(w, v.class_id);
  w.str(v.host_id);
  w.str(v.message);
  w.optional(v.agent_state, [](Writer& w, const Bytes& b) { w.bytes(b); });
  return std::move(w).take();
}

Bytes encode(const ValuesPayload& v) {
  Writer w;
  w.list(v.samples, [](Writer& w, const Sample& s) {
    w.str(s.oid);
    put(w, s.value);
  });
  return std::move(w).take();
}

Bytes encode(const RowsPayload& v) {
  Writer w;
  w.str(v.table_oid);
  w.u32(v.total_rows);
  w.list(v.rows, [](Writer& w, const Row& row) {
    w.u32(row.index);
    w.list(row.cells, [](Writer& w, const Value& c) { put(w, c); });
  });
  return std::move(w).take();
}

Bytes encode(const AlarmPayload& v) {
  Writer w;
  w.str(v.oid);
  put_enum(w, v.expr);
  put_enum(w, v.comparator);
  w.f64(v.limit);
  w.f64(v.observed);
  return std::move(w).take();
}

Bytes encode(const ErrorPayload& v) {
  Writer w;
  w.str(v.code);
  w.str(v.message);
  return std::move(w).take();
}

Bytes encode_string(std::string_view s) {
  Writer w;
  w.str(s);
  return std::move(w).take();
}

AgentState decode_agent_state(std::span<const std::uint8_t> b) {
  return decode_all<AgentState>(b, [](Reader& r) {
    AgentState s;
    s.agent_id = r.str();
    s.class_id = get_class_id(r);
    s.origin = r.str();
    s.created_at = r.i64();
    s.priority = r.u8();
    if (s.priority > kMaxPriority) throw Error(Errc::kDecodeFailed, "priority out of range");
    s.encrypt = r.boolean();
    s.itinerary = get_strings(r);
    s.cursor = r.u32();
    if (s.cursor > s.itinerary.size()) throw Error(Errc::kDecodeFailed, "cursor beyond itinerary");
    s.data_folder = r.list([](Reader& r) { return get_entry(r); });
    s.header_signature = get_signature(r);
    s.init_done = r.boolean();
    return s;
  });
}

CodeBundle decode_code_bundle(std::span<const std::uint8_t> b) {
  return decode_all<CodeBundle>(b, [](Reader& r) {
    CodeBundle c;
    c.class_id = get_class_id(r);
    c.program = get_program(r);
    c.program_text = r.str();
    c.created_at = r.i64();
    c.policy = get_policy(r);
    c.signature = get_signature(r);
    return c;
  });
}

TaskProgram decode_task_program(std::span<const std::uint8_t> b) {
  return decode_all<TaskProgram>(b, [](Reader& r) { return get_program(r); });
}

ControlRequest decode_control_request(std::span<const std::uint8_t> b) {
  return decode_all<ControlRequest>(b, [](Reader& r) {
    ControlRequest c;
    c.request_id = r.u64();
    c.verb = checked_enum<ControlVerb>(r.u8(), 1, 6, "control verb");
    c.agent_id = r.str();
    c.argument = r.u32();
    c.issued_at = r.i64();
    c.signature = get_signature(r);
    return c;
  });
}

ControlResponse decode_control_response(std::span<const std::uint8_t> b) {
  return decode_all<ControlResponse>(b, [](Reader& r) {
    ControlResponse c;
    c.request_id = r.u64();
    c.status = r.str();
    c.message = r.str();
    c.agents = r.list([](Reader& r) { return get_ma_info(r); });
    c.load = r.optional([](Reader& r) { return get_load(r); });
    return c;
  });
}

Announce decode_announce(std::span<const std::uint8_t> b) {
  return decode_all<Announce>(b, [](Reader& r) {
    Announce a;
    a.host_id = r.str();
    a.address = r.str();
    a.listen_port = r.u16();
    a.load = get_load(r);
    a.bundles = r.list([](Reader& r) {
      BundleDigest d;
      d.name = r.str();
      d.version = r.u32();
      auto raw = r.raw(d.digest.size());
      std::copy(raw.begin(), raw.end(), d.digest.begin());
      return d;
    });
    for (std::size_t i = 1; i < a.bundles.size(); ++i) {
      if (!(a.bundles[i - 1].name < a.bundles[i].name)) {
        throw Error(Errc::kDecodeFailed, "bundle digests not in canonical order");
      }
    }
    a.device_classes = get_strings(r);
    require_sorted_unique(a.device_classes, "device_classes");
    a.sent_at = r.i64();
    return a;
  });
}

ResultNotice decode_result_notice(std::span<const std::uint8_t> b) {
  return decode_all<ResultNotice>(b, [](Reader& r) {
    ResultNotice n;
    n.code = r.str();
    n.agent_id = r.str();
    n.class_id = get_class_id(r);
    n.host_id = r.str();
    n.message = r.str();
    n.agent_state = r.optional([](Reader& r) { return r.bytes(); });
    return n;
  });
}

ValuesPayload decode_values(std::span<const std::uint8_t> b) {
  return decode_all<ValuesPayload>(b, [](Reader& r) {
    ValuesPayload v;
    v.samples = r.list([](Reader& r) {
      Sample s;
      s.oid = r.str();
      s.value = get_query_value(r);
      return s;
    });
    return v;
  });
}

RowsPayload decode_rows(std::span<const std::uint8_t> b) {
  return decode_all<RowsPayload>(b, [](Reader& r) {
    RowsPayload v;
    v.table_oid = r.str();
    v.total_rows = r.u32();
    v.rows = r.list([](Reader& r) {
      Row row;
      row.index = r.u32();
      row.cells = r.list([](Reader& r) { return get_value(r); });
      return row;
    });
    return v;
  });
}

AlarmPayload decode_alarm(std::span<const std::uint8_t> b) {
  return decode_all<AlarmPayload>(b, [](Reader& r) {
    AlarmPayload a;
    a.oid = r.str();
    a.expr = checked_enum<ThresholdExpr>(r.u8(), 1, 2, "threshold expression");
    a.comparator = checked_enum<Comparator>(r.u8(), 1, 6, "comparator");
    a.limit = r.f64();
    a.observed = r.f64();
    return a;
  });
}

ErrorPayload decode_error(std::span<const std::uint8_t> b) {
  return decode_all<ErrorPayload>(b, [](Reader& r) {
    ErrorPayload e;
    e.code = r.str();
    e.message = r.str();
    return e;
  });
}

std::string_view to_string(ServiceType v) {
  switch (v) {
    case ServiceType::kScalarPoll: return "SCALAR_POLL";
    case ServiceType::kTableFilter: return "TABLE_FILTER";
    case ServiceType::kThresholdMonitor: return "THRESHOLD_MONITOR";
  }
  return "?";
}

std::string_view to_string(Comparator v) {
  switch (v) {
    case Comparator::kEq: return "EQ";
    case Comparator::kNe: return "NE";
    case Comparator::kLt: return "LT";
    case Comparator::kLe: return "LE";
    case Comparator::kGt: return "GT";
    case Comparator::kGe: return "GE";
  }
  return "?";
}

std::string_view to_string(ThresholdExpr v) {
  return v == ThresholdExpr::kValue ? "VALUE" : "DELTA_PER_SECOND";
}

std::string_view to_string(PollMode v) { return v == PollMode::kOneShot ? "ONE_SHOT" : "PERIODIC"; }

std::string_view to_string(SfOp v) { return v == SfOp::kGetScalar ? "GET_SCALAR" : "GET_TABLE"; }

std::string_view to_string(EntryKind v) {
  switch (v) {
    case EntryKind::kValues: return "VALUES";
    case EntryKind::kRows: return "ROWS";
    case EntryKind::kAlarm: return "ALARM";
    case EntryKind::kError: return "ERROR";
  }
  return "?";
}

std::string_view to_string(ControlVerb v) {
  switch (v) {
    case ControlVerb::kListAgents: return "LIST_AGENTS";
    case ControlVerb::kSuspend: return "SUSPEND";
    case ControlVerb::kResume: return "RESUME";
    case ControlVerb::kActivate: return "ACTIVATE";
    case ControlVerb::kSetFrequency: return "SET_FREQUENCY";
    case ControlVerb::kGetLoad: return "GET_LOAD";
  }
  return "?";
}

std::string_view to_string(AgentStatus v) {
  switch (v) {
    case AgentStatus::kActive: return "ACTIVE";
    case AgentStatus::kSuspended: return "SUSPENDED";
    case AgentStatus::kDeactivated: return "DEACTIVATED";
  }
  return "?";
}

ServiceType parse_service_type(std::string_view s) {
  return parse_enum(s, std::array{ServiceType::kScalarPoll, ServiceType::kTableFilter, ServiceType::kThresholdMonitor},
                    "service type");
}

Comparator parse_comparator(std::string_view s) {
  return parse_enum(s,
                    std::array{Comparator::kEq, Comparator::kNe, Comparator::kLt, Comparator::kLe, Comparator::kGt,
                               Comparator::kGe},
                    "comparator");
}

ThresholdExpr parse_threshold_expr(std::string_view s) {
  if (normalize_token(s) == "DELTA") return ThresholdExpr::kDeltaPerSecond;
  return parse_enum(s, std::array{ThresholdExpr::kValue, ThresholdExpr::kDeltaPerSecond}, "threshold expression");
}

PollMode parse_poll_mode(std::string_view s) {
  return parse_enum(s, std::array{PollMode::kOneShot, PollMode::kPeriodic}, "poll mode");
}

SfOp parse_sf_op(std::string_view s) {
  return parse_enum(s, std::array{SfOp::kGetScalar, SfOp::kGetTable}, "operation");
}

EntryKind parse_entry_kind(std::string_view s) {
  return parse_enum(s, std::array{EntryKind::kValues, EntryKind::kRows, EntryKind::kAlarm, EntryKind::kError},
                    "entry kind");
}

AgentStatus parse_agent_status(std::string_view s) {
  return parse_enum(s, std::array{AgentStatus::kActive, AgentStatus::kSuspended, AgentStatus::kDeactivated},
                    "agent status");
}

}  // namespace mobagent::proto
