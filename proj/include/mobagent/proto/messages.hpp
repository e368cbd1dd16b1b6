#pragma once

// Value types carried on the wire. Everything here is plain data; behaviour
// lives in security/, taskmodel/, runtime/, masd/ and manager/.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mobagent/common.hpp"

namespace mobagent::proto {

using KeyId = std::array<std::uint8_t, 8>;
using Digest = std::array<std::uint8_t, 32>;

struct SignatureBlock {
  KeyId signer_key_id{};
  Bytes signature;
  friend bool operator==(const SignatureBlock&, const SignatureBlock&) = default;
};

struct SealedEntry {
  Bytes wrapped_key;  // RSA-OAEP(SHA-256) wrapped AES-256 key
  Bytes nonce;        // 96-bit GCM nonce
  Bytes ciphertext;   // AES-256-GCM ciphertext followed by the 16-byte tag
  friend bool operator==(const SealedEntry&, const SealedEntry&) = default;
};

struct AgentClassId {
  std::string name;
  std::uint32_t version = 1;
  friend auto operator<=>(const AgentClassId&, const AgentClassId&) = default;
};

// ---- task programs ---------------------------------------------------------

enum class ServiceType : std::uint8_t { kScalarPoll = 1, kTableFilter = 2, kThresholdMonitor = 3 };
enum class Comparator : std::uint8_t { kEq = 1, kNe, kLt, kLe, kGt, kGe };
enum class ThresholdExpr : std::uint8_t { kValue = 1, kDeltaPerSecond = 2 };
enum class PollMode : std::uint8_t { kOneShot = 1, kPeriodic = 2 };
enum class SfOp : std::uint8_t { kGetScalar = 1, kGetTable = 2 };

// A managed-object value: integer or octet string.
using Value = std::variant<std::int64_t, std::string>;

struct NoSuchOid {
  friend bool operator==(NoSuchOid, NoSuchOid) = default;
};

// A value as returned by a query: present, or the in-place NO_SUCH_OID marker.
using QueryValue = std::variant<std::int64_t, std::string, NoSuchOid>;

struct FilterPredicate {
  std::uint16_t column = 0;
  Comparator comparator = Comparator::kEq;
  Value constant;
  friend bool operator==(const FilterPredicate&, const FilterPredicate&) = default;
};

struct ThresholdSpec {
  ThresholdExpr expr = ThresholdExpr::kValue;
  Comparator comparator = Comparator::kGt;
  double limit = 0;
  friend bool operator==(const ThresholdSpec&, const ThresholdSpec&) = default;
};

struct TaskProgram {
  ServiceType service_type = ServiceType::kScalarPoll;
  std::vector<std::string> oids;
  std::optional<FilterPredicate> filter;
  std::optional<ThresholdSpec> threshold;
  PollMode poll_mode = PollMode::kPeriodic;
  std::uint32_t frequency_s = 60;
  bool encrypt = false;
  std::string device_class;
  friend bool operator==(const TaskProgram&, const TaskProgram&) = default;
};

struct AuthPolicy {
  static constexpr std::uint32_t kDefaultMaxOids = 64;
  static constexpr std::uint32_t kDefaultMaxExecMillis = 2000;
  static constexpr std::uint32_t kDefaultMaxFolderBytes = 1u << 20;

  std::vector<SfOp> allowed_ops{SfOp::kGetScalar, SfOp::kGetTable};  // kept sorted
  std::uint32_t max_oids_per_query = kDefaultMaxOids;
  std::uint32_t max_exec_millis_per_host = kDefaultMaxExecMillis;
  std::uint32_t max_data_folder_bytes = kDefaultMaxFolderBytes;
  std::vector<KeyId> trusted_signer_key_ids;  // kept sorted
  friend bool operator==(const AuthPolicy&, const AuthPolicy&) = default;
};

struct CodeBundle {
  AgentClassId class_id;
  TaskProgram program;
  // Listing produced by instantiating the service-type skeleton; the
  // human-readable form of the agent's code.
  std::string program_text;
  TimestampMs created_at = 0;
  AuthPolicy policy;
  SignatureBlock signature;
  friend bool operator==(const CodeBundle&, const CodeBundle&) = default;
};

// ---- agent state -----------------------------------------------------------

enum class EntryKind : std::uint8_t { kValues = 1, kRows = 2, kAlarm = 3, kError = 4 };

struct DataEntry {
  std::string host;
  TimestampMs timestamp = 0;
  EntryKind kind = EntryKind::kValues;
  std::optional<Bytes> payload;
  std::optional<SealedEntry> sealed;
  friend bool operator==(const DataEntry&, const DataEntry&) = default;
};

struct AgentState {
  std::string agent_id;
  AgentClassId class_id;
  std::string origin;
  TimestampMs created_at = 0;
  std::uint8_t priority = 5;
  bool encrypt = false;
  std::vector<std::string> itinerary;
  std::uint32_t cursor = 0;
  std::vector<DataEntry> data_folder;
  SignatureBlock header_signature;
  bool init_done = false;
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

inline constexpr std::uint8_t kMaxPriority = 10;

// ---- entry payloads --------------------------------------------------------

struct Sample {
  std::string oid;
  QueryValue value;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct ValuesPayload {
  std::vector<Sample> samples;
  friend bool operator==(const ValuesPayload&, const ValuesPayload&) = default;
};

struct Row {
  std::uint32_t index = 0;  // 1-based position in the source table
  std::vector<Value> cells;
  friend bool operator==(const Row&, const Row&) = default;
};

struct RowsPayload {
  std::string table_oid;
  std::uint32_t total_rows = 0;  // rows inspected before filtering
  std::vector<Row> rows;
  friend bool operator==(const RowsPayload&, const RowsPayload&) = default;
};

struct AlarmPayload {
  std::string oid;
  ThresholdExpr expr = ThresholdExpr::kValue;
  Comparator comparator = Comparator::kGt;
  double limit = 0;
  double observed = 0;
  friend bool operator==(const AlarmPayload&, const AlarmPayload&) = default;
};

struct ErrorPayload {
  std::string code;  // errc_name() spelling
  std::string message;
  friend bool operator==(const ErrorPayload&, const ErrorPayload&) = default;
};

// ---- control plane ---------------------------------------------------------

enum class ControlVerb : std::uint8_t {
  kListAgents = 1,
  kSuspend = 2,
  kResume = 3,
  kActivate = 4,
  kSetFrequency = 5,
  kGetLoad = 6,
};

enum class AgentStatus : std::uint8_t { kActive = 1, kSuspended = 2, kDeactivated = 3 };

struct HostLoad {
  double cpu_percent = 0;
  std::uint64_t mem_bytes_used = 0;
  TimestampMs sampled_at = 0;
  friend bool operator==(const HostLoad&, const HostLoad&) = default;
};

struct MaInfo {
  std::string agent_id;
  std::string class_name;
  std::uint32_t class_version = 0;
  PollMode poll_mode = PollMode::kPeriodic;
  std::uint32_t frequency_s = 0;
  bool encrypt = false;
  TimestampMs arrival_time = 0;
  AgentStatus status = AgentStatus::kActive;
  std::uint8_t priority = 5;
  friend bool operator==(const MaInfo&, const MaInfo&) = default;
};

struct ControlRequest {
  std::uint64_t request_id = 0;
  ControlVerb verb = ControlVerb::kListAgents;
  std::string agent_id;
  std::uint32_t argument = 0;
  TimestampMs issued_at = 0;
  SignatureBlock signature;  // over the canonical bytes of the fields above
  friend bool operator==(const ControlRequest&, const ControlRequest&) = default;
};

struct ControlResponse {
  std::uint64_t request_id = 0;
  std::string status = "OK";  // "OK" or an errc_name()
  std::string message;
  std::vector<MaInfo> agents;
  std::optional<HostLoad> load;
  friend bool operator==(const ControlResponse&, const ControlResponse&) = default;
};

struct BundleDigest {
  std::string name;
  std::uint32_t version = 0;
  Digest digest{};
  friend bool operator==(const BundleDigest&, const BundleDigest&) = default;
};

struct Announce {
  std::string host_id;
  std::string address;  // reachable host part, e.g. 127.0.0.1
  std::uint16_t listen_port = 0;
  HostLoad load;
  std::vector<BundleDigest> bundles;  // sorted by name
  std::vector<std::string> device_classes;
  TimestampMs sent_at = 0;
  friend bool operator==(const Announce&, const Announce&) = default;
};

// Out-of-band notice sent to an agent's origin, e.g. when an agent was
// rejected at a host.
struct ResultNotice {
  std::string code;  // errc_name() spelling
  std::string agent_id;
  AgentClassId class_id;
  std::string host_id;
  std::string message;
  std::optional<Bytes> agent_state;  // canonical AgentState, when re-dispatch is possible
  friend bool operator==(const ResultNotice&, const ResultNotice&) = default;
};

// ---- canonical encoding ----------------------------------------------------

Bytes encode(const AgentState& v);
Bytes encode(const CodeBundle& v);
Bytes encode(const ControlRequest& v);
Bytes encode(const ControlResponse& v);
Bytes encode(const Announce& v);
Bytes encode(const ResultNotice& v);
Bytes encode(const TaskProgram& v);
Bytes encode(const ValuesPayload& v);
Bytes encode(const RowsPayload& v);
Bytes encode(const AlarmPayload& v);
Bytes encode(const ErrorPayload& v);
Bytes encode(const DataEntry& v);

// Signed portions.
Bytes encode_agent_header(const AgentState& v);
Bytes encode_bundle_unsigned(const CodeBundle& v);
Bytes encode_control_unsigned(const ControlRequest& v);

AgentState decode_agent_state(std::span<const std::uint8_t> b);
CodeBundle decode_code_bundle(std::span<const std::uint8_t> b);
ControlRequest decode_control_request(std::span<const std::uint8_t> b);
ControlResponse decode_control_response(std::span<const std::uint8_t> b);
Announce decode_announce(std::span<const std::uint8_t> b);
ResultNotice decode_result_notice(std::span<const std::uint8_t> b);
TaskProgram decode_task_program(std::span<const std::uint8_t> b);
ValuesPayload decode_values(std::span<const std::uint8_t> b);
RowsPayload decode_rows(std::span<const std::uint8_t> b);
AlarmPayload decode_alarm(std::span<const std::uint8_t> b);
ErrorPayload decode_error(std::span<const std::uint8_t> b);

// Encoding for a bare string, exposed for golden tests of the rules.
Bytes encode_string(std::string_view s);

std::string_view to_string(ServiceType v);
std::string_view to_string(Comparator v);
std::string_view to_string(ThresholdExpr v);
std::string_view to_string(PollMode v);
std::string_view to_string(SfOp v);
std::string_view to_string(EntryKind v);
std::string_view to_string(ControlVerb v);
std::string_view to_string(AgentStatus v);

// Parsers accept the to_string() spelling (case-insensitive, '-' or '_').
ServiceType parse_service_type(std::string_view s);
Comparator parse_comparator(std::string_view s);
ThresholdExpr parse_threshold_expr(std::string_view s);
PollMode parse_poll_mode(std::string_view s);
SfOp parse_sf_op(std::string_view s);
EntryKind parse_entry_kind(std::string_view s);
AgentStatus parse_agent_status(std::string_view s);

}  // namespace mobagent::proto
