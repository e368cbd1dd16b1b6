#include "mobagent/common.hpp"

#include <array>
#include <chrono>
#include <utility>

namespace mobagent {

namespace {

struct ErrcEntry {
  Errc code;
  std::string_view name;
};

constexpr std::array kErrcNames = {
    ErrcEntry{Errc::kOversize, "OVERSIZE"},
    ErrcEntry{Errc::kBadMagic, "BAD_MAGIC"},
    ErrcEntry{Errc::kBadVersion, "BAD_VERSION"},
    ErrcEntry{Errc::kTruncated, "TRUNCATED"},
    ErrcEntry{Errc::kUnknownMsgType, "UNKNOWN_MSG_TYPE"},
    ErrcEntry{Errc::kCorrupt, "CORRUPT"},
    ErrcEntry{Errc::kFieldRange, "FIELD_RANGE"},
    ErrcEntry{Errc::kDecodeFailed, "DECODE_FAILED"},
    ErrcEntry{Errc::kOpenFailed, "OPEN_FAILED"},
    ErrcEntry{Errc::kAuthorizationViolation, "AUTHORIZATION_VIOLATION"},
    ErrcEntry{Errc::kInvalidForm, "INVALID_FORM"},
    ErrcEntry{Errc::kInvalidProgram, "INVALID_PROGRAM"},
    ErrcEntry{Errc::kBadSignature, "BAD_SIGNATURE"},
    ErrcEntry{Errc::kStaleVersion, "STALE_VERSION"},
    ErrcEntry{Errc::kNotAuthorizedToInitialize, "NOT_AUTHORIZED_TO_INITIALIZE"},
    ErrcEntry{Errc::kExecTimeout, "EXEC_TIMEOUT"},
    ErrcEntry{Errc::kSfError, "SF_ERROR"},
    ErrcEntry{Errc::kAuthFailed, "AUTH_FAILED"},
    ErrcEntry{Errc::kAgentCodeMissing, "AGENT_CODE_MISSING"},
    ErrcEntry{Errc::kVersionSuperseded, "VERSION_SUPERSEDED"},
    ErrcEntry{Errc::kDuplicateId, "DUPLICATE_ID"},
    ErrcEntry{Errc::kUnknownId, "UNKNOWN_ID"},
    ErrcEntry{Errc::kBadState, "BAD_STATE"},
    ErrcEntry{Errc::kHomeUnreachable, "HOME_UNREACHABLE"},
    ErrcEntry{Errc::kNoSuchTable, "NO_SUCH_TABLE"},
    ErrcEntry{Errc::kUnknownHost, "UNKNOWN_HOST"},
    ErrcEntry{Errc::kEmptyTargets, "EMPTY_TARGETS"},
    ErrcEntry{Errc::kDisconnected, "DISCONNECTED"},
    ErrcEntry{Errc::kTooLarge, "TOO_LARGE"},
    ErrcEntry{Errc::kHostInactive, "HOST_INACTIVE"},
    ErrcEntry{Errc::kPartialDistribution, "PARTIAL_DISTRIBUTION"},
    ErrcEntry{Errc::kDispatchFailed, "DISPATCH_FAILED"},
    ErrcEntry{Errc::kIoError, "IO_ERROR"},
    ErrcEntry{Errc::kNetwork, "NETWORK_ERROR"},
    ErrcEntry{Errc::kKeyError, "KEY_ERROR"},
    ErrcEntry{Errc::kUnknownTask, "UNKNOWN_TASK"},
    ErrcEntry{Errc::kLost, "LOST"},
};

}  // namespace

std::string_view errc_name(Errc code) {
  for (const auto& e : kErrcNames) {
    if (e.code == code) return e.name;
  }
  return "UNKNOWN";
}

Errc errc_from_name(std::string_view name) {
  for (const auto& e : kErrcNames) {
    if (e.name == name) return e.code;
  }
  throw Error(Errc::kDecodeFailed, "unknown error code '" + std::string(name) + "'");
}

Error::Error(Errc code, std::string message, std::string detail)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message),
      code_(code),
      detail_(std::move(detail)) {}

TimestampMs SystemClock::now_ms() const {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::shared_ptr<Clock> system_clock() {
  static const auto clock = std::make_shared<SystemClock>();
  return clock;
}

std::string to_hex(const std::uint8_t* data, std::size_t size) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(size * 2);
  for (std::size_t i = 0; i < size; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0x0f]);
  }
  return out;
}

}  // namespace mobagent
