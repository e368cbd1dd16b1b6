#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mobagent {

using Bytes = std::vector<std::uint8_t>;

// UTC milliseconds since the Unix epoch.
using TimestampMs = std::int64_t;

// Every failure the platform reports by name. The wire/API spelling is
// produced by errc_name() and parsed back by errc_from_name().
enum class Errc {
  kOversize,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kUnknownMsgType,
  kCorrupt,
  kFieldRange,
  kDecodeFailed,
  kOpenFailed,
  kAuthorizationViolation,
  kInvalidForm,
  kInvalidProgram,
  kBadSignature,
  kStaleVersion,
  kNotAuthorizedToInitialize,
  kExecTimeout,
  kSfError,
  kAuthFailed,
  kAgentCodeMissing,
  kVersionSuperseded,
  kDuplicateId,
  kUnknownId,
  kBadState,
  kHomeUnreachable,
  kNoSuchTable,
  kUnknownHost,
  kEmptyTargets,
  kDisconnected,
  kTooLarge,
  kHostInactive,
  kPartialDistribution,
  kDispatchFailed,
  kIoError,
  kNetwork,
  kKeyError,
  kUnknownTask,
  kLost,
};

std::string_view errc_name(Errc code);
Errc errc_from_name(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::string detail = {});

  Errc code() const noexcept { return code_; }
  // Machine-readable qualifier, e.g. which authorization rule failed or which
  // form fields were invalid.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimestampMs now_ms() const = 0;
};

class SystemClock final : public Clock {
 public:
  TimestampMs now_ms() const override;
};

// Test clock; only moves when told to.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(TimestampMs start = 1'700'000'000'000) : now_(start) {}
  TimestampMs now_ms() const override { return now_.load(); }
  void advance_ms(TimestampMs delta) { now_.fetch_add(delta); }
  void set_ms(TimestampMs t) { now_.store(t); }

 private:
  std::atomic<TimestampMs> now_;
};

std::shared_ptr<Clock> system_clock();

std::string to_hex(const std::uint8_t* data, std::size_t size);
inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

}  // namespace mobagent
