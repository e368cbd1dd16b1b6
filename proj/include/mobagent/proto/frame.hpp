#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "mobagent/common.hpp"

namespace mobagent::proto {

enum class MsgType : std::uint8_t {
  kAgentState = 1,
  kCodeBundle = 2,
  kControlReq = 3,
  kControlResp = 4,
  kAnnounce = 5,
  kResult = 6,
};

std::string_view msg_type_name(MsgType t);

namespace flags {
inline constexpr std::uint8_t kCompressed = 0x01;
inline constexpr std::uint8_t kSealed = 0x02;
inline constexpr std::uint8_t kSigned = 0x04;
}  // namespace flags

inline constexpr std::size_t kHeaderSize = 12;
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kDefaultMaxPayload = 8u * 1024 * 1024;

struct Frame {
  MsgType type{};
  std::uint8_t flags = 0;
  Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

// Wire layout: "MAP1" | version | msg_type | flags | reserved(0) |
// payload_len (u32 BE) | payload.
Bytes encode_frame(MsgType type, std::uint8_t flags, std::span<const std::uint8_t> payload,
                   std::size_t max_payload = kDefaultMaxPayload);

struct FrameHeader {
  MsgType type{};
  std::uint8_t flags = 0;
  std::uint32_t payload_len = 0;
};

// Validates magic, version, reserved byte and msg_type of a 12-byte header.
FrameHeader parse_header(std::span<const std::uint8_t> header, std::size_t max_payload = kDefaultMaxPayload);

// Decodes exactly one frame from a complete buffer. Missing bytes are
// TRUNCATED; surplus bytes after the payload are rejected as well.
Frame decode_frame(std::span<const std::uint8_t> bytes, std::size_t max_payload = kDefaultMaxPayload);

// Pull-based variant: `read` fills the given span completely or returns false
// at end of stream. Returns nullopt on a clean end of stream before a header.
using ByteSource = std::function<bool(std::span<std::uint8_t>)>;
std::optional<Frame> read_frame(const ByteSource& read, std::size_t max_payload = kDefaultMaxPayload);

// Frame-level helpers combining compression with framing.
Bytes pack(MsgType type, const Bytes& canonical, std::uint8_t extra_flags = 0);
// Returns the canonical payload of a frame, decompressing when flagged.
Bytes unpack_payload(const Frame& frame);

}  // namespace mobagent::proto
