#include "mobagent/proto/frame.hpp"

#include <array>
#include <cstring>

#include "mobagent/proto/compress.hpp"

namespace mobagent::proto {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'M', 'A', 'P', '1'};

bool known_type(std::uint8_t t) { return t >= 1 && t <= 6; }

}  // namespace

std::string_view msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::kAgentState: return "AGENT_STATE";
    case MsgType::kCodeBundle: return "CODE_BUNDLE";
    case MsgType::kControlReq: return "CONTROL_REQ";
    case MsgType::kControlResp: return "CONTROL_RESP";
    case MsgType::kAnnounce: return "ANNOUNCE";
    case MsgType::kResult: return "RESULT";
  }
  return "UNKNOWN";
}

Bytes encode_frame(MsgType type, std::uint8_t flags, std::span<const std::uint8_t> payload,
                   std::size_t max_payload) {
  if (payload.size() > max_payload) {
    throw Error(Errc::kOversize, "payload of " + std::to_string(payload.size()) +
                                     " bytes exceeds limit " + std::to_string(max_payload));
  }
  if (!known_type(static_cast<std::uint8_t>(type))) {
    throw Error(Errc::kUnknownMsgType, "msg_type " + std::to_string(static_cast<int>(type)));
  }
  Bytes out;
  out.reserve(kHeaderSize + payload.size());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(kProtocolVersion);
  out.push_back(static_cast<std::uint8_t>(type));
  out.push_back(flags);
  out.push_back(0);
  const auto len = static_cast<std::uint32_t>(payload.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(len >> shift));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

FrameHeader parse_header(std::span<const std::uint8_t> header, std::size_t max_payload) {
  // Magic is checked on whatever prefix is available so that garbage is
  // reported as such rather than as a short read.
  const auto magic_len = std::min(header.size(), kMagic.size());
  if (std::memcmp(header.data(), kMagic.data(), magic_len) != 0) {
    throw Error(Errc::kBadMagic, "frame does not start with MAP1");
  }
  if (header.size() < kHeaderSize) {
    throw Error(Errc::kTruncated, "header needs 12 bytes, have " + std::to_string(header.size()));
  }
  if (header[4] != kProtocolVersion) {
    throw Error(Errc::kBadVersion, "protocol version " + std::to_string(header[4]));
  }
  if (!known_type(header[5])) {
    throw Error(Errc::kUnknownMsgType, "msg_type " + std::to_string(header[5]));
  }
  if (header[7] != 0) {
    throw Error(Errc::kDecodeFailed, "reserved header byte is non-zero");
  }
  FrameHeader h;
  h.type = static_cast<MsgType>(header[5]);
  h.flags = header[6];
  h.payload_len = (std::uint32_t{header[8]} << 24) | (std::uint32_t{header[9]} << 16) |
                  (std::uint32_t{header[10]} << 8) | std::uint32_t{header[11]};
  if (h.payload_len > max_payload) {
    throw Error(Errc::kOversize, "declared payload of " + std::to_string(h.payload_len) + " bytes");
  }
  return h;
}

Frame decode_frame(std::span<const std::uint8_t> bytes, std::size_t max_payload) {
  const auto h = parse_header(bytes, max_payload);
  const auto available = bytes.size() - kHeaderSize;
  if (available < h.payload_len) {
    throw Error(Errc::kTruncated, "header claims " + std::to_string(h.payload_len) +
                                      " payload bytes, " + std::to_string(available) + " follow");
  }
  if (available > h.payload_len) {
    throw Error(Errc::kDecodeFailed, std::to_string(available - h.payload_len) +
                                         " bytes after frame payload");
  }
  auto payload = bytes.subspan(kHeaderSize);
  return Frame{h.type, h.flags, Bytes(payload.begin(), payload.end())};
}

std::optional<Frame> read_frame(const ByteSource& read, std::size_t max_payload) {
  std::array<std::uint8_t, kHeaderSize> header{};
  if (!read(header)) return std::nullopt;
  const auto h = parse_header(header, max_payload);
  Frame f{h.type, h.flags, Bytes(h.payload_len)};
  if (h.payload_len > 0 && !read(f.payload)) {
    throw Error(Errc::kTruncated, "stream ended inside a " + std::to_string(h.payload_len) +
                                      "-byte payload");
  }
  return f;
}

Bytes pack(MsgType type, const Bytes& canonical, std::uint8_t extra_flags) {
  auto c = compress(canonical);
  std::uint8_t f = extra_flags & static_cast<std::uint8_t>(~flags::kCompressed);
  if (c.was_compressed) f |= flags::kCompressed;
  return encode_frame(type, f, c.data);
}

Bytes unpack_payload(const Frame& frame) {
  if (frame.flags & flags::kCompressed) return decompress(frame.payload);
  return frame.payload;
}

}  // namespace mobagent::proto
