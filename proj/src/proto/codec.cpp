#include "mobagent/proto/codec.hpp"

#include <bit>
#include <limits>

namespace mobagent::proto {

void Writer::u16(std::uint16_t v) {
  out_.push_back(static_cast<std::uint8_t>(v >> 8));
  out_.push_back(static_cast<std::uint8_t>(v));
}

void Writer::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Writer::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::str(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(Errc::kFieldRange, "string of " + std::to_string(s.size()) + " bytes exceeds 65535");
  }
  u16(static_cast<std::uint16_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

void Writer::bytes(std::span<const std::uint8_t> b) {
  if (b.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(Errc::kFieldRange, "byte array too long");
  }
  u32(static_cast<std::uint32_t>(b.size()));
  raw(b);
}

void Writer::count(std::size_t n) {
  if (n > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(Errc::kFieldRange, "list of " + std::to_string(n) + " elements exceeds 65535");
  }
  u16(static_cast<std::uint16_t>(n));
}

std::span<const std::uint8_t> Reader::take(std::size_t n) {
  if (remaining() < n) {
    throw Error(Errc::kDecodeFailed, "unexpected end of input (need " + std::to_string(n) +
                                         " bytes, have " + std::to_string(remaining()) + ")");
  }
  auto s = in_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint8_t Reader::u8() { return take(1)[0]; }

std::uint16_t Reader::u16() {
  auto s = take(2);
  return static_cast<std::uint16_t>((s[0] << 8) | s[1]);
}

std::uint32_t Reader::u32() {
  auto s = take(4);
  std::uint32_t v = 0;
  for (auto b : s) v = (v << 8) | b;
  return v;
}

std::uint64_t Reader::u64() {
  auto s = take(8);
  std::uint64_t v = 0;
  for (auto b : s) v = (v << 8) | b;
  return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

bool Reader::boolean() {
  const auto v = u8();
  if (v > 1) throw Error(Errc::kDecodeFailed, "boolean byte " + std::to_string(v));
  return v == 1;
}

std::string Reader::str() {
  const auto n = u16();
  auto s = take(n);
  return {s.begin(), s.end()};
}

Bytes Reader::bytes() {
  const auto n = u32();
  auto s = take(n);
  return {s.begin(), s.end()};
}

Bytes Reader::raw(std::size_t n) {
  auto s = take(n);
  return {s.begin(), s.end()};
}

void Reader::expect_end() const {
  if (remaining() != 0) {
    throw Error(Errc::kDecodeFailed, std::to_string(remaining()) + " trailing bytes");
  }
}

}  // namespace mobagent::proto
