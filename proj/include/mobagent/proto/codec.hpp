#pragma once

// Canonical, deterministic binary encoding. Integers are fixed-width
// big-endian, booleans one byte, strings carry a 16-bit length, byte arrays a
// 32-bit length, lists a 16-bit count and optionals a one-byte presence flag.
// Composite values write their fields in declaration order. There are no maps:
// keyed collections are encoded as lists sorted by key.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mobagent/common.hpp"

namespace mobagent::proto {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  // IEEE-754 binary64, big-endian bit pattern.
  void f64(double v);
  void boolean(bool v) { u8(v ? 1 : 0); }
  void str(std::string_view s);
  void bytes(std::span<const std::uint8_t> b);
  // Raw bytes, no length prefix (fixed-width fields such as key ids).
  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void count(std::size_t n);

  template <typename T, typename Fn>
  void list(const std::vector<T>& items, Fn&& put) {
    count(items.size());
    for (const auto& item : items) put(*this, item);
  }

  template <typename T, typename Fn>
  void optional(const std::optional<T>& v, Fn&& put) {
    boolean(v.has_value());
    if (v) put(*this, *v);
  }

  const Bytes& data() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  bool boolean();
  std::string str();
  Bytes bytes();
  Bytes raw(std::size_t n);
  std::size_t count() { return u16(); }

  template <typename Fn>
  auto list(Fn&& get) {
    using T = decltype(get(*this));
    std::vector<T> out;
    const auto n = count();
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(get(*this));
    return out;
  }

  template <typename Fn>
  auto optional(Fn&& get) {
    using T = decltype(get(*this));
    std::optional<T> out;
    if (boolean()) out = get(*this);
    return out;
  }

  std::size_t remaining() const { return in_.size() - pos_; }
  // Canonical decoding rejects trailing bytes so that encoding stays injective.
  void expect_end() const;

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace mobagent::proto
