#pragma once

#include <span>

#include "mobagent/common.hpp"

namespace mobagent::proto {

struct Compressed {
  Bytes data;
  bool was_compressed = false;
};

// Raw DEFLATE (RFC 1951). The compressed form is only used when it is strictly
// smaller than the input.
Compressed compress(std::span<const std::uint8_t> payload);

// Throws CORRUPT on an invalid stream.
Bytes decompress(std::span<const std::uint8_t> deflated, std::size_t max_output = 64u * 1024 * 1024);

}  // namespace mobagent::proto
