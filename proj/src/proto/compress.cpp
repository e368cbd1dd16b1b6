#include "mobagent/proto/compress.hpp"

#include <zlib.h>

namespace mobagent::proto {

namespace {

// Negative window bits select raw DEFLATE without zlib/gzip wrappers.
constexpr int kRawDeflateWindow = -15;

}  // namespace

Compressed compress(std::span<const std::uint8_t> payload) {
  if (payload.empty()) return {Bytes{}, false};

  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, kRawDeflateWindow, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    return {Bytes(payload.begin(), payload.end()), false};
  }
  Bytes out(deflateBound(&zs, static_cast<uLong>(payload.size())));
  zs.next_in = const_cast<Bytef*>(payload.data());
  zs.avail_in = static_cast<uInt>(payload.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  deflateEnd(&zs);

  if (rc != Z_STREAM_END || produced >= payload.size()) {
    return {Bytes(payload.begin(), payload.end()), false};
  }
  out.resize(produced);
  return {std::move(out), true};
}

Bytes decompress(std::span<const std::uint8_t> deflated, std::size_t max_output) {
  z_stream zs{};
  if (inflateInit2(&zs, kRawDeflateWindow) != Z_OK) {
    throw Error(Errc::kCorrupt, "inflateInit failed");
  }
  zs.next_in = const_cast<Bytef*>(deflated.data());
  zs.avail_in = static_cast<uInt>(deflated.size());

  Bytes out;
  std::uint8_t chunk[16384];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(Errc::kCorrupt, "invalid deflate stream");
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (out.size() > max_output) {
      inflateEnd(&zs);
      throw Error(Errc::kCorrupt, "inflated size exceeds limit");
    }
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(Errc::kCorrupt, "deflate stream ends prematurely");
    }
  }
  const bool trailing = zs.avail_in != 0;
  inflateEnd(&zs);
  if (trailing) throw Error(Errc::kCorrupt, "bytes after end of deflate stream");
  return out;
}

}  // namespace mobagent::proto
