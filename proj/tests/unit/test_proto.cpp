#include <gtest/gtest.h>
#include <zlib.h>

#include <random>

#include "generators.hpp"
#include "mobagent/proto/codec.hpp"
#include "mobagent/proto/compress.hpp"
#include "mobagent/proto/frame.hpp"
#include "mobagent/proto/messages.hpp"

using namespace mobagent;
using namespace mobagent::proto;
using mobagent::testing::Gen;

namespace {

Bytes raw_inflate(const Bytes& in) {
  z_stream zs{};
  EXPECT_EQ(inflateInit2(&zs, -15), Z_OK);
  Bytes out(1 << 20);
  zs.next_in = const_cast<Bytes::value_type*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  EXPECT_EQ(inflate(&zs, Z_FINISH), Z_STREAM_END);
  out.resize(zs.total_out);
  inflateEnd(&zs);
  return out;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::kLost;
}

}  // namespace

TEST(Frame, GoldenHeaderBytes) {
  const Bytes payload{'a', 'b', 'c'};
  const Bytes expected{'M', 'A', 'P', '1', 0x01, 0x01, 0x04, 0x00, 0x00, 0x00, 0x00, 0x03, 'a', 'b', 'c'};
  EXPECT_EQ(encode_frame(MsgType::kAgentState, flags::kSigned, payload), expected);
}

TEST(Frame, GoldenHeaderLengthIsBigEndian) {
  const Bytes payload(0x010203, 0x5a);
  const auto f = encode_frame(MsgType::kResult, 0, payload);
  ASSERT_EQ(f.size(), 12u + 0x010203);
  const Bytes header(f.begin(), f.begin() + 12);
  const Bytes expected{'M', 'A', 'P', '1', 0x01, 0x06, 0x00, 0x00, 0x00, 0x01, 0x02, 0x03};
  EXPECT_EQ(header, expected);
}

TEST(Frame, PackSetsCompressedFlagOnlyWhenSmaller) {
  const Bytes tiny{1, 2, 3};
  auto f = decode_frame(pack(MsgType::kAnnounce, tiny));
  EXPECT_EQ(f.flags & flags::kCompressed, 0);
  EXPECT_EQ(f.payload, tiny);

  const Bytes big(4000, 7);
  f = decode_frame(pack(MsgType::kAnnounce, big, flags::kSigned));
  EXPECT_NE(f.flags & flags::kCompressed, 0);
  EXPECT_NE(f.flags & flags::kSigned, 0);
  EXPECT_LT(f.payload.size(), big.size());
  EXPECT_EQ(unpack_payload(f), big);
}

TEST(Frame, RejectsMalformedHeaders) {
  const auto good = encode_frame(MsgType::kAgentState, 0, Bytes{9, 9});
  auto bad = good;
  bad[0] = 'X';
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), Errc::kBadMagic);
  bad = good;
  bad[4] = 2;
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), Errc::kBadVersion);
  bad = good;
  bad[5] = 7;
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), Errc::kUnknownMsgType);
  bad = good;
  bad[5] = 0;
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), Errc::kUnknownMsgType);
  bad = good;
  bad[7] = 1;
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), Errc::kDecodeFailed);
  bad = good;
  bad.pop_back();
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), Errc::kTruncated);
  bad = good;
  bad.push_back(0);
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), Errc::kDecodeFailed);
  EXPECT_EQ(code_of([&] { decode_frame(Bytes(good.begin(), good.begin() + 5)); }), Errc::kTruncated);
}

TEST(Frame, EnforcesPayloadLimit) {
  const Bytes payload(101, 0);
  EXPECT_EQ(code_of([&] { encode_frame(MsgType::kAgentState, 0, payload, 100); }), Errc::kOversize);
  const auto f = encode_frame(MsgType::kAgentState, 0, payload);
  EXPECT_EQ(code_of([&] { decode_frame(f, 100); }), Errc::kOversize);
}

TEST(Frame, StreamReaderHandlesCleanEndAndTruncation) {
  const auto a = encode_frame(MsgType::kAgentState, 0, Bytes{1});
  const auto b = encode_frame(MsgType::kResult, 0, Bytes{2, 3});
  Bytes stream = a;
  stream.insert(stream.end(), b.begin(), b.end());
  std::size_t pos = 0;
  auto src = [&](std::span<std::uint8_t> out) {
    if (stream.size() - pos < out.size()) return false;
    std::copy_n(stream.begin() + static_cast<std::ptrdiff_t>(pos), out.size(), out.begin());
    pos += out.size();
    return true;
  };
  auto f1 = read_frame(src);
  auto f2 = read_frame(src);
  ASSERT_TRUE(f1 && f2);
  EXPECT_EQ(f1->payload, Bytes{1});
  EXPECT_EQ(f2->type, MsgType::kResult);
  EXPECT_FALSE(read_frame(src).has_value());

  stream = Bytes(b.begin(), b.end() - 1);
  pos = 0;
  EXPECT_EQ(code_of([&] { read_frame(src); }), Errc::kTruncated);
}

TEST(Codec, GoldenPrimitiveRules) {
  EXPECT_EQ(encode_string("hi"), (Bytes{0x00, 0x02, 'h', 'i'}));
  Writer w;
  w.u32(0x01020304);
  w.bytes(Bytes{0xaa});
  w.list(std::vector<std::uint8_t>{5, 6}, [](Writer& o, std::uint8_t v) { o.u8(v); });
  w.optional(std::optional<std::uint16_t>{}, [](Writer& o, std::uint16_t v) { o.u16(v); });
  w.optional(std::optional<std::uint16_t>{0x0102}, [](Writer& o, std::uint16_t v) { o.u16(v); });
  w.i64(-2);
  const Bytes expected{0x01, 0x02, 0x03, 0x04,                           // u32
                       0x00, 0x00, 0x00, 0x01, 0xaa,                     // bytes
                       0x00, 0x02, 0x05, 0x06,                           // list
                       0x00,                                             // absent
                       0x01, 0x01, 0x02,                                 // present
                       0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xfe};  // i64
  EXPECT_EQ(w.data(), expected);
}

TEST(Codec, F64IsBigEndianIeee) {
  Writer w;
  w.f64(1.0);
  EXPECT_EQ(w.data(), (Bytes{0x3f, 0xf0, 0, 0, 0, 0, 0, 0}));
  Reader r(w.data());
  EXPECT_EQ(r.f64(), 1.0);
}

TEST(Codec, RejectsTrailingBytesAndBadBooleans) {
  auto b = encode(ErrorPayload{"X", "y"});
  b.push_back(0);
  EXPECT_EQ(code_of([&] { decode_error(b); }), Errc::kDecodeFailed);
  Reader r(Bytes{2});
  EXPECT_EQ(code_of([&] { r.boolean(); }), Errc::kDecodeFailed);
  EXPECT_EQ(code_of([&] { encode_string(std::string(70000, 'x')); }), Errc::kFieldRange);
}

TEST(Codec, RoundTripsGeneratedAgentStates) {
  for (std::uint32_t seed = 0; seed < 300; ++seed) {
    Gen g(seed);
    const auto s = g.state();
    const auto enc = encode(s);
    EXPECT_EQ(decode_agent_state(enc), s) << "seed " << seed;
    EXPECT_EQ(encode(decode_agent_state(enc)), enc) << "seed " << seed;
  }
}

TEST(Codec, RoundTripsGeneratedBundlesAndPrograms) {
  for (std::uint32_t seed = 0; seed < 300; ++seed) {
    Gen g(seed);
    const auto b = g.bundle();
    EXPECT_EQ(decode_code_bundle(encode(b)), b) << "seed " << seed;
    const auto p = g.program();
    EXPECT_EQ(decode_task_program(encode(p)), p) << "seed " << seed;
  }
}

TEST(Codec, RoundTripsGeneratedControlMessages) {
  for (std::uint32_t seed = 0; seed < 300; ++seed) {
    Gen g(seed);
    ControlRequest q{g.u(0, UINT64_MAX),
                     static_cast<ControlVerb>(g.u(1, 6)),
                     g.str(),
                     static_cast<std::uint32_t>(g.u(0, 99999)),
                     static_cast<TimestampMs>(g.u(0, 1ull << 50)),
                     g.sig()};
    EXPECT_EQ(decode_control_request(encode(q)), q);
    ControlResponse r;
    r.request_id = g.u(0, UINT64_MAX);
    r.status = g.str(16);
    r.message = g.str(60);
    for (auto n = g.u(0, 4); n > 0; --n) r.agents.push_back(g.ma_info());
    if (g.coin()) r.load = g.load();
    EXPECT_EQ(decode_control_response(encode(r)), r);
    Announce a;
    a.host_id = g.str();
    a.address = g.str();
    a.listen_port = static_cast<std::uint16_t>(g.u(0, 65535));
    a.load = g.load();
    for (auto n = g.u(0, 3); n > 0; --n) {
      BundleDigest d{g.str(8), static_cast<std::uint32_t>(g.u(1, 9)), {}};
      for (auto& x : d.digest) x = static_cast<std::uint8_t>(g.u(0, 255));
      a.bundles.push_back(d);
    }
    std::sort(a.bundles.begin(), a.bundles.end(), [](const auto& x, const auto& y) { return x.name < y.name; });
    a.bundles.erase(
        std::unique(a.bundles.begin(), a.bundles.end(), [](const auto& x, const auto& y) { return x.name == y.name; }),
        a.bundles.end());
    for (auto n = g.u(0, 3); n > 0; --n) a.device_classes.push_back(g.str(6));
    std::sort(a.device_classes.begin(), a.device_classes.end());
    a.device_classes.erase(std::unique(a.device_classes.begin(), a.device_classes.end()), a.device_classes.end());
    a.sent_at = static_cast<TimestampMs>(g.u(0, 1ull << 50));
    EXPECT_EQ(decode_announce(encode(a)), a);
    ResultNotice n{g.str(), g.str(), g.class_id(), g.str(), g.str(80), std::nullopt};
    if (g.coin()) n.agent_state = encode(g.state());
    EXPECT_EQ(decode_result_notice(encode(n)), n);
  }
}

TEST(Codec, RoundTripsGeneratedEntryPayloads) {
  for (std::uint32_t seed = 0; seed < 300; ++seed) {
    Gen g(seed);
    ValuesPayload v;
    for (auto n = g.u(0, 5); n > 0; --n) v.samples.push_back({g.str(), g.query_value()});
    EXPECT_EQ(decode_values(encode(v)), v);
    RowsPayload rows{g.str(), static_cast<std::uint32_t>(g.u(0, 99)), {}};
    for (auto n = g.u(0, 4); n > 0; --n) {
      Row row{static_cast<std::uint32_t>(g.u(1, 99)), {}};
      for (auto c = g.u(0, 4); c > 0; --c) row.cells.push_back(g.value());
      rows.rows.push_back(row);
    }
    EXPECT_EQ(decode_rows(encode(rows)), rows);
    AlarmPayload alarm{g.str(), static_cast<ThresholdExpr>(g.u(1, 2)), static_cast<Comparator>(g.u(1, 6)), g.real(),
                       g.real()};
    EXPECT_EQ(decode_alarm(encode(alarm)), alarm);
    ErrorPayload err{g.str(), g.str(100)};
    EXPECT_EQ(decode_error(encode(err)), err);
  }
}

TEST(Codec, TruncationAnywhereIsDetected) {
  Gen g(7);
  const auto enc = encode(g.state());
  for (std::size_t n = 0; n < enc.size(); ++n) {
    EXPECT_THROW(decode_agent_state(std::span(enc.data(), n)), Error) << "prefix " << n;
  }
}

TEST(Codec, FrameRoundTripOfGeneratedStates) {
  for (std::uint32_t seed = 0; seed < 100; ++seed) {
    Gen g(seed);
    const auto s = g.state();
    const auto wire = pack(MsgType::kAgentState, encode(s), flags::kSigned);
    const auto f = decode_frame(wire);
    EXPECT_EQ(f.type, MsgType::kAgentState);
    EXPECT_EQ(decode_agent_state(unpack_payload(f)), s);
  }
}

TEST(Compress, InverseOnGeneratedPayloads) {
  for (std::uint32_t seed = 0; seed < 200; ++seed) {
    Gen g(seed);
    Bytes data;
    // Mix of incompressible noise and long repeats.
    for (auto parts = g.u(0, 6); parts > 0; --parts) {
      if (g.coin()) {
        auto b = g.bytes(300);
        data.insert(data.end(), b.begin(), b.end());
      } else {
        data.insert(data.end(), g.u(1, 2000), static_cast<std::uint8_t>(g.u(0, 255)));
      }
    }
    const auto c = compress(data);
    if (c.was_compressed) {
      EXPECT_LT(c.data.size(), data.size());
      EXPECT_EQ(decompress(c.data), data);
      EXPECT_EQ(raw_inflate(c.data), data);
    } else {
      EXPECT_EQ(c.data, data);
    }
  }
}

TEST(Compress, SkipsWhenNotBeneficial) {
  Gen g(1);
  Bytes noise(64);
  for (auto& x : noise) x = static_cast<std::uint8_t>(g.u(0, 255));
  const auto c = compress(noise);
  EXPECT_FALSE(c.was_compressed);
  EXPECT_EQ(c.data, noise);
  EXPECT_FALSE(compress(Bytes{}).was_compressed);
}

TEST(Compress, CorruptStreamsAreRejected) {
  const Bytes big(5000, 'q');
  auto c = compress(big).data;
  EXPECT_EQ(code_of([&] { decompress(Bytes(c.begin(), c.begin() + c.size() / 2)); }), Errc::kCorrupt);
  auto extra = c;
  extra.push_back(0);
  EXPECT_EQ(code_of([&] { decompress(extra); }), Errc::kCorrupt);
  EXPECT_EQ(code_of([&] { decompress(Bytes{0xff, 0xff, 0xff}); }), Errc::kCorrupt);
  EXPECT_EQ(code_of([&] { decompress(c, 100); }), Errc::kCorrupt);
}

TEST(Errc, NamesRoundTrip) {
  for (int i = 0; i <= static_cast<int>(Errc::kLost); ++i) {
    const auto e = static_cast<Errc>(i);
    EXPECT_EQ(errc_from_name(errc_name(e)), e);
  }
  EXPECT_EQ(errc_name(Errc::kVersionSuperseded), "VERSION_SUPERSEDED");
  EXPECT_EQ(errc_name(Errc::kAuthorizationViolation), "AUTHORIZATION_VIOLATION");
}
