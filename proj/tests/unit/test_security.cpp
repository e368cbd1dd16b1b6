#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <sstream>

#include "mobagent/proto/messages.hpp"
#include "mobagent/runtime/agent.hpp"
#include "mobagent/security/crypto.hpp"
#include "mobagent/security/policy.hpp"
#include "support.hpp"

using namespace mobagent;
using namespace mobagent::testing;
using proto::SfOp;

namespace {

bool contains(const Bytes& hay, const Bytes& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

Bytes as_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

proto::AgentState sample_agent(bool encrypt = false) {
  runtime::AgentHeader h;
  h.agent_id = "cpuPoll:7";
  h.class_id = {"cpuPoll", 3};
  h.origin = "127.0.0.1:7700";
  h.created_at = 1'700'000'000'123;
  h.priority = 6;
  h.encrypt = encrypt;
  h.itinerary = {"127.0.0.1:7701", "127.0.0.1:7702", "127.0.0.1:7703"};
  return runtime::init_agent(h, manager_key());
}

}  // namespace

TEST(Crypto, SignaturesVerifyOnlyOverTheSignedBytes) {
  const auto msg = as_bytes("canonical bytes");
  const auto sig = security::sign(msg, manager_key());
  EXPECT_EQ(sig.signer_key_id, manager_key().key_id());
  EXPECT_TRUE(security::verify(msg, sig, manager_key().public_key()));
  EXPECT_FALSE(security::verify(msg, sig, stranger_key().public_key()));
  for (std::size_t i = 0; i < msg.size(); ++i) {
    auto m = msg;
    m[i] ^= 0x01;
    EXPECT_FALSE(security::verify(m, sig, manager_key().public_key())) << "byte " << i;
  }
  auto broken = sig;
  broken.signature[10] ^= 0x80;
  EXPECT_FALSE(security::verify(msg, broken, manager_key().public_key()));
}

TEST(Crypto, TrustStoreRejectsUnknownSigners) {
  const auto msg = as_bytes("x");
  EXPECT_TRUE(security::verify(msg, security::sign(msg, manager_key()), trust_manager()));
  EXPECT_FALSE(security::verify(msg, security::sign(msg, stranger_key()), trust_manager()));
}

TEST(Crypto, KeysSurvivePemRoundTrip) {
  TempDir dir;
  manager_key().save(dir.path(), "mgr");
  const auto k = security::KeyPair::load(dir / "mgr.pem");
  const auto pub = security::PublicKey::load(dir / "mgr.pub.pem");
  EXPECT_EQ(k.key_id(), manager_key().key_id());
  EXPECT_EQ(pub.key_id(), manager_key().key_id());
  const auto msg = as_bytes("pem");
  EXPECT_TRUE(security::verify(msg, security::sign(msg, k), pub));
}

TEST(Crypto, KeyIdIsSha256PrefixOfSpki) {
  // Independent route: DER from the PEM body, hashed here.
  const auto pem = manager_key().public_key().to_pem();
  std::string b64;
  std::istringstream in(pem);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("-----", 0) != 0) b64 += line;
  }
  static const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  Bytes der;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : b64) {
    if (c == '=') break;
    acc = (acc << 6) | static_cast<std::uint32_t>(alphabet.find(c));
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      der.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  const auto digest = security::sha256(der);
  EXPECT_TRUE(std::equal(digest.begin(), digest.begin() + 8, manager_key().key_id().begin()));
}

TEST(Crypto, Sha256MatchesKnownVector) {
  const auto d = security::sha256(as_bytes("abc"));
  EXPECT_EQ(to_hex(d.data(), d.size()), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Crypto, SealOpensOnlyWithTheRecipientKey) {
  const auto payload = as_bytes("ifInOctets=123456789;ifOutOctets=987654321");
  const auto sealed = security::seal(payload, manager_key().public_key());
  EXPECT_EQ(sealed.nonce.size(), 12u);
  EXPECT_EQ(security::open(sealed, manager_key()), payload);
  try {
    security::open(sealed, stranger_key());
    FAIL() << "opened with the wrong key";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kOpenFailed);
  }
}

TEST(Crypto, AnyTamperingOfASealedEntryFailsToOpen) {
  const auto sealed = security::seal(as_bytes("secret reading 4242"), manager_key().public_key());
  auto expect_fail = [&](const proto::SealedEntry& s, const char* what, std::size_t i) {
    try {
      security::open(s, manager_key());
      ADD_FAILURE() << what << " byte " << i << " tamper went unnoticed";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kOpenFailed);
    }
  };
  for (std::size_t i = 0; i < sealed.ciphertext.size(); ++i) {
    auto s = sealed;
    s.ciphertext[i] ^= 0x04;
    expect_fail(s, "ciphertext", i);
  }
  for (std::size_t i = 0; i < sealed.nonce.size(); ++i) {
    auto s = sealed;
    s.nonce[i] ^= 0x04;
    expect_fail(s, "nonce", i);
  }
  for (std::size_t i = 0; i < sealed.wrapped_key.size(); i += 17) {
    auto s = sealed;
    s.wrapped_key[i] ^= 0x04;
    expect_fail(s, "wrapped key", i);
  }
}

TEST(Crypto, SealRejectsOversizePayload) {
  try {
    security::seal(Bytes(101, 1), manager_key().public_key(), 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kOversize);
  }
}

TEST(Crypto, SealedFolderHasNoPlaintextBytes) {
  auto agent = sample_agent(true);
  proto::ValuesPayload v;
  v.samples.push_back({"1.3.6.1.2.1.1.5.0", std::string("core-router-PLAINTEXT-MARKER")});
  v.samples.push_back({"1.3.6.1.2.1.4.10.0", std::int64_t{0x0102030405060708}});
  const auto plain = proto::encode(v);
  const auto& pub = manager_key().public_key();
  ASSERT_TRUE(runtime::append_entry(agent, proto::EntryKind::kValues, plain, "h1", 5, &pub, 1 << 20));
  ASSERT_TRUE(runtime::append_entry(agent, proto::EntryKind::kValues, plain, "h2", 6, &pub, 1 << 20));
  const auto wire = proto::encode(agent);
  // Every 8-byte window of the plaintext must be absent from the serialized state.
  for (std::size_t i = 0; i + 8 <= plain.size(); ++i) {
    EXPECT_FALSE(contains(wire, Bytes(plain.begin() + i, plain.begin() + i + 8))) << "window " << i;
  }
  const auto back = proto::decode_agent_state(wire);
  for (const auto& e : back.data_folder) {
    ASSERT_TRUE(e.sealed.has_value());
    EXPECT_FALSE(e.payload.has_value());
    EXPECT_EQ(runtime::entry_payload(e, &manager_key()), plain);
    EXPECT_THROW(runtime::entry_payload(e, &stranger_key()), Error);
    EXPECT_THROW(runtime::entry_payload(e, nullptr), Error);
  }
}

TEST(Crypto, EncryptedAgentWithoutRecipientKeyIsAKeyError) {
  auto agent = sample_agent(true);
  try {
    runtime::append_entry(agent, proto::EntryKind::kValues, as_bytes("x"), "h1", 1, nullptr, 1 << 20);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kKeyError);
  }
}

TEST(Header, VerifiesWhenUntouched) {
  const auto a = sample_agent();
  EXPECT_TRUE(runtime::verify_header(a, trust_manager()));
  security::TrustStore strangers;
  strangers.add(stranger_key().public_key());
  EXPECT_FALSE(runtime::verify_header(a, strangers));
}

TEST(Header, EveryImmutableFieldIsCovered) {
  const auto base = sample_agent();
  std::vector<std::pair<const char*, std::function<void(proto::AgentState&)>>> edits = {
      {"agent_id", [](auto& a) { a.agent_id[0] ^= 1; }},
      {"class name", [](auto& a) { a.class_id.name.back() ^= 1; }},
      {"class version", [](auto& a) { a.class_id.version += 1; }},
      {"origin", [](auto& a) { a.origin = "127.0.0.1:7799"; }},
      {"created_at", [](auto& a) { a.created_at += 1; }},
      {"priority", [](auto& a) { a.priority = 10; }},
      {"encrypt", [](auto& a) { a.encrypt = !a.encrypt; }},
      {"itinerary order", [](auto& a) { std::swap(a.itinerary[0], a.itinerary[1]); }},
      {"itinerary drop", [](auto& a) { a.itinerary.pop_back(); }},
      {"itinerary add", [](auto& a) { a.itinerary.push_back("10.0.0.1:7701"); }},
  };
  for (const auto& [what, edit] : edits) {
    auto a = base;
    edit(a);
    EXPECT_FALSE(runtime::verify_header(a, trust_manager())) << what;
  }
  // Mutable state is outside the signature.
  auto a = base;
  a.cursor = 2;
  a.data_folder.push_back({"h1", 1, proto::EntryKind::kValues, Bytes{1, 2}, std::nullopt});
  EXPECT_TRUE(runtime::verify_header(a, trust_manager()));
}

TEST(Header, FlippingAnySerializedHeaderByteIsDetected) {
  const auto base = sample_agent();
  const auto header = proto::encode_agent_header(base);
  const auto wire = proto::encode(base);
  std::size_t detected = 0;
  for (std::size_t i = 0; i < wire.size(); ++i) {
    for (std::uint8_t mask : {0x01, 0x80}) {
      auto w = wire;
      w[i] ^= mask;
      proto::AgentState s;
      try {
        s = proto::decode_agent_state(w);
      } catch (const Error&) {
        ++detected;
        continue;
      }
      if (proto::encode_agent_header(s) != header) {
        EXPECT_FALSE(runtime::verify_header(s, trust_manager())) << "byte " << i;
        ++detected;
      }
    }
  }
  EXPECT_GT(detected, header.size());
}

TEST(Header, PostInitMutationIsRefused) {
  auto a = sample_agent();
  const auto before = a;
  const std::vector<std::pair<runtime::HeaderField, runtime::HeaderValue>> writes = {
      {runtime::HeaderField::kAgentId, std::string("evil:1")},
      {runtime::HeaderField::kClassId, proto::AgentClassId{"evil", 9}},
      {runtime::HeaderField::kOrigin, std::string("10.9.9.9:1")},
      {runtime::HeaderField::kCreatedAt, TimestampMs{1}},
      {runtime::HeaderField::kPriority, std::uint8_t{1}},
      {runtime::HeaderField::kEncrypt, true},
      {runtime::HeaderField::kItinerary, std::vector<std::string>{"x:1"}},
  };
  for (const auto& [field, value] : writes) {
    try {
      runtime::set_immutable(a, field, value);
      ADD_FAILURE() << "mutation accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kNotAuthorizedToInitialize);
    }
    EXPECT_EQ(a, before);
  }
}

TEST(Header, PreInitWritesAreAllowed) {
  proto::AgentState a;
  runtime::set_immutable(a, runtime::HeaderField::kAgentId, std::string("x:1"));
  runtime::set_immutable(a, runtime::HeaderField::kPriority, std::uint8_t{9});
  EXPECT_EQ(a.agent_id, "x:1");
  EXPECT_EQ(a.priority, 9);
  EXPECT_THROW(runtime::set_immutable(a, runtime::HeaderField::kPriority, std::uint8_t{11}), Error);
  EXPECT_FALSE(runtime::verify_header(a, trust_manager()));
}

TEST(Header, InitRejectsBadHeaders) {
  runtime::AgentHeader h;
  h.agent_id = "a:1";
  h.class_id = {"a", 1};
  h.itinerary = {};
  EXPECT_THROW(runtime::init_agent(h, manager_key()), Error);
  h.itinerary = {"x:1"};
  h.priority = 11;
  EXPECT_THROW(runtime::init_agent(h, manager_key()), Error);
}

TEST(Policy, AuthorizeNamesTheFailedRule) {
  proto::AuthPolicy scalar_only;
  scalar_only.allowed_ops = {SfOp::kGetScalar};
  scalar_only.max_oids_per_query = 2;
  EXPECT_NO_THROW(security::authorize(SfOp::kGetScalar, 2, scalar_only));
  try {
    security::authorize(SfOp::kGetTable, 1, scalar_only);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kAuthorizationViolation);
    EXPECT_EQ(e.detail(), security::kRuleOp);
  }
  try {
    security::authorize(SfOp::kGetScalar, 3, scalar_only);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kAuthorizationViolation);
    EXPECT_EQ(e.detail(), security::kRuleMaxOids);
  }
}

TEST(Policy, RestrictIntersectsAndTakesMinimumQuotas) {
  proto::AuthPolicy bundle;
  bundle.allowed_ops = {SfOp::kGetScalar, SfOp::kGetTable};
  bundle.max_oids_per_query = 10;
  bundle.max_exec_millis_per_host = 500;
  bundle.max_data_folder_bytes = 4096;
  bundle.trusted_signer_key_ids = {manager_key().key_id(), stranger_key().key_id()};
  std::sort(bundle.trusted_signer_key_ids.begin(), bundle.trusted_signer_key_ids.end());
  proto::AuthPolicy host;
  host.allowed_ops = {SfOp::kGetScalar};
  host.max_oids_per_query = 64;
  host.max_exec_millis_per_host = 100;
  host.max_data_folder_bytes = 1 << 20;
  host.trusted_signer_key_ids = {manager_key().key_id()};

  const auto p = security::restrict_policy(bundle, host);
  EXPECT_EQ(p.allowed_ops, std::vector<SfOp>{SfOp::kGetScalar});
  EXPECT_EQ(p.max_oids_per_query, 10u);
  EXPECT_EQ(p.max_exec_millis_per_host, 100u);
  EXPECT_EQ(p.max_data_folder_bytes, 4096u);
  EXPECT_EQ(p.trusted_signer_key_ids, std::vector<proto::KeyId>{manager_key().key_id()});
  EXPECT_TRUE(security::is_trusted_signer(p, manager_key().key_id()));
  EXPECT_FALSE(security::is_trusted_signer(p, stranger_key().key_id()));
  EXPECT_EQ(security::restrict_policy(host, bundle), p);
}
