#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>

#include "mobagent/common.hpp"
#include "mobagent/proto/messages.hpp"

struct evp_pkey_st;

namespace mobagent::security {

using proto::KeyId;
using proto::SealedEntry;
using proto::SignatureBlock;

class PublicKey {
 public:
  PublicKey() = default;

  static PublicKey from_pem(std::string_view pem);
  static PublicKey load(const std::string& path);

  std::string to_pem() const;
  // First 8 bytes of SHA-256 over the DER SubjectPublicKeyInfo.
  const KeyId& key_id() const { return key_id_; }
  bool valid() const { return key_ != nullptr; }
  evp_pkey_st* raw() const { return key_.get(); }

 private:
  friend class KeyPair;
  explicit PublicKey(std::shared_ptr<evp_pkey_st> key);

  std::shared_ptr<evp_pkey_st> key_;
  KeyId key_id_{};
};

// RSA-2048 key pair. Copies share the underlying immutable key material.
class KeyPair {
 public:
  static KeyPair generate(int bits = 2048);
  static KeyPair from_pem(std::string_view private_pem);
  static KeyPair load(const std::string& path);

  std::string private_pem() const;
  const PublicKey& public_key() const { return public_; }
  const KeyId& key_id() const { return public_.key_id(); }
  evp_pkey_st* raw() const { return key_.get(); }

  // Writes <dir>/<stem>.pem (private, mode 0600) and <dir>/<stem>.pub.pem.
  void save(const std::string& dir, const std::string& stem) const;

 private:
  explicit KeyPair(std::shared_ptr<evp_pkey_st> key);

  std::shared_ptr<evp_pkey_st> key_;
  PublicKey public_;
};

// Keys an agent server or manager accepts signatures from, by key id.
class TrustStore {
 public:
  void add(const PublicKey& key) { keys_[key.key_id()] = key; }
  const PublicKey* find(const KeyId& id) const;
  bool empty() const { return keys_.empty(); }
  std::size_t size() const { return keys_.size(); }
  std::vector<KeyId> ids() const {
    std::vector<KeyId> out;
    for (const auto& [id, _] : keys_) out.push_back(id);
    return out;
  }

 private:
  std::map<KeyId, PublicKey> keys_;
};

// RSASSA-PKCS1-v1_5 over SHA-256 of the given bytes.
SignatureBlock sign(std::span<const std::uint8_t> canonical_bytes, const KeyPair& key);
bool verify(std::span<const std::uint8_t> canonical_bytes, const SignatureBlock& block, const PublicKey& key);
// Looks the signer up by key id; false when the signer is unknown.
bool verify(std::span<const std::uint8_t> canonical_bytes, const SignatureBlock& block, const TrustStore& trusted);

// Hybrid envelope: random AES-256-GCM key wrapped with RSA-OAEP(SHA-256).
SealedEntry seal(std::span<const std::uint8_t> payload, const PublicKey& recipient,
                 std::size_t max_payload = proto::AuthPolicy::kDefaultMaxFolderBytes);
// Throws OPEN_FAILED on a wrong key or any tampering.
Bytes open(const SealedEntry& sealed, const KeyPair& recipient);

proto::Digest sha256(std::span<const std::uint8_t> bytes);
Bytes random_bytes(std::size_t n);

}  // namespace mobagent::security
