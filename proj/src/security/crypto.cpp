#include "mobagent/security/crypto.hpp"

#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>
#include <sys/stat.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mobagent::security {

namespace {

constexpr std::size_t kSymmetricKeyBytes = 32;
constexpr std::size_t kNonceBytes = 12;
constexpr std::size_t kTagBytes = 16;

[[noreturn]] void fail(Errc code, const std::string& what) {
  const auto err = ERR_get_error();
  std::string msg = what;
  if (err != 0) {
    char buf[256];
    ERR_error_string_n(err, buf, sizeof(buf));
    msg += " (" + std::string(buf) + ")";
  }
  ERR_clear_error();
  throw Error(code, msg);
}

std::shared_ptr<EVP_PKEY> wrap(EVP_PKEY* k) { return {k, EVP_PKEY_free}; }

struct BioDeleter {
  void operator()(BIO* b) const { BIO_free(b); }
};
using BioPtr = std::unique_ptr<BIO, BioDeleter>;

struct CtxDeleter {
  void operator()(EVP_PKEY_CTX* c) const { EVP_PKEY_CTX_free(c); }
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};

std::string bio_to_string(BIO* bio) {
  char* data = nullptr;
  const long len = BIO_get_mem_data(bio, &data);
  return std::string(data, static_cast<std::size_t>(len));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kKeyError, "cannot read key file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

KeyId compute_key_id(EVP_PKEY* key) {
  unsigned char* der = nullptr;
  const int len = i2d_PUBKEY(key, &der);
  if (len <= 0) fail(Errc::kKeyError, "cannot encode public key");
  const auto digest = sha256({der, static_cast<std::size_t>(len)});
  OPENSSL_free(der);
  KeyId id{};
  std::copy_n(digest.begin(), id.size(), id.begin());
  return id;
}

}  // namespace

PublicKey::PublicKey(std::shared_ptr<evp_pkey_st> key) : key_(std::move(key)) {
  key_id_ = compute_key_id(key_.get());
}

PublicKey PublicKey::from_pem(std::string_view pem) {
  BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  EVP_PKEY* k = PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr);
  if (k == nullptr) fail(Errc::kKeyError, "invalid PEM public key");
  return PublicKey(wrap(k));
}

PublicKey PublicKey::load(const std::string& path) { return from_pem(read_file(path)); }

std::string PublicKey::to_pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (PEM_write_bio_PUBKEY(bio.get(), key_.get()) != 1) fail(Errc::kKeyError, "cannot write public key");
  return bio_to_string(bio.get());
}

KeyPair::KeyPair(std::shared_ptr<evp_pkey_st> key) : key_(std::move(key)) {
  // Derive a public-only object so that PublicKey never carries private material.
  unsigned char* der = nullptr;
  const int len = i2d_PUBKEY(key_.get(), &der);
  if (len <= 0) fail(Errc::kKeyError, "cannot extract public key");
  const unsigned char* p = der;
  EVP_PKEY* pub = d2i_PUBKEY(nullptr, &p, len);
  OPENSSL_free(der);
  if (pub == nullptr) fail(Errc::kKeyError, "cannot extract public key");
  public_ = PublicKey(wrap(pub));
}

KeyPair KeyPair::generate(int bits) {
  std::unique_ptr<EVP_PKEY_CTX, CtxDeleter> ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_RSA, nullptr));
  if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0 ||
      EVP_PKEY_CTX_set_rsa_keygen_bits(ctx.get(), bits) <= 0) {
    fail(Errc::kKeyError, "RSA keygen setup failed");
  }
  EVP_PKEY* k = nullptr;
  if (EVP_PKEY_keygen(ctx.get(), &k) <= 0) fail(Errc::kKeyError, "RSA keygen failed");
  return KeyPair(wrap(k));
}

KeyPair KeyPair::from_pem(std::string_view pem) {
  BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  EVP_PKEY* k = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
  if (k == nullptr) fail(Errc::kKeyError, "invalid PEM private key");
  if (EVP_PKEY_base_id(k) != EVP_PKEY_RSA) {
    EVP_PKEY_free(k);
    throw Error(Errc::kKeyError, "key is not RSA");
  }
  return KeyPair(wrap(k));
}

KeyPair KeyPair::load(const std::string& path) { return from_pem(read_file(path)); }

std::string KeyPair::private_pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (PEM_write_bio_PrivateKey(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1) {
    fail(Errc::kKeyError, "cannot write private key");
  }
  return bio_to_string(bio.get());
}

void KeyPair::save(const std::string& dir, const std::string& stem) const {
  std::filesystem::create_directories(dir);
  const auto priv_path = std::filesystem::path(dir) / (stem + ".pem");
  const auto pub_path = std::filesystem::path(dir) / (stem + ".pub.pem");
  {
    std::ofstream out(priv_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kIoError, "cannot write " + priv_path.string());
    out << private_pem();
  }
  ::chmod(priv_path.c_str(), 0600);
  std::ofstream out(pub_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + pub_path.string());
  out << public_.to_pem();
}

const PublicKey* TrustStore::find(const KeyId& id) const {
  auto it = keys_.find(id);
  return it == keys_.end() ? nullptr : &it->second;
}

SignatureBlock sign(std::span<const std::uint8_t> canonical_bytes, const KeyPair& key) {
  std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx(EVP_MD_CTX_new());
  EVP_PKEY_CTX* pctx = nullptr;
  if (!ctx || EVP_DigestSignInit(ctx.get(), &pctx, EVP_sha256(), nullptr, key.raw()) != 1 ||
      EVP_PKEY_CTX_set_rsa_padding(pctx, RSA_PKCS1_PADDING) <= 0) {
    fail(Errc::kKeyError, "sign init failed");
  }
  std::size_t len = 0;
  if (EVP_DigestSign(ctx.get(), nullptr, &len, canonical_bytes.data(), canonical_bytes.size()) != 1) {
    fail(Errc::kKeyError, "sign failed");
  }
  SignatureBlock block;
  block.signer_key_id = key.key_id();
  block.signature.resize(len);
  if (EVP_DigestSign(ctx.get(), block.signature.data(), &len, canonical_bytes.data(), canonical_bytes.size()) != 1) {
    fail(Errc::kKeyError, "sign failed");
  }
  block.signature.resize(len);
  return block;
}

bool verify(std::span<const std::uint8_t> canonical_bytes, const SignatureBlock& block, const PublicKey& key) {
  if (!key.valid() || block.signer_key_id != key.key_id() || block.signature.empty()) return false;
  std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx(EVP_MD_CTX_new());
  EVP_PKEY_CTX* pctx = nullptr;
  if (!ctx || EVP_DigestVerifyInit(ctx.get(), &pctx, EVP_sha256(), nullptr, key.raw()) != 1 ||
      EVP_PKEY_CTX_set_rsa_padding(pctx, RSA_PKCS1_PADDING) <= 0) {
    ERR_clear_error();
    return false;
  }
  const int rc = EVP_DigestVerify(ctx.get(), block.signature.data(), block.signature.size(),
                                  canonical_bytes.data(), canonical_bytes.size());
  ERR_clear_error();
  return rc == 1;
}

bool verify(std::span<const std::uint8_t> canonical_bytes, const SignatureBlock& block, const TrustStore& trusted) {
  const auto* key = trusted.find(block.signer_key_id);
  return key != nullptr && verify(canonical_bytes, block, *key);
}

SealedEntry seal(std::span<const std::uint8_t> payload, const PublicKey& recipient, std::size_t max_payload) {
  if (payload.size() > max_payload) {
    throw Error(Errc::kOversize, "sealed payload of " + std::to_string(payload.size()) + " bytes exceeds " +
                                     std::to_string(max_payload));
  }
  const Bytes key = random_bytes(kSymmetricKeyBytes);
  SealedEntry out;
  out.nonce = random_bytes(kNonceBytes);

  std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter> c(EVP_CIPHER_CTX_new());
  int len = 0;
  out.ciphertext.resize(payload.size() + kTagBytes);
  if (!c || EVP_EncryptInit_ex(c.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_GCM_SET_IVLEN, kNonceBytes, nullptr) != 1 ||
      EVP_EncryptInit_ex(c.get(), nullptr, nullptr, key.data(), out.nonce.data()) != 1 ||
      EVP_EncryptUpdate(c.get(), out.ciphertext.data(), &len, payload.data(), static_cast<int>(payload.size())) != 1) {
    fail(Errc::kKeyError, "AES-GCM encrypt failed");
  }
  int tail = 0;
  if (EVP_EncryptFinal_ex(c.get(), out.ciphertext.data() + len, &tail) != 1 ||
      EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_GCM_GET_TAG, kTagBytes, out.ciphertext.data() + payload.size()) != 1) {
    fail(Errc::kKeyError, "AES-GCM finalize failed");
  }

  std::unique_ptr<EVP_PKEY_CTX, CtxDeleter> pk(EVP_PKEY_CTX_new(recipient.raw(), nullptr));
  std::size_t wrapped_len = 0;
  if (!pk || EVP_PKEY_encrypt_init(pk.get()) <= 0 ||
      EVP_PKEY_CTX_set_rsa_padding(pk.get(), RSA_PKCS1_OAEP_PADDING) <= 0 ||
      EVP_PKEY_CTX_set_rsa_oaep_md(pk.get(), EVP_sha256()) <= 0 ||
      EVP_PKEY_encrypt(pk.get(), nullptr, &wrapped_len, key.data(), key.size()) <= 0) {
    fail(Errc::kKeyError, "RSA-OAEP setup failed");
  }
  out.wrapped_key.resize(wrapped_len);
  if (EVP_PKEY_encrypt(pk.get(), out.wrapped_key.data(), &wrapped_len, key.data(), key.size()) <= 0) {
    fail(Errc::kKeyError, "RSA-OAEP wrap failed");
  }
  out.wrapped_key.resize(wrapped_len);
  return out;
}

Bytes open(const SealedEntry& sealed, const KeyPair& recipient) {
  if (sealed.nonce.size() != kNonceBytes || sealed.ciphertext.size() < kTagBytes) {
    throw Error(Errc::kOpenFailed, "malformed sealed entry");
  }
  std::unique_ptr<EVP_PKEY_CTX, CtxDeleter> pk(EVP_PKEY_CTX_new(recipient.raw(), nullptr));
  Bytes key(512);
  std::size_t key_len = key.size();
  if (!pk || EVP_PKEY_decrypt_init(pk.get()) <= 0 ||
      EVP_PKEY_CTX_set_rsa_padding(pk.get(), RSA_PKCS1_OAEP_PADDING) <= 0 ||
      EVP_PKEY_CTX_set_rsa_oaep_md(pk.get(), EVP_sha256()) <= 0 ||
      EVP_PKEY_decrypt(pk.get(), key.data(), &key_len, sealed.wrapped_key.data(), sealed.wrapped_key.size()) <= 0 ||
      key_len != kSymmetricKeyBytes) {
    ERR_clear_error();
    throw Error(Errc::kOpenFailed, "cannot unwrap content key");
  }

  const std::size_t body = sealed.ciphertext.size() - kTagBytes;
  Bytes plain(body);
  Bytes tag(sealed.ciphertext.end() - kTagBytes, sealed.ciphertext.end());
  std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter> c(EVP_CIPHER_CTX_new());
  int len = 0;
  int tail = 0;
  const bool ok = c && EVP_DecryptInit_ex(c.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
                  EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_GCM_SET_IVLEN, kNonceBytes, nullptr) == 1 &&
                  EVP_DecryptInit_ex(c.get(), nullptr, nullptr, key.data(), sealed.nonce.data()) == 1 &&
                  EVP_DecryptUpdate(c.get(), plain.data(), &len, sealed.ciphertext.data(), static_cast<int>(body)) == 1 &&
                  EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_GCM_SET_TAG, kTagBytes, tag.data()) == 1 &&
                  EVP_DecryptFinal_ex(c.get(), plain.data() + len, &tail) == 1;
  OPENSSL_cleanse(key.data(), key.size());
  ERR_clear_error();
  if (!ok) throw Error(Errc::kOpenFailed, "authentication tag mismatch");
  return plain;
}

proto::Digest sha256(std::span<const std::uint8_t> bytes) {
  proto::Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(), nullptr) != 1) {
    fail(Errc::kKeyError, "sha256 failed");
  }
  return d;
}

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1) fail(Errc::kKeyError, "RAND_bytes failed");
  return out;
}

}  // namespace mobagent::security
