#include "pufchain/crypto.hpp"

#include <sodium.h>

#include <cstring>

#include "pufchain/random.hpp"

namespace pufchain {
namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

Digest keyed_hash(const Digest& key, std::span<const std::uint8_t> data) {
  ensure_sodium();
  Digest out{};
  crypto_generichash(out.data(), out.size(), data.data(), data.size(), key.data(), key.size());
  return out;
}

Digest derive(const Digest& secret, std::string_view label) {
  return keyed_hash(secret, std::span(reinterpret_cast<const std::uint8_t*>(label.data()),
                                      label.size()));
}

std::array<std::uint8_t, 4> recipient_ad(PartyId p) {
  return {static_cast<std::uint8_t>(p.index), static_cast<std::uint8_t>(p.index >> 8),
          static_cast<std::uint8_t>(p.index >> 16), static_cast<std::uint8_t>(p.index >> 24)};
}

constexpr std::size_t kNonceBytes = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
constexpr std::size_t kTagBytes = crypto_aead_xchacha20poly1305_ietf_ABYTES;

}  // namespace

std::string to_string(PartyId p) { return "p" + std::to_string(p.index); }

Digest digest(std::span<const std::uint8_t> data) {
  ensure_sodium();
  Digest out{};
  crypto_generichash(out.data(), out.size(), data.data(), data.size(), nullptr, 0);
  return out;
}

KeyPair::KeyPair(const Digest& secret) : secret_(secret) {
  public_.fingerprint = derive(secret_, "public");
}

Digest KeyPair::signing_key() const { return derive(secret_, "sign"); }
Digest KeyPair::sealing_key() const { return derive(secret_, "seal"); }

KeyPair generate_keypair(std::uint64_t seed) {
  ByteWriter w;
  w.str("pufchain-keypair").u64(seed);
  return KeyPair(digest(w.view()));
}

Signature PartyIdentity::sign_bytes(std::span<const std::uint8_t> message) const {
  return keyed_hash(keys_.signing_key(), message);
}

Bytes PartyIdentity::open(const Sealed& sealed) const {
  ensure_sodium();
  const auto& c = sealed.ciphertext;
  if (c.size() < kNonceBytes + kTagBytes) throw OpenDenied();
  const auto key = keys_.sealing_key();
  const auto ad = recipient_ad(sealed.recipient);
  Bytes plain(c.size() - kNonceBytes - kTagBytes);
  unsigned long long plain_len = 0;
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(plain.data(), &plain_len, nullptr,
                                                 c.data() + kNonceBytes, c.size() - kNonceBytes,
                                                 ad.data(), ad.size(), c.data(),
                                                 key.data()) != 0) {
    throw OpenDenied();
  }
  plain.resize(plain_len);
  return plain;
}

Signed<Bytes> sign(Bytes message, const PartyIdentity& signer) {
  Signed<Bytes> out;
  out.signature = signer.sign_bytes(message);
  out.payload = std::move(message);
  out.signer = signer.id();
  return out;
}

Pki::Pki(const std::vector<std::pair<PartyId, KeyPair>>& members) {
  for (const auto& [id, kp] : members) {
    entries_[id] = Entry{kp.public_key(), kp.signing_key(), kp.sealing_key()};
  }
}

const PublicKey& Pki::public_key(PartyId p) const {
  auto it = entries_.find(p);
  if (it == entries_.end()) throw UnknownParty(p);
  return it->second.public_key;
}

bool Pki::verify(std::span<const std::uint8_t> payload, PartyId signer,
                 const Signature& signature) const {
  auto it = entries_.find(signer);
  if (it == entries_.end()) return false;
  const auto expected = keyed_hash(it->second.signing_key, payload);
  return sodium_memcmp(expected.data(), signature.data(), expected.size()) == 0;
}

Sealed Pki::seal(std::span<const std::uint8_t> message, PartyId recipient) const {
  auto it = entries_.find(recipient);
  if (it == entries_.end()) throw UnknownParty(recipient);
  const auto& key = it->second.sealing_key;
  // Deterministic nonce derived from the plaintext keeps scenario output
  // reproducible; equal plaintexts for one recipient seal identically.
  const auto nonce_src = keyed_hash(key, message);
  const auto ad = recipient_ad(recipient);

  Sealed out{recipient, Bytes(kNonceBytes + message.size() + kTagBytes)};
  std::memcpy(out.ciphertext.data(), nonce_src.data(), kNonceBytes);
  unsigned long long c_len = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(out.ciphertext.data() + kNonceBytes, &c_len,
                                             message.data(), message.size(), ad.data(),
                                             ad.size(), nullptr, out.ciphertext.data(),
                                             key.data());
  out.ciphertext.resize(kNonceBytes + c_len);
  return out;
}

PkiSetup make_pki(std::size_t parties, std::uint64_t master_seed) {
  std::vector<std::pair<PartyId, KeyPair>> members;
  std::vector<PartyIdentity> identities;
  for (std::size_t i = 0; i < parties; ++i) {
    const PartyId id{static_cast<std::uint32_t>(i)};
    auto kp = generate_keypair(mix_seed(master_seed, 0x6b657973ULL + i));
    members.emplace_back(id, kp);
    identities.emplace_back(id, kp);
  }
  return PkiSetup{Pki(members), std::move(identities)};
}

}  // namespace pufchain
