#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pufchain/bytes.hpp"

namespace pufchain {

// Index of a supply-chain party in [0, N-1]. Node n_i of the consortium
// runs at party p_i, so the same type names both.
struct PartyId {
  std::uint32_t index = 0;

  friend auto operator<=>(const PartyId&, const PartyId&) = default;
};

using NodeId = PartyId;

std::string to_string(PartyId p);

using Signature = std::array<std::uint8_t, 32>;

class OpenDenied : public std::runtime_error {
 public:
  OpenDenied() : std::runtime_error("sealed message cannot be opened with this key pair") {}
};

class UnknownParty : public std::out_of_range {
 public:
  explicit UnknownParty(PartyId p) : std::out_of_range("party not in PKI: " + to_string(p)) {}
};

struct PublicKey {
  Digest fingerprint{};

  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

Digest digest(std::span<const std::uint8_t> data);

class KeyPair {
 public:
  const PublicKey& public_key() const { return public_; }

 private:
  explicit KeyPair(const Digest& secret);

  Digest signing_key() const;
  Digest sealing_key() const;

  Digest secret_{};
  PublicKey public_;

  friend KeyPair generate_keypair(std::uint64_t seed);
  friend class PartyIdentity;
  friend class Pki;
};

// Deterministic for a fixed seed; distinct seeds give distinct keys.
KeyPair generate_keypair(std::uint64_t seed);

template <class M>
struct Signed {
  M payload;
  PartyId signer;
  Signature signature{};
};

struct Sealed {
  PartyId recipient;
  Bytes ciphertext;

  friend bool operator==(const Sealed&, const Sealed&) = default;
};

// A party's private context: the only place its secret key lives.
class PartyIdentity {
 public:
  PartyIdentity(PartyId id, KeyPair keys) : id_(id), keys_(std::move(keys)) {}

  PartyId id() const { return id_; }
  const PublicKey& public_key() const { return keys_.public_key(); }

  Signature sign_bytes(std::span<const std::uint8_t> message) const;

  // Throws OpenDenied unless this identity is the recipient.
  Bytes open(const Sealed& sealed) const;

 private:
  PartyId id_;
  KeyPair keys_;
};

Signed<Bytes> sign(Bytes message, const PartyIdentity& signer);

// In-process PKI registry, populated once at scenario setup.
//
// Cryptography is simulated with symmetric primitives: a signature is a keyed
// BLAKE2b tag and sealing is XChaCha20-Poly1305 under a per-party key. The
// registry therefore holds derived per-party keys and acts as the trusted
// verifier; it exposes verification and sealing only, never key material.
class Pki {
 public:
  Pki() = default;
  explicit Pki(const std::vector<std::pair<PartyId, KeyPair>>& members);

  std::size_t size() const { return entries_.size(); }
  bool contains(PartyId p) const { return entries_.count(p) != 0; }
  const PublicKey& public_key(PartyId p) const;

  bool verify(std::span<const std::uint8_t> payload, PartyId signer,
              const Signature& signature) const;
  bool verify(const Signed<Bytes>& message) const {
    return verify(message.payload, message.signer, message.signature);
  }

  // Throws UnknownParty if the recipient is not registered.
  Sealed seal(std::span<const std::uint8_t> message, PartyId recipient) const;

 private:
  struct Entry {
    PublicKey public_key;
    Digest signing_key{};
    Digest sealing_key{};
  };

  std::map<PartyId, Entry> entries_;
};

// Builds identities for parties 0..n-1 with keys derived from a master seed,
// together with the matching registry.
struct PkiSetup {
  Pki pki;
  std::vector<PartyIdentity> identities;
};

PkiSetup make_pki(std::size_t parties, std::uint64_t master_seed);

}  // namespace pufchain
