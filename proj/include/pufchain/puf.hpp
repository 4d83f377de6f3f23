#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pufchain/bytes.hpp"
#include "pufchain/crypto.hpp"
#include "pufchain/random.hpp"

namespace pufchain {

// Producer-scoped identifier: the producer's id joined with its local counter.
struct ItemId {
  PartyId producer;
  std::uint64_t counter = 0;

  friend auto operator<=>(const ItemId&, const ItemId&) = default;
};

std::string to_string(const ItemId& item);
void encode(ByteWriter& w, const ItemId& item);
ItemId decode_item_id(ByteReader& r);

struct PufParams {
  unsigned width = 8;         // response bits W
  double noise_rate = 0.002;  // per-bit flip probability at query time

  void validate() const;
};

struct ChallengeResponsePair {
  std::uint64_t challenge = 0;
  std::uint64_t response = 0;

  friend bool operator==(const ChallengeResponsePair&, const ChallengeResponsePair&) = default;
};

struct ChallengeResponseVector {
  std::vector<ChallengeResponsePair> pairs;

  std::size_t size() const { return pairs.size(); }
  friend bool operator==(const ChallengeResponseVector&,
                         const ChallengeResponseVector&) = default;
};

void encode(ByteWriter& w, const ChallengeResponseVector& crv);
ChallengeResponseVector decode_crv(ByteReader& r);

// Enrolled CRD of one item: subsets[w] is sealed for party w and holds
// exactly C pairs; all C*N challenges are distinct.
struct ChallengeResponseData {
  ItemId item;
  std::vector<Sealed> subsets;

  friend bool operator==(const ChallengeResponseData&, const ChallengeResponseData&) = default;
};

void encode(ByteWriter& w, const ChallengeResponseData& crd);
ChallengeResponseData decode_crd(ByteReader& r);

class PufDevice;
PufDevice tamper(const PufDevice& device, Rng& rng);
std::optional<PufDevice> clone(std::span<const ChallengeResponsePair> observed,
                               std::size_t threshold, const PufParams& params, Rng& rng);

// A simulated physical function. The ideal response is a seeded
// pseudo-random map of the challenge; each query flips every response bit
// independently with probability noise_rate, drawing from the device's own
// stream.
class PufDevice {
 public:
  PufDevice(std::uint64_t device_seed, PufParams params, std::uint64_t noise_seed);

  std::uint64_t ideal_response(std::uint64_t challenge) const;
  std::uint64_t query(std::uint64_t challenge);

  std::uint64_t device_seed() const { return device_seed_; }
  bool tampered() const { return tamper_seed_.has_value(); }
  std::optional<std::uint64_t> tamper_seed() const { return tamper_seed_; }
  bool is_clone() const { return replay_ != nullptr; }
  const PufParams& params() const { return params_; }
  std::uint64_t response_mask() const;

 private:
  std::uint64_t function_seed() const { return tamper_seed_.value_or(device_seed_); }

  std::uint64_t device_seed_;
  std::optional<std::uint64_t> tamper_seed_;
  PufParams params_;
  Rng noise_;
  std::shared_ptr<const std::map<std::uint64_t, std::uint64_t>> replay_;

  friend PufDevice tamper(const PufDevice& device, Rng& rng);
  friend std::optional<PufDevice> clone(std::span<const ChallengeResponsePair> observed,
                                        std::size_t threshold, const PufParams& params,
                                        Rng& rng);
};

// Fresh device from the scenario stream.
PufDevice make_device(const PufParams& params, Rng& rng);

inline constexpr int kEnrolmentRepeats = 9;

// Majority vote per bit over kEnrolmentRepeats queries.
std::uint64_t stable_response(PufDevice& device, std::uint64_t challenge);

// Draws parties*per_party distinct challenges, measures them, and seals
// subset w for party w.
ChallengeResponseData enroll(PufDevice& device, ItemId item, const Pki& pki,
                             std::size_t parties, std::size_t per_party, Rng& rng);

ChallengeResponseVector open_subset(const ChallengeResponseData& crd,
                                    const PartyIdentity& holder);

// Queries the device once per challenge of `expected`.
ChallengeResponseVector measure(PufDevice& device, const ChallengeResponseVector& expected);

class ChallengeMismatch : public std::invalid_argument {
 public:
  ChallengeMismatch() : std::invalid_argument("challenge sequences differ") {}
};

std::size_t match_count(const ChallengeResponseVector& expected,
                        const ChallengeResponseVector& measured);

}  // namespace pufchain
