#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pufchain/consortium.hpp"
#include "pufchain/crypto.hpp"
#include "pufchain/ledger.hpp"
#include "pufchain/puf.hpp"
#include "pufchain/store.hpp"

namespace pufchain {

enum class Tag : std::uint8_t {
  Crd = 1,
  Shipped,
  NoShip,
  NoCrd,
  DeclareVerification,
  VerificationSucceeded,
  VerificationFailed,
};

std::string to_string(Tag tag);

// Store key of a tracking record. `parties` is empty for Crd and holds
// (supplier, buyer) for every other tag.
struct TrackingKey {
  Tag tag = Tag::Crd;
  std::vector<PartyId> parties;
  ItemId item;

  Bytes encode() const;
  friend auto operator<=>(const TrackingKey&, const TrackingKey&) = default;
};

TrackingKey decode_tracking_key(std::span<const std::uint8_t> bytes);  // throws DecodeError
std::string to_string(const TrackingKey& key);

TrackingKey crd_key(ItemId item);
TrackingKey edge_key(Tag tag, PartyId supplier, PartyId buyer, ItemId item);

// The party whose signature a record must carry.
PartyId responsible_party(const TrackingKey& key);

struct ContractConfig {
  std::size_t challenges = 10;  // C
  std::size_t required = 9;     // R
  std::size_t parties = 4;      // N

  // Throws std::invalid_argument unless 1 <= R <= C and N >= 2.
  void validate() const;
  // At least one byzantine node is tolerated (N >= 4).
  bool byzantine_tolerant() const { return max_faulty(parties) >= 1; }
};

// Record values.
Bytes encode_crd_value(PartyId producer, const ChallengeResponseData& crd);
std::pair<PartyId, ChallengeResponseData> decode_crd_value(std::span<const std::uint8_t> bytes);
Bytes encode_item_value(ItemId item);
Bytes encode_crv_value(const ChallengeResponseVector& crv);
ChallengeResponseVector decode_crv_value(std::span<const std::uint8_t> bytes);
Bytes encode_failure_value(const ChallengeResponseVector& expected,
                           const ChallengeResponseVector& measured);
std::pair<ChallengeResponseVector, ChallengeResponseVector> decode_failure_value(
    std::span<const std::uint8_t> bytes);

// Commit-time check run by every replica before a tracking record is stored:
// well-formed key and value, signer attribution, alert legitimacy against the
// committed state, declaration before outcome, one outcome per edge.
TransactionValidator make_tracking_validator(ContractConfig config);

// Renders tracking keys for ledger export; other keys as hex.
std::string render_key(const Bytes& key);

enum class Status { Ok, KeyExists, NoShip, NoCrd, NoDeclaration, DeclarationMismatch, Rejected };
std::string to_string(Status s);

struct VerificationRecord {
  PartyId supplier;
  PartyId verifier;
  ItemId item;
  ChallengeResponseVector expected;
  std::optional<ChallengeResponseVector> measured;  // failures only
  std::size_t match_count = 0;
  bool succeeded = false;
};

struct ChallengeResult {
  Status status = Status::Ok;
  ChallengeResponseVector crv;
};

struct VerifyResult {
  Status status = Status::Ok;
  std::optional<VerificationRecord> record;
};

// Outcome of verifying r matches against threshold R.
bool passes(std::size_t match_count, std::size_t required);

// Caller-side contract entry points. Each reads the committed state at the
// caller's own node, builds a record signed by the caller, submits it, and
// waits until every honest node has executed it.
class TrackingContract {
 public:
  TrackingContract(Consortium& net, ContractConfig config);

  const ContractConfig& config() const { return config_; }
  Consortium& network() { return net_; }

  Status register_item(const PartyIdentity& caller, const ChallengeResponseData& crd);
  Status ship_item(const PartyIdentity& supplier, PartyId buyer, ItemId item);
  ChallengeResult get_challenges(const PartyIdentity& buyer, PartyId supplier, ItemId item);
  VerifyResult verify_item(const PartyIdentity& buyer, PartyId supplier, ItemId item,
                           const ChallengeResponseVector& expected,
                           const ChallengeResponseVector& measured);

  // Low-level: submit an arbitrary record signed by `caller`.
  Status write(const PartyIdentity& caller, const TrackingKey& key, Bytes value);

  std::optional<Bytes> get(PartyId reader, const TrackingKey& key) const;
  bool contains(PartyId reader, const TrackingKey& key) const { return get(reader, key).has_value(); }

 private:
  const WriteOnceStore& local_store(PartyId reader) const;

  Consortium& net_;
  ContractConfig config_;
};

// Tracking keys for `item` in commit order.
std::vector<TrackingKey> records_for(const WriteOnceStore& store, ItemId item);

}  // namespace pufchain
