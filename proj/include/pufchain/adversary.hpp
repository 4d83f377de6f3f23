#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pufchain/byzantine.hpp"
#include "pufchain/consortium.hpp"
#include "pufchain/supply_chain.hpp"
#include "pufchain/tracking.hpp"

namespace pufchain {

enum class AttackKind { ForgeInTransit, ForgePreCrd, BlameSupplier, ByzantineNode, MethodAbuse };
enum class MethodAbuseVariant {
  SkipRegisterItem,
  SkipShipItem,
  WrongRegisterParams,
  WrongShipParams,
  WrongVerifyParams,
};

std::string to_string(AttackKind a);
std::string to_string(MethodAbuseVariant v);
AttackKind parse_attack_kind(const std::string& name);
MethodAbuseVariant parse_method_abuse(const std::string& name);

struct AdversaryConfig {
  PartyId controlled_party{1};
  AttackKind attack = AttackKind::ForgeInTransit;
  ByzantineStrategy strategy = ByzantineStrategy::Equivocate;
  MethodAbuseVariant variant = MethodAbuseVariant::SkipRegisterItem;
  std::size_t n_puf = 1000;
  // ForgeInTransit: number of challenges the adversary queries on the genuine
  // device in order to build a clone; 0 tampers instead.
  std::size_t clone_queries = 0;
  // ForgePreCrd: tamper after registration instead of before enrolment.
  bool tamper_after_register = false;
  // false runs the same script with the deviation switched off.
  bool enabled = true;
};

// Setting shared by every attack run: a linear chain p0 -> ... -> p(N-1)
// carrying one item (several for ByzantineNode).
struct AttackScenario {
  std::size_t parties = 4;
  PufParams puf{8, 1e-5};
  std::size_t challenges = 10;
  std::size_t required = 9;
  DeliveryPolicy policy = DeliveryPolicy::UniformRandomDelay;
  std::size_t byzantine_items = 2;

  ContractConfig contract() const { return {challenges, required, parties}; }
};

// Throws ScenarioError when the controlled party cannot run the attack.
void validate(const AdversaryConfig& adv, const AttackScenario& scenario);

struct ExpectedOutcome {
  bool detected = false;
  std::optional<PartyId> attributed_to;
  std::set<TrackingKey> ledger_evidence;  // every record of the item
  bool safety_asserted = false;           // ByzantineNode only
};

// The system response the security analysis predicts for `adv`, for item
// p0:0 (and p0:k for the byzantine run's k-th item).
ExpectedOutcome expected_outcome(const AdversaryConfig& adv, const AttackScenario& scenario);

struct ConsensusSafety {
  std::size_t prefix_violations = 0;
  std::size_t invalid_signatures = 0;
  std::size_t write_once_violations = 0;

  bool ok() const {
    return prefix_violations == 0 && invalid_signatures == 0 && write_once_violations == 0;
  }
};

ConsensusSafety check_consensus_safety(const Consortium& net);

struct AttackReport {
  AdversaryConfig config;
  std::uint64_t seed = 0;
  ExpectedOutcome expected;
  bool detected = false;
  std::optional<PartyId> attributed_to;
  std::set<TrackingKey> evidence;
  std::optional<ConsensusSafety> safety;
  bool live = true;  // every transaction committed
  std::string note;

  bool evidence_matches() const { return evidence == expected.ledger_evidence; }
  bool expectation_met() const;
};

AttackReport run_attack(const AdversaryConfig& adv, const AttackScenario& scenario,
                        std::uint64_t seed);

// Ledger calls made on behalf of another party: a request whose signatures
// claim an honest submitter, and a record signed by the adversary whose key
// attributes it to an honest party.
struct ForgeryProbe {
  bool forged_request_committed = false;
  ApplyOutcome misattributed_outcome = ApplyOutcome::Applied;
  std::uint64_t rejected_at_nodes = 0;
};

ForgeryProbe run_forgery_probe(const AttackScenario& scenario, std::uint64_t seed);

}  // namespace pufchain

namespace pufchain {

// The adversary's entire capability set: its own identity, the network it
// reaches through its client, and the items it physically holds. Honest
// identities are never handed to it.
class AdversaryAgent {
 public:
  AdversaryAgent(PartyIdentity self, AdversaryConfig config)
      : self_(std::move(self)), config_(config) {}

  PartyId id() const { return self_.id(); }
  const PartyIdentity& identity() const { return self_; }
  const AdversaryConfig& config() const { return config_; }

 private:
  PartyIdentity self_;
  AdversaryConfig config_;
};

}  // namespace pufchain
