#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>

#include "pufchain/consensus.hpp"
#include "pufchain/consortium.hpp"
#include "pufchain/random.hpp"

namespace pufchain {

enum class ByzantineStrategy { Silent, Equivocate, DelaySelective, CorruptPayload };

std::string to_string(ByzantineStrategy s);
ByzantineStrategy parse_byzantine_strategy(const std::string& name);
inline constexpr ByzantineStrategy kAllStrategies[] = {
    ByzantineStrategy::Silent, ByzantineStrategy::Equivocate, ByzantineStrategy::DelaySelective,
    ByzantineStrategy::CorruptPayload};

struct ByzantineCounters {
  std::uint64_t dropped = 0;
  std::uint64_t equivocated = 0;
  std::uint64_t delayed = 0;
  std::uint64_t corrupted = 0;
  std::uint64_t forged = 0;
  std::uint64_t replayed = 0;
};

// A node that runs the honest state machine internally and rewrites what it
// sends. It holds only its own identity: every message it emits is either
// signed with its own key or carries a signature it cannot produce.
class ByzantineNode : public ConsensusNode {
 public:
  ByzantineNode(ByzantineStrategy strategy, PartyIdentity identity, const Pki& pki,
                std::size_t nodes, ReplicaConfig config, std::uint64_t seed);

  NodeId id() const override { return identity_.id(); }
  bool honest() const override { return false; }
  void on_message(const NetworkMessage& m, Time now, Outbox& out) override;
  void on_timer(const TimerRequest& t, Time now, Outbox& out) override;
  std::vector<NetworkMessage> client_broadcast(const Transaction& txn) override;
  const Replica& state() const override { return inner_; }

  ByzantineStrategy strategy() const { return strategy_; }
  const ByzantineCounters& counters() const { return counters_; }

 private:
  void rewrite(Outbox& produced, Outbox& out);
  void equivocate(const NetworkMessage& m, Outbox& out);
  void corrupt(const NetworkMessage& m, Outbox& out);
  Transaction own_transaction(const std::string& tag);
  Transaction forged_transaction(NodeId victim);
  NetworkMessage resign(const NetworkMessage& m, Bytes body);

  ByzantineStrategy strategy_;
  PartyIdentity identity_;
  Replica inner_;
  std::size_t n_;
  Rng rng_;
  std::set<NodeId> victims_;
  std::uint64_t forge_counter_ = 0;
  ByzantineCounters counters_;
};

// Factory for Consortium overrides; `seed` drives the strategy's own choices.
NodeFactory byzantine_factory(ByzantineStrategy strategy, std::uint64_t seed);

}  // namespace pufchain
