#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "pufchain/consensus.hpp"
#include "pufchain/crypto.hpp"
#include "pufchain/ledger.hpp"
#include "pufchain/random.hpp"

namespace pufchain {

enum class DeliveryPolicy { Fifo, UniformRandomDelay, AdversarialReorder };

std::string to_string(DeliveryPolicy p);
DeliveryPolicy parse_delivery_policy(const std::string& name);

struct NetworkOptions {
  DeliveryPolicy policy = DeliveryPolicy::Fifo;
  std::uint64_t seed = 0;
  Time max_delay = 10;     // upper bound of the ordinary delay band
  Time base_timeout = 0;   // 0 picks a default from the policy
  std::uint64_t max_events = 5'000'000;  // per await() call
};

struct SimEvent {
  enum class Kind { Deliver, Timer } kind = Kind::Deliver;
  Time time = 0;
  NodeId from;
  NodeId to;
};

class LivenessFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Builds a non-default node (e.g. a byzantine one) for a given identity.
using NodeFactory = std::function<std::unique_ptr<ConsensusNode>(
    PartyIdentity identity, const Pki& pki, std::size_t nodes, ReplicaConfig config)>;

// Discrete-event simulation of the consortium: N nodes exchanging signed
// messages over an asynchronous network. Single-threaded and deterministic
// for a fixed (seed, policy). Messages are delayed and reordered by policy
// but always delivered.
class Consortium {
 public:
  Consortium(const Pki& pki, std::vector<PartyIdentity> node_identities, NetworkOptions options,
             TransactionValidator validator = {},
             std::map<NodeId, NodeFactory> overrides = {});

  // Broadcasts from the submitter's client to every node. Throws
  // RejectedSignature when the transaction does not verify.
  Digest submit(const Transaction& txn);

  // Raw injection of a message into the network, bypassing any node.
  void inject(NetworkMessage message, Time delay);

  // Advances by one event; nullopt when nothing is scheduled.
  std::optional<SimEvent> step();

  // Runs until the transaction is executed at every honest node and returns
  // its apply outcome (identical at all honest nodes).
  ApplyOutcome await(const Digest& txn_id);
  bool executed_at_all_honest(const Digest& txn_id) const;

  // Runs until no event is left or the budget is exhausted; true if drained.
  bool run_until_idle(std::uint64_t max_events);

  Time now() const { return now_; }
  std::size_t size() const { return nodes_.size(); }
  std::uint64_t events_processed() const { return events_; }
  bool is_honest(NodeId n) const { return nodes_.at(n.index)->honest(); }
  std::vector<NodeId> honest_nodes() const;

  const Replica& replica(NodeId n) const { return nodes_.at(n.index)->state(); }
  const WriteOnceStore& store(NodeId n) const { return replica(n).store(); }
  const LedgerLog& log(NodeId n) const { return replica(n).log(); }
  const Pki& pki() const { return pki_; }

 private:
  struct Event {
    Time time = 0;
    std::uint64_t seq = 0;
    bool is_timer = false;
    NetworkMessage message;
    NodeId timer_node;
    TimerRequest timer;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  Time delay();
  void dispatch(NodeId from, Outbox& out);

  const Pki& pki_;
  NetworkOptions options_;
  std::vector<std::unique_ptr<ConsensusNode>> nodes_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Rng rng_;
  Time now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t events_ = 0;
};

}  // namespace pufchain
