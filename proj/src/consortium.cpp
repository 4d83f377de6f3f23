#include "pufchain/consortium.hpp"

namespace pufchain {

std::string to_string(DeliveryPolicy p) {
  switch (p) {
    case DeliveryPolicy::Fifo: return "fifo";
    case DeliveryPolicy::UniformRandomDelay: return "uniform";
    case DeliveryPolicy::AdversarialReorder: return "adversarial";
  }
  return "unknown";
}

DeliveryPolicy parse_delivery_policy(const std::string& name) {
  if (name == "fifo") return DeliveryPolicy::Fifo;
  if (name == "uniform") return DeliveryPolicy::UniformRandomDelay;
  if (name == "adversarial") return DeliveryPolicy::AdversarialReorder;
  throw std::invalid_argument("unknown delivery policy: " + name);
}

Consortium::Consortium(const Pki& pki, std::vector<PartyIdentity> node_identities,
                       NetworkOptions options, TransactionValidator validator,
                       std::map<NodeId, NodeFactory> overrides)
    : pki_(pki), options_(options), rng_(mix_seed(options.seed, 0x6e6574ULL)) {
  if (options_.max_delay == 0) options_.max_delay = 1;
  if (options_.base_timeout == 0) {
    options_.base_timeout =
        options_.policy == DeliveryPolicy::Fifo ? 8 : 8 * options_.max_delay;
  }
  const auto n = node_identities.size();
  ReplicaConfig config{options_.base_timeout, std::move(validator)};
  for (auto& identity : node_identities) {
    if (identity.id().index != nodes_.size())
      throw std::invalid_argument("node identities must be ordered by index");
    const auto id = identity.id();
    if (auto it = overrides.find(id); it != overrides.end()) {
      nodes_.push_back(it->second(std::move(identity), pki_, n, config));
    } else {
      nodes_.push_back(std::make_unique<Replica>(std::move(identity), pki_, n, config));
    }
  }
}

Time Consortium::delay() {
  switch (options_.policy) {
    case DeliveryPolicy::Fifo:
      return 1;
    case DeliveryPolicy::UniformRandomDelay:
      return uniform_between(rng_, 1, options_.max_delay);
    case DeliveryPolicy::AdversarialReorder:
      // A quarter of the traffic is held back far beyond the ordinary band,
      // which reorders messages across protocol phases and slots.
      if (uniform01(rng_) < 0.25)
        return uniform_between(rng_, options_.max_delay, 40 * options_.max_delay);
      return uniform_between(rng_, 1, options_.max_delay);
  }
  return 1;
}

Digest Consortium::submit(const Transaction& txn) {
  if (txn.submitter.index >= nodes_.size()) throw UnknownParty(txn.submitter);
  if (!signatures_valid(txn, pki_)) throw RejectedSignature();
  for (auto& m : nodes_[txn.submitter.index]->client_broadcast(txn)) inject(std::move(m), delay());
  return transaction_id(txn);
}

void Consortium::inject(NetworkMessage message, Time d) {
  Event e;
  e.time = now_ + d;
  e.seq = seq_++;
  e.message = std::move(message);
  queue_.push(std::move(e));
}

void Consortium::dispatch(NodeId from, Outbox& out) {
  for (auto& o : out.messages) inject(std::move(o.message), delay() + o.extra_delay);
  for (const auto& t : out.timers) {
    Event e;
    e.time = std::max(t.at, now_);
    e.seq = seq_++;
    e.is_timer = true;
    e.timer_node = from;
    e.timer = t;
    queue_.push(std::move(e));
  }
}

std::optional<SimEvent> Consortium::step() {
  if (queue_.empty()) return std::nullopt;
  Event e = queue_.top();
  queue_.pop();
  now_ = e.time;
  ++events_;
  Outbox out;
  SimEvent rec;
  rec.time = now_;
  if (e.is_timer) {
    rec.kind = SimEvent::Kind::Timer;
    rec.from = rec.to = e.timer_node;
    nodes_.at(e.timer_node.index)->on_timer(e.timer, now_, out);
    dispatch(e.timer_node, out);
  } else {
    rec.kind = SimEvent::Kind::Deliver;
    rec.from = e.message.sender;
    rec.to = e.message.receiver;
    if (e.message.receiver.index < nodes_.size()) {
      auto& node = nodes_[e.message.receiver.index];
      node->on_message(e.message, now_, out);
      dispatch(node->id(), out);
    }
  }
  return rec;
}

std::vector<NodeId> Consortium::honest_nodes() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n->honest()) out.push_back(n->id());
  }
  return out;
}

bool Consortium::executed_at_all_honest(const Digest& txn_id) const {
  for (const auto& n : nodes_) {
    if (n->honest() && !n->state().outcome_of(txn_id)) return false;
  }
  return true;
}

ApplyOutcome Consortium::await(const Digest& txn_id) {
  std::uint64_t budget = options_.max_events;
  while (!executed_at_all_honest(txn_id)) {
    if (budget-- == 0) throw LivenessFailure("transaction not committed within event budget");
    if (!step()) throw LivenessFailure("network drained before transaction committed");
  }
  for (const auto& n : nodes_) {
    if (n->honest()) return *n->state().outcome_of(txn_id);
  }
  throw LivenessFailure("no honest node");
}

bool Consortium::run_until_idle(std::uint64_t max_events) {
  for (std::uint64_t i = 0; i < max_events; ++i) {
    if (!step()) return true;
  }
  return queue_.empty();
}

}  // namespace pufchain
