#include "pufchain/byzantine.hpp"

#include <stdexcept>

namespace pufchain {
namespace {

constexpr std::uint64_t kInjectedTs = std::uint64_t{1} << 62;

}  // namespace

std::string to_string(ByzantineStrategy s) {
  switch (s) {
    case ByzantineStrategy::Silent: return "silent";
    case ByzantineStrategy::Equivocate: return "equivocate";
    case ByzantineStrategy::DelaySelective: return "delay_selective";
    case ByzantineStrategy::CorruptPayload: return "corrupt_payload";
  }
  return "unknown";
}

ByzantineStrategy parse_byzantine_strategy(const std::string& name) {
  for (auto s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown byzantine strategy: " + name);
}

ByzantineNode::ByzantineNode(ByzantineStrategy strategy, PartyIdentity identity, const Pki& pki,
                             std::size_t nodes, ReplicaConfig config, std::uint64_t seed)
    : strategy_(strategy),
      identity_(identity),
      inner_(std::move(identity), pki, nodes, std::move(config)),
      n_(nodes),
      rng_(seed) {
  if (n_ > 1) victims_.insert(NodeId{static_cast<std::uint32_t>((id().index + 1) % n_)});
}

void ByzantineNode::on_message(const NetworkMessage& m, Time now, Outbox& out) {
  if (strategy_ == ByzantineStrategy::Silent) {
    ++counters_.dropped;
    return;
  }
  Outbox produced;
  inner_.on_message(m, now, produced);
  rewrite(produced, out);
}

void ByzantineNode::on_timer(const TimerRequest& t, Time now, Outbox& out) {
  if (strategy_ == ByzantineStrategy::Silent) return;
  Outbox produced;
  inner_.on_timer(t, now, produced);
  rewrite(produced, out);
}

std::vector<NetworkMessage> ByzantineNode::client_broadcast(const Transaction& txn) {
  return inner_.client_broadcast(txn);
}

NetworkMessage ByzantineNode::resign(const NetworkMessage& m, Bytes body) {
  return make_message(identity_, m.receiver, m.ts, std::move(body));
}

Transaction ByzantineNode::own_transaction(const std::string& tag) {
  return make_transaction(identity_, to_bytes("byzantine/" + tag), to_bytes(tag));
}

Transaction ByzantineNode::forged_transaction(NodeId victim) {
  // Claims the victim as submitter but can only sign with our own key.
  Transaction txn;
  txn.submitter = victim;
  txn.key = to_bytes("forged/" + std::to_string(forge_counter_++));
  txn.value = to_bytes("on behalf of " + to_string(victim));
  txn.key_signature = identity_.sign_bytes(txn.key);
  txn.value_signature = identity_.sign_bytes(value_signing_payload(txn.key, txn.value));
  return txn;
}

void ByzantineNode::rewrite(Outbox& produced, Outbox& out) {
  out.timers = std::move(produced.timers);
  for (auto& o : produced.messages) {
    switch (strategy_) {
      case ByzantineStrategy::Silent:
        ++counters_.dropped;
        break;
      case ByzantineStrategy::Equivocate:
        equivocate(o.message, out);
        break;
      case ByzantineStrategy::DelaySelective:
        if (victims_.count(o.message.receiver)) {
          ++counters_.delayed;
          o.extra_delay += uniform_between(rng_, 200, 800);
        }
        out.messages.push_back(std::move(o));
        break;
      case ByzantineStrategy::CorruptPayload:
        corrupt(o.message, out);
        break;
    }
  }
}

void ByzantineNode::equivocate(const NetworkMessage& m, Outbox& out) {
  // Even receivers see the honest message, odd ones a conflicting one.
  if (m.receiver.index % 2 == 0) {
    out.messages.push_back({m, 0});
    return;
  }
  const auto body = decode_body(m.body);
  const auto tag = std::to_string(m.ts) + "/" + std::to_string(m.receiver.index);
  Body alt = body;
  if (auto* b = std::get_if<PrePrepareBody>(&alt)) {
    b->value = b->value ? Value{} : Value{own_transaction("proposal/" + tag)};
  } else if (auto* b = std::get_if<PrepareBody>(&alt)) {
    b->digest = digest(to_bytes("prepare/" + tag));
  } else if (auto* b = std::get_if<CommitBody>(&alt)) {
    b->value = own_transaction("commit/" + tag);
    b->digest = value_digest(b->value);
  } else if (auto* b = std::get_if<ViewChangeBody>(&alt)) {
    b->prepared.reset();
  } else if (auto* b = std::get_if<NewViewBody>(&alt)) {
    b->value = own_transaction("new-view/" + tag);
  } else {
    out.messages.push_back({m, 0});
    return;
  }
  ++counters_.equivocated;
  out.messages.push_back({resign(m, encode_body(alt)), 0});
}

void ByzantineNode::corrupt(const NetworkMessage& m, Outbox& out) {
  if (uniform_below(rng_, 16) == 0) {
    // Inject a request attributed to an honest party.
    auto victim = NodeId{static_cast<std::uint32_t>(uniform_below(rng_, n_))};
    if (victim == id()) victim.index = (victim.index + 1) % n_;
    const auto body = encode_body(RequestBody{forged_transaction(victim)});
    for (std::uint32_t j = 0; j < n_; ++j) {
      out.messages.push_back({make_message(identity_, NodeId{j}, kInjectedTs + forge_counter_, body), 0});
    }
    ++counters_.forged;
  }
  NetworkMessage bad = m;
  switch (uniform_below(rng_, 8)) {
    case 0:  // bit flip under the original signature
      if (bad.body.empty()) bad.body.push_back(0);
      bad.body[uniform_below(rng_, bad.body.size())] ^= 0x5a;
      break;
    case 1: {  // well-signed garbage
      Bytes junk(1 + uniform_below(rng_, 64));
      for (auto& b : junk) b = static_cast<std::uint8_t>(rng_());
      bad = resign(m, std::move(junk));
      break;
    }
    case 2:  // spoofed sender
      if (n_ < 2) break;
      bad.sender.index = (m.sender.index + 1 + uniform_below(rng_, n_ - 1)) % n_;
      break;
    case 3: {  // proposal carrying a forged transaction
      auto body = decode_body(m.body);
      if (auto* b = std::get_if<PrePrepareBody>(&body)) {
        b->value = forged_transaction(NodeId{static_cast<std::uint32_t>((id().index + 1) % n_)});
        ++counters_.forged;
        bad = resign(m, encode_body(body));
        break;
      }
      out.messages.push_back({m, 0});
      return;
    }
    case 4:  // replay
      out.messages.push_back({m, 0});
      ++counters_.replayed;
      break;
    default:
      out.messages.push_back({m, 0});
      return;
  }
  ++counters_.corrupted;
  out.messages.push_back({std::move(bad), 0});
}

NodeFactory byzantine_factory(ByzantineStrategy strategy, std::uint64_t seed) {
  return [strategy, seed](PartyIdentity identity, const Pki& pki, std::size_t nodes,
                          ReplicaConfig config) -> std::unique_ptr<ConsensusNode> {
    return std::make_unique<ByzantineNode>(strategy, std::move(identity), pki, nodes,
                                           std::move(config), seed);
  };
}

}  // namespace pufchain
