#include "pufchain/adversary.hpp"

#include <map>
#include <stdexcept>

namespace pufchain {
namespace {

constexpr AttackKind kAttackKinds[] = {AttackKind::ForgeInTransit, AttackKind::ForgePreCrd,
                                       AttackKind::BlameSupplier, AttackKind::ByzantineNode,
                                       AttackKind::MethodAbuse};
constexpr MethodAbuseVariant kVariants[] = {
    MethodAbuseVariant::SkipRegisterItem, MethodAbuseVariant::SkipShipItem,
    MethodAbuseVariant::WrongRegisterParams, MethodAbuseVariant::WrongShipParams,
    MethodAbuseVariant::WrongVerifyParams};

// Offset that turns an item id into one nobody produced.
constexpr std::uint64_t kWrongCounter = 1'000'000;

PartyId party(std::size_t i) { return PartyId{static_cast<std::uint32_t>(i)}; }

// Identities of every party except the adversary.
class HonestParties {
 public:
  HonestParties(const std::vector<PartyIdentity>& all, PartyId adversary) {
    for (const auto& id : all) {
      if (id.id() != adversary) by_id_.emplace(id.id(), id);
    }
  }
  const PartyIdentity& at(PartyId p) const {
    auto it = by_id_.find(p);
    if (it == by_id_.end()) throw std::logic_error("no honest identity for " + to_string(p));
    return it->second;
  }

 private:
  std::map<PartyId, PartyIdentity> by_id_;
};

void add_edge(std::set<TrackingKey>& keys, std::size_t s, std::size_t b, ItemId item,
              Tag outcome) {
  keys.insert(edge_key(Tag::Shipped, party(s), party(b), item));
  keys.insert(edge_key(Tag::DeclareVerification, party(s), party(b), item));
  keys.insert(edge_key(outcome, party(s), party(b), item));
}

std::set<TrackingKey> honest_path(std::size_t parties, ItemId item, std::size_t upto) {
  std::set<TrackingKey> keys{crd_key(item)};
  for (std::size_t k = 0; k + 1 < upto + 1 && k + 1 < parties; ++k)
    add_edge(keys, k, k + 1, item, Tag::VerificationSucceeded);
  return keys;
}

std::set<TrackingKey> full_chain(std::size_t parties, ItemId item) {
  return honest_path(parties, item, parties - 1);
}

bool is_alert(Tag t) {
  return t == Tag::VerificationFailed || t == Tag::NoShip || t == Tag::NoCrd;
}

struct Script {
  const AdversaryConfig& adv;
  const AttackScenario& scenario;
  SupplyChainRun& run;
  const HonestParties& honest;
  AdversaryAgent& agent;
  Consortium& net;

  PartyId a() const { return agent.id(); }
  const PartyIdentity& actor(std::size_t p) const {
    return party(p) == a() ? agent.identity() : honest.at(party(p));
  }

  // Ships from `from` and verifies at each later party until the chain ends
  // or a verification does not succeed.
  void forward(ItemInstance& item, std::size_t from) {
    for (std::size_t s = from; s + 1 < scenario.parties; ++s) {
      if (run.ship(actor(s), party(s + 1), item) != Status::Ok) return;
      if (!run.deliver(actor(s + 1), item).verified()) return;
    }
  }

  // The item travels honestly from p0 up to and including delivery at `upto`.
  ItemInstance honest_until(std::size_t upto) {
    auto item = run.new_item(actor(0));
    for (std::size_t s = 0; s < upto; ++s) {
      run.ship(actor(s), party(s + 1), item);
      run.deliver(actor(s + 1), item);
    }
    return item;
  }

  void tamper_device(ItemInstance& item) {
    if (adv.clone_queries > 0) {
      // Observe the genuine device on challenges of the adversary's choosing.
      std::vector<ChallengeResponsePair> seen;
      for (std::size_t k = 0; k < adv.clone_queries; ++k) {
        const auto c = run.rng()();
        seen.push_back({c, item.device.query(c)});
      }
      if (auto copy = clone(seen, adv.n_puf, item.device.params(), run.rng())) {
        item.device = std::move(*copy);
        return;
      }
    }
    item.device = tamper(item.device, run.rng());
  }

  std::vector<ItemId> go() {
    const auto A = a().index;
    if (!adv.enabled || adv.attack == AttackKind::ByzantineNode) {
      const std::size_t items = adv.attack == AttackKind::ByzantineNode ? scenario.byzantine_items : 1;
      std::vector<ItemId> ids;
      for (std::size_t k = 0; k < items; ++k) {
        auto item = run.new_item(actor(0));
        ids.push_back(item.item);
        forward(item, 0);
      }
      return ids;
    }
    switch (adv.attack) {
      case AttackKind::ForgeInTransit: {
        auto item = honest_until(A);
        tamper_device(item);
        forward(item, A);
        return {item.item};
      }
      case AttackKind::ForgePreCrd: {
        auto item = run.fabricate(a());
        if (!adv.tamper_after_register) tamper_device(item);
        run.contract().register_item(agent.identity(), run.enroll_item(item));
        if (adv.tamper_after_register) tamper_device(item);
        forward(item, 0);
        return {item.item};
      }
      case AttackKind::BlameSupplier: {
        auto item = honest_until(A - 1);
        run.ship(actor(A - 1), a(), item);
        tamper_device(item);  // after receipt, before the adversary's own check
        if (run.deliver(agent.identity(), item).verified()) forward(item, A);
        return {item.item};
      }
      case AttackKind::MethodAbuse:
        return abuse();
      case AttackKind::ByzantineNode:
        break;
    }
    return {};
  }

  std::vector<ItemId> abuse() {
    const auto A = a().index;
    switch (adv.variant) {
      case MethodAbuseVariant::SkipRegisterItem:
      case MethodAbuseVariant::WrongRegisterParams: {
        auto item = run.fabricate(a());
        auto crd = run.enroll_item(item);
        if (adv.variant == MethodAbuseVariant::WrongRegisterParams) {
          crd.item.counter += kWrongCounter;
          run.contract().register_item(agent.identity(), crd);
        }
        forward(item, 0);
        return {item.item};
      }
      case MethodAbuseVariant::SkipShipItem:
      case MethodAbuseVariant::WrongShipParams: {
        auto item = honest_until(A);
        if (adv.variant == MethodAbuseVariant::WrongShipParams) {
          auto wrong = item.item;
          wrong.counter += kWrongCounter;
          run.contract().ship_item(agent.identity(), party(A + 1), wrong);
        }
        run.hand_over(item, a(), party(A + 1));
        if (run.deliver(actor(A + 1), item).verified()) forward(item, A + 1);
        return {item.item};
      }
      case MethodAbuseVariant::WrongVerifyParams: {
        auto item = honest_until(A - 1);
        run.ship(actor(A - 1), a(), item);
        const auto supplier = party(A - 1);
        auto challenge = run.contract().get_challenges(agent.identity(), supplier, item.item);
        if (challenge.status == Status::Ok) {
          auto garbage = challenge.crv;
          for (auto& p : garbage.pairs) p.response = ~p.response & item.device.response_mask();
          run.contract().verify_item(agent.identity(), supplier, item.item, challenge.crv,
                                     garbage);
        }
        run.receive(item, a());
        return {item.item};
      }
    }
    return {};
  }
};

}  // namespace

std::string to_string(AttackKind a) {
  switch (a) {
    case AttackKind::ForgeInTransit: return "forge_in_transit";
    case AttackKind::ForgePreCrd: return "forge_pre_crd";
    case AttackKind::BlameSupplier: return "blame_supplier";
    case AttackKind::ByzantineNode: return "byzantine_node";
    case AttackKind::MethodAbuse: return "method_abuse";
  }
  return "unknown";
}

std::string to_string(MethodAbuseVariant v) {
  switch (v) {
    case MethodAbuseVariant::SkipRegisterItem: return "skip_register_item";
    case MethodAbuseVariant::SkipShipItem: return "skip_ship_item";
    case MethodAbuseVariant::WrongRegisterParams: return "wrong_register_params";
    case MethodAbuseVariant::WrongShipParams: return "wrong_ship_params";
    case MethodAbuseVariant::WrongVerifyParams: return "wrong_verify_params";
  }
  return "unknown";
}

AttackKind parse_attack_kind(const std::string& name) {
  for (auto k : kAttackKinds) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown attack: " + name);
}

MethodAbuseVariant parse_method_abuse(const std::string& name) {
  for (auto v : kVariants) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown method abuse variant: " + name);
}

void validate(const AdversaryConfig& adv, const AttackScenario& scenario) {
  const auto n = scenario.parties;
  const auto A = adv.controlled_party.index;
  if (n < 2) throw ScenarioError("attack scenarios need at least two parties");
  if (A >= n) throw ScenarioError("controlled party outside the chain");
  scenario.puf.validate();
  scenario.contract().validate();
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) throw ScenarioError(to_string(adv.attack) + " needs " + what);
  };
  switch (adv.attack) {
    case AttackKind::ForgeInTransit:
      need(A >= 1 && A + 1 < n, "an adversary with both a supplier and a buyer");
      break;
    case AttackKind::ForgePreCrd:
      need(A == 0, "the adversary at stage 0");
      break;
    case AttackKind::BlameSupplier:
      need(A >= 1, "an adversary past stage 0");
      break;
    case AttackKind::ByzantineNode:
      break;
    case AttackKind::MethodAbuse:
      switch (adv.variant) {
        case MethodAbuseVariant::SkipRegisterItem:
        case MethodAbuseVariant::WrongRegisterParams:
          need(A == 0, "the adversary at stage 0");
          break;
        case MethodAbuseVariant::SkipShipItem:
        case MethodAbuseVariant::WrongShipParams:
          need(A >= 1 && A + 1 < n, "an adversary with both a supplier and a buyer");
          break;
        case MethodAbuseVariant::WrongVerifyParams:
          need(A >= 1, "an adversary past stage 0");
          break;
      }
      break;
  }
}

ExpectedOutcome expected_outcome(const AdversaryConfig& adv, const AttackScenario& scenario) {
  const auto n = scenario.parties;
  const auto A = adv.controlled_party.index;
  const ItemId item{PartyId{0}, 0};
  ExpectedOutcome out;
  auto failed_at = [&](std::size_t s) {
    out.detected = true;
    out.attributed_to = party(s);
    out.ledger_evidence = honest_path(n, item, s);
    add_edge(out.ledger_evidence, s, s + 1, item, Tag::VerificationFailed);
  };
  if (adv.attack == AttackKind::ByzantineNode) {
    for (std::size_t k = 0; k < scenario.byzantine_items; ++k) {
      const auto keys = full_chain(n, ItemId{PartyId{0}, k});
      out.ledger_evidence.insert(keys.begin(), keys.end());
    }
    out.safety_asserted = max_faulty(n) >= 1;
    return out;
  }
  if (!adv.enabled) {
    out.ledger_evidence = full_chain(n, item);
    return out;
  }
  switch (adv.attack) {
    case AttackKind::ForgeInTransit:
      failed_at(A);
      break;
    case AttackKind::ForgePreCrd:
      // Enrolment captures the forged function, so nothing can be detected.
      if (adv.tamper_after_register) {
        failed_at(0);
      } else {
        out.ledger_evidence = full_chain(n, item);
      }
      break;
    case AttackKind::BlameSupplier:
      failed_at(A - 1);
      break;
    case AttackKind::MethodAbuse:
      switch (adv.variant) {
        case MethodAbuseVariant::SkipRegisterItem:
        case MethodAbuseVariant::WrongRegisterParams:
          out.detected = true;
          out.attributed_to = party(0);
          out.ledger_evidence = {edge_key(Tag::Shipped, party(0), party(1), item),
                                 edge_key(Tag::NoCrd, party(0), party(1), item)};
          break;
        case MethodAbuseVariant::SkipShipItem:
        case MethodAbuseVariant::WrongShipParams:
          out.detected = true;
          out.attributed_to = party(A);
          out.ledger_evidence = honest_path(n, item, A);
          out.ledger_evidence.insert(edge_key(Tag::NoShip, party(A), party(A + 1), item));
          break;
        case MethodAbuseVariant::WrongVerifyParams:
          failed_at(A - 1);
          break;
      }
      break;
    case AttackKind::ByzantineNode:
      break;
  }
  return out;
}

ConsensusSafety check_consensus_safety(const Consortium& net) {
  ConsensusSafety out;
  const auto honest = net.honest_nodes();
  for (std::size_t i = 0; i < honest.size(); ++i) {
    const auto& log = net.log(honest[i]);
    for (std::size_t j = i + 1; j < honest.size(); ++j) {
      if (!prefix_consistent(log, net.log(honest[j]))) ++out.prefix_violations;
    }
    WriteOnceStore replay;
    for (const auto& e : log) {
      if (e.outcome != ApplyOutcome::Rejected && !signatures_valid(e.txn, net.pki()))
        ++out.invalid_signatures;
      if (e.outcome == ApplyOutcome::Rejected) continue;
      const auto r = replay.set(e.txn.key, e.txn.value, e.txn.submitter);
      if ((r == SetResult::Ok) != (e.outcome == ApplyOutcome::Applied)) ++out.write_once_violations;
    }
    if (!(replay == net.store(honest[i]))) ++out.write_once_violations;
  }
  return out;
}

bool AttackReport::expectation_met() const {
  if (config.attack == AttackKind::ByzantineNode && !expected.safety_asserted) return true;
  if (!live || !evidence_matches()) return false;
  if (safety && !safety->ok()) return false;
  return detected == expected.detected && attributed_to == expected.attributed_to;
}

AttackReport run_attack(const AdversaryConfig& adv, const AttackScenario& scenario,
                        std::uint64_t seed) {
  validate(adv, scenario);
  const auto n = scenario.parties;
  auto setup = make_pki(n, mix_seed(seed, 0x706b69));
  Rng rng(mix_seed(seed, 0x72756e));

  std::map<NodeId, NodeFactory> overrides;
  if (adv.attack == AttackKind::ByzantineNode && adv.enabled)
    overrides.emplace(adv.controlled_party, byzantine_factory(adv.strategy, mix_seed(seed, 0x62797a)));
  NetworkOptions options;
  options.policy = scenario.policy;
  options.seed = mix_seed(seed, 0x6e6574);
  Consortium net(setup.pki, setup.identities, options, make_tracking_validator(scenario.contract()),
                 std::move(overrides));
  TrackingContract contract(net, scenario.contract());
  SupplyChainRun run(linear_chain(n), contract, scenario.puf, rng);

  HonestParties honest(setup.identities, adv.controlled_party);
  AdversaryAgent agent(setup.identities.at(adv.controlled_party.index), adv);
  setup.identities.clear();

  AttackReport report;
  report.config = adv;
  report.seed = seed;
  report.expected = expected_outcome(adv, scenario);

  std::vector<ItemId> items;
  try {
    items = Script{adv, scenario, run, honest, agent, net}.go();
  } catch (const LivenessFailure& e) {
    report.live = false;
    report.note = e.what();
    for (std::uint64_t k = 0; k < std::max<std::size_t>(1, scenario.byzantine_items); ++k)
      items.push_back(ItemId{PartyId{0}, k});
  }

  const auto readers = net.honest_nodes();
  if (!readers.empty()) {
    const auto& store = net.store(readers.front());
    for (const auto& item : items) {
      for (auto& key : records_for(store, item)) {
        if (is_alert(key.tag) && !report.detected) {
          report.detected = true;
          report.attributed_to = key.parties.at(0);
        }
        report.evidence.insert(std::move(key));
      }
    }
  }
  if (adv.attack == AttackKind::ByzantineNode) {
    report.safety = check_consensus_safety(net);
    if (!report.expected.safety_asserted)
      report.note = "f = 0 at N = " + std::to_string(n) + ": safety not guaranteed";
  }
  return report;
}

ForgeryProbe run_forgery_probe(const AttackScenario& scenario, std::uint64_t seed) {
  const auto n = scenario.parties;
  if (n < 3) throw ScenarioError("the forgery probe needs three parties");
  auto setup = make_pki(n, mix_seed(seed, 0x706b69));
  Rng rng(mix_seed(seed, 0x72756e));
  NetworkOptions options;
  options.policy = scenario.policy;
  options.seed = mix_seed(seed, 0x6e6574);
  Consortium net(setup.pki, setup.identities, options, make_tracking_validator(scenario.contract()));
  TrackingContract contract(net, scenario.contract());
  SupplyChainRun run(linear_chain(n), contract, scenario.puf, rng);

  const PartyId victim{0};
  HonestParties honest(setup.identities, PartyId{1});
  AdversaryAgent agent(setup.identities.at(1), AdversaryConfig{});
  setup.identities.clear();

  auto item = run.new_item(honest.at(victim));

  // 1. Request claiming the victim as submitter, signed with the adversary's key.
  Transaction forged;
  forged.submitter = victim;
  forged.key = edge_key(Tag::Shipped, victim, PartyId{2}, item.item).encode();
  forged.value = encode_item_value(item.item);
  forged.key_signature = agent.identity().sign_bytes(forged.key);
  forged.value_signature = agent.identity().sign_bytes(value_signing_payload(forged.key, forged.value));
  const auto body = encode_body(RequestBody{forged});
  for (std::uint32_t j = 0; j < n; ++j)
    net.inject(make_message(agent.identity(), NodeId{j}, std::uint64_t{1} << 62, body), 1);

  // 2. A validly signed record whose key makes the victim responsible.
  const auto misattributed = make_transaction(
      agent.identity(), edge_key(Tag::Shipped, victim, PartyId{2}, item.item).encode(),
      encode_item_value(item.item));

  ForgeryProbe out;
  out.misattributed_outcome = net.await(net.submit(misattributed));
  net.run_until_idle(1'000'000);
  const auto forged_id = transaction_id(forged);
  for (auto node : net.honest_nodes()) {
    if (net.replica(node).outcome_of(forged_id)) out.forged_request_committed = true;
    out.rejected_at_nodes += net.replica(node).counters().invalid_value > 0 ? 1 : 0;
  }
  return out;
}

}  // namespace pufchain
