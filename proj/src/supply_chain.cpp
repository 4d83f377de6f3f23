#include "pufchain/supply_chain.hpp"

#include <algorithm>
#include <functional>

namespace pufchain {
namespace {

// Colours for the depth-first search: 0 unseen, 1 on stack, 2 finished.
std::optional<std::vector<PartyId>> find_cycle(const SupplyChainGraph& g) {
  std::vector<int> colour(g.parties, 0);
  std::vector<PartyId> path;
  std::optional<std::vector<PartyId>> cycle;
  std::function<void(PartyId)> visit = [&](PartyId p) {
    colour[p.index] = 1;
    path.push_back(p);
    for (auto b : g.buyers(p)) {
      if (cycle) return;
      if (colour[b.index] == 1) {
        auto it = std::find(path.begin(), path.end(), b);
        cycle = std::vector<PartyId>(it, path.end());
        cycle->push_back(b);
        return;
      }
      if (colour[b.index] == 0) visit(b);
    }
    path.pop_back();
    colour[p.index] = 2;
  };
  for (std::uint32_t i = 0; i < g.parties && !cycle; ++i) {
    if (colour[i] == 0) visit(PartyId{i});
  }
  return cycle;
}

}  // namespace

std::vector<PartyId> SupplyChainGraph::suppliers(PartyId p) const {
  std::vector<PartyId> out;
  for (const auto& [s, b] : edges) {
    if (b == p) out.push_back(s);
  }
  return out;
}

std::vector<PartyId> SupplyChainGraph::buyers(PartyId p) const {
  std::vector<PartyId> out;
  for (auto it = edges.lower_bound({p, PartyId{0}}); it != edges.end() && it->first == p; ++it)
    out.push_back(it->second);
  return out;
}

std::vector<std::size_t> stages(const SupplyChainGraph& graph) {
  if (auto cycle = find_cycle(graph)) {
    std::string path;
    for (auto p : *cycle) path += (path.empty() ? "" : " -> ") + to_string(p);
    throw CycleDetected("cycle " + path);
  }
  std::vector<std::optional<std::size_t>> memo(graph.parties);
  std::function<std::size_t(PartyId)> depth = [&](PartyId p) -> std::size_t {
    if (memo[p.index]) return *memo[p.index];
    std::size_t s = 0;
    for (auto q : graph.suppliers(p)) s = std::max(s, depth(q) + 1);
    memo[p.index] = s;
    return s;
  };
  std::vector<std::size_t> out;
  for (std::uint32_t i = 0; i < graph.parties; ++i) out.push_back(depth(PartyId{i}));
  return out;
}

std::size_t stage(const SupplyChainGraph& graph, PartyId p) {
  if (p.index >= graph.parties) throw UnknownParty(p);
  return stages(graph)[p.index];
}

std::optional<GraphViolation> validate_graph(const SupplyChainGraph& graph) {
  for (const auto& e : graph.edges) {
    if (e.first.index >= graph.parties || e.second.index >= graph.parties)
      return GraphViolation{"edge references an unknown party", e};
    if (e.first == e.second) return GraphViolation{"self-edge at " + to_string(e.first), e};
  }
  std::vector<std::size_t> st;
  try {
    st = stages(graph);
  } catch (const CycleDetected& c) {
    return GraphViolation{c.what(), std::nullopt};
  }
  for (const auto& e : graph.edges) {
    if (st[e.second.index] != st[e.first.index] + 1) {
      return GraphViolation{"edge " + to_string(e.first) + " -> " + to_string(e.second) +
                                " spans stages " + std::to_string(st[e.first.index]) + " -> " +
                                std::to_string(st[e.second.index]),
                            e};
    }
  }
  return std::nullopt;
}

SupplyChainGraph example_graph() {
  SupplyChainGraph g;
  g.parties = 8;
  auto edge = [&](std::uint32_t s, std::uint32_t b) { g.edges.insert({PartyId{s}, PartyId{b}}); };
  edge(0, 3);
  edge(1, 3);
  edge(2, 4);
  edge(0, 4);
  edge(3, 5);
  edge(3, 6);
  edge(4, 6);
  edge(4, 7);
  return g;
}

SupplyChainGraph linear_chain(std::size_t parties) {
  SupplyChainGraph g;
  g.parties = parties;
  for (std::uint32_t i = 0; i + 1 < parties; ++i) g.edges.insert({PartyId{i}, PartyId{i + 1}});
  return g;
}

LayeredDag random_layered_dag(Rng& rng, std::size_t layers, std::size_t max_width,
                              double edge_probability) {
  LayeredDag out;
  std::vector<std::vector<PartyId>> layer(layers);
  std::uint32_t next = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto width = 1 + uniform_below(rng, max_width);
    for (std::uint64_t k = 0; k < width; ++k) {
      layer[l].push_back(PartyId{next++});
      out.assigned_stage.push_back(l);
    }
  }
  out.graph.parties = next;
  for (std::size_t l = 1; l < layers; ++l) {
    for (auto b : layer[l]) {
      bool any = false;
      for (auto s : layer[l - 1]) {
        if (uniform01(rng) < edge_probability) {
          out.graph.edges.insert({s, b});
          any = true;
        }
      }
      if (!any) {
        out.graph.edges.insert({layer[l - 1][uniform_below(rng, layer[l - 1].size())], b});
      }
    }
  }
  return out;
}

SupplyChainRun::SupplyChainRun(SupplyChainGraph graph, TrackingContract& contract, PufParams puf,
                               Rng& rng)
    : graph_(std::move(graph)), contract_(contract), puf_(puf), rng_(rng) {
  if (auto v = validate_graph(graph_)) throw ScenarioError("invalid supply chain: " + v->description);
  if (graph_.parties != contract_.config().parties)
    throw ScenarioError("graph and contract disagree on the party count");
  puf_.validate();
  stages_ = stages(graph_);
}

ItemInstance SupplyChainRun::fabricate(PartyId producer) {
  if (producer.index >= graph_.parties) throw UnknownParty(producer);
  if (stage_of(producer) != 0) throw ScenarioError(to_string(producer) + " is not at stage 0");
  ItemId id{producer, counters_[producer]++};
  return ItemInstance{id, make_device(puf_, rng_), producer, std::nullopt, {{0, producer}}};
}

ChallengeResponseData SupplyChainRun::enroll_item(ItemInstance& instance) {
  return enroll(instance.device, instance.item, contract_.network().pki(), graph_.parties,
                contract_.config().challenges, rng_);
}

ItemInstance SupplyChainRun::new_item(const PartyIdentity& producer) {
  auto instance = fabricate(producer.id());
  const auto crd = enroll_item(instance);
  const auto status = contract_.register_item(producer, crd);
  if (status != Status::Ok)
    throw ScenarioError("registration of " + to_string(instance.item) + " failed: " + to_string(status));
  return instance;
}

void SupplyChainRun::hand_over(ItemInstance& instance, PartyId supplier, PartyId buyer) {
  if (!graph_.has_edge(supplier, buyer)) throw EdgeAbsent(supplier, buyer);
  if (instance.holder != supplier)
    throw ScenarioError(to_string(instance.item) + " is not held by " + to_string(supplier));
  instance.holder.reset();
  instance.in_transit = Edge{supplier, buyer};
}

void SupplyChainRun::receive(ItemInstance& instance, PartyId buyer) {
  if (!instance.in_transit || instance.in_transit->second != buyer)
    throw ScenarioError(to_string(instance.item) + " is not in transit to " + to_string(buyer));
  instance.in_transit.reset();
  instance.holder = buyer;
  instance.stage_history.emplace_back(stage_of(buyer), buyer);
}

Status SupplyChainRun::ship(const PartyIdentity& supplier, PartyId buyer, ItemInstance& instance) {
  if (!graph_.has_edge(supplier.id(), buyer)) throw EdgeAbsent(supplier.id(), buyer);
  if (instance.holder != supplier.id())
    throw ScenarioError(to_string(instance.item) + " is not held by " + to_string(supplier.id()));
  const auto status = contract_.ship_item(supplier, buyer, instance.item);
  if (status == Status::Ok) hand_over(instance, supplier.id(), buyer);
  return status;
}

DeliveryOutcome SupplyChainRun::deliver(const PartyIdentity& buyer, ItemInstance& instance) {
  if (!instance.in_transit || instance.in_transit->second != buyer.id())
    throw ScenarioError(to_string(instance.item) + " is not in transit to " + to_string(buyer.id()));
  const auto supplier = instance.in_transit->first;
  DeliveryOutcome out;
  auto challenge = contract_.get_challenges(buyer, supplier, instance.item);
  if (challenge.status == Status::Ok) {
    const auto measured = measure(instance.device, challenge.crv);
    auto result = contract_.verify_item(buyer, supplier, instance.item, challenge.crv, measured);
    out.status = result.status;
    out.record = std::move(result.record);
  } else {
    out.status = challenge.status;
  }
  receive(instance, buyer.id());
  return out;
}

}  // namespace pufchain
