#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pufchain/crypto.hpp"
#include "pufchain/puf.hpp"
#include "pufchain/random.hpp"
#include "pufchain/tracking.hpp"

namespace pufchain {

using Edge = std::pair<PartyId, PartyId>;  // (supplier, buyer)

struct SupplyChainGraph {
  std::size_t parties = 0;
  std::set<Edge> edges;

  bool has_edge(PartyId supplier, PartyId buyer) const { return edges.count({supplier, buyer}) != 0; }
  std::vector<PartyId> suppliers(PartyId p) const;
  std::vector<PartyId> buyers(PartyId p) const;
};

class CycleDetected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EdgeAbsent : public std::runtime_error {
 public:
  EdgeAbsent(PartyId supplier, PartyId buyer)
      : std::runtime_error("no relationship " + to_string(supplier) + " -> " + to_string(buyer)) {}
};

// A scenario step whose precondition does not hold.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 0 for parties without suppliers, otherwise 1 + the largest supplier stage.
// Throws CycleDetected on a cyclic graph.
std::size_t stage(const SupplyChainGraph& graph, PartyId p);
std::vector<std::size_t> stages(const SupplyChainGraph& graph);

struct GraphViolation {
  std::string description;
  std::optional<Edge> edge;
};

// nullopt iff the graph is acyclic, has no self-edges and every edge joins
// consecutive stages.
std::optional<GraphViolation> validate_graph(const SupplyChainGraph& graph);

// Eight parties over three stages: p0..p2, p3..p4, p5..p7.
SupplyChainGraph example_graph();
// p0 -> p1 -> ... -> p(n-1).
SupplyChainGraph linear_chain(std::size_t parties);

struct LayeredDag {
  SupplyChainGraph graph;
  std::vector<std::size_t> assigned_stage;
};

// Random graph whose edges only join consecutive layers; every party past
// the first layer has at least one supplier.
LayeredDag random_layered_dag(Rng& rng, std::size_t layers, std::size_t max_width,
                              double edge_probability);

struct ItemInstance {
  ItemId item;
  PufDevice device;
  std::optional<PartyId> holder;      // nullopt while in transit
  std::optional<Edge> in_transit;
  std::vector<std::pair<std::size_t, PartyId>> stage_history;
};

struct DeliveryOutcome {
  Status status = Status::Ok;  // NoShip / NoCrd when an alert was raised
  std::optional<VerificationRecord> record;

  bool verified() const { return record && record->succeeded; }
};

// Drives items through the chain: creation with enrolment and registration,
// shipment along an edge, and delivery with integrity verification. Every
// ledger call is made with the identity handed in by the caller.
class SupplyChainRun {
 public:
  SupplyChainRun(SupplyChainGraph graph, TrackingContract& contract, PufParams puf, Rng& rng);

  const SupplyChainGraph& graph() const { return graph_; }
  TrackingContract& contract() { return contract_; }
  const PufParams& puf_params() const { return puf_; }
  Rng& rng() { return rng_; }
  std::size_t stage_of(PartyId p) const { return stages_.at(p.index); }

  // Event 1.
  ItemInstance new_item(const PartyIdentity& producer);
  // Event 2.
  Status ship(const PartyIdentity& supplier, PartyId buyer, ItemInstance& instance);
  // Event 3.
  DeliveryOutcome deliver(const PartyIdentity& buyer, ItemInstance& instance);

  // Building blocks of the events above.
  ItemInstance fabricate(PartyId producer);
  ChallengeResponseData enroll_item(ItemInstance& instance);
  // Physical transfer without any ledger record.
  void hand_over(ItemInstance& instance, PartyId supplier, PartyId buyer);
  // Physical receipt without any ledger record.
  void receive(ItemInstance& instance, PartyId buyer);

 private:
  SupplyChainGraph graph_;
  std::vector<std::size_t> stages_;
  TrackingContract& contract_;
  PufParams puf_;
  Rng& rng_;
  std::map<PartyId, std::uint64_t> counters_;
};

}  // namespace pufchain
