#include <set>

#include "doctest.h"
#include "pufchain/supply_chain.hpp"

using namespace pufchain;

namespace {

PartyId P(std::uint32_t i) { return PartyId{i}; }

struct ChainFixture {
  explicit ChainFixture(SupplyChainGraph g, std::uint64_t seed = 3)
      : setup(make_pki(g.parties, seed)),
        config{10, 9, g.parties},
        net(setup.pki, setup.identities, {DeliveryPolicy::Fifo, seed}, make_tracking_validator(config)),
        contract(net, config),
        rng(seed),
        run(std::move(g), contract, PufParams{8, 1e-5}, rng) {}

  const PartyIdentity& id(std::uint32_t p) const { return setup.identities[p]; }

  PkiSetup setup;
  ContractConfig config;
  Consortium net;
  TrackingContract contract;
  Rng rng;
  SupplyChainRun run;
};

}  // namespace

TEST_SUITE("supply-chain") {
  TEST_CASE("example graph stages") {
    const auto g = example_graph();
    CHECK(g.parties == 8);
    CHECK(stages(g) == std::vector<std::size_t>{0, 0, 0, 1, 1, 2, 2, 2});
    CHECK_FALSE(validate_graph(g).has_value());
    CHECK(g.has_edge(P(1), P(3)));
    CHECK(g.suppliers(P(6)) == std::vector<PartyId>{P(3), P(4)});
    CHECK(g.buyers(P(0)) == std::vector<PartyId>{P(3), P(4)});
  }

  TEST_CASE("linear chain stages") {
    const auto g = linear_chain(5);
    CHECK(stages(g) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK_FALSE(validate_graph(g).has_value());
  }

  TEST_CASE("graph violations are reported") {
    auto cyc = linear_chain(3);
    cyc.edges.insert({P(2), P(0)});
    CHECK_THROWS_AS(stage(cyc, P(1)), CycleDetected);
    CHECK(validate_graph(cyc).has_value());

    auto self = linear_chain(3);
    self.edges.insert({P(1), P(1)});
    REQUIRE(validate_graph(self).has_value());
    CHECK(validate_graph(self)->edge == Edge{P(1), P(1)});

    auto skip = linear_chain(3);
    skip.edges.insert({P(0), P(2)});
    REQUIRE(validate_graph(skip).has_value());
    CHECK(validate_graph(skip)->edge == Edge{P(0), P(2)});

    auto unknown = linear_chain(3);
    unknown.edges.insert({P(2), P(9)});
    CHECK(validate_graph(unknown).has_value());
  }

  TEST_CASE("random layered graphs round-trip their stages") {
    Rng rng(51);
    for (int k = 0; k < 200; ++k) {
      const auto layers = 1 + uniform_below(rng, 5);
      const auto width = 1 + uniform_below(rng, 4);
      const auto dag = random_layered_dag(rng, layers, width, uniform01(rng));
      CHECK_FALSE(validate_graph(dag.graph).has_value());
      CHECK(stages(dag.graph) == dag.assigned_stage);
      for (std::uint32_t p = 0; p < dag.graph.parties; ++p) {
        if (dag.assigned_stage[p] > 0) CHECK_FALSE(dag.graph.suppliers(P(p)).empty());
      }
    }
  }

  TEST_CASE("items travel the example graph and verify at every edge") {
    ChainFixture f(example_graph());
    auto a = f.run.new_item(f.id(0));
    CHECK(f.run.ship(f.id(0), P(3), a) == Status::Ok);
    CHECK(f.run.deliver(f.id(3), a).verified());
    CHECK(f.run.ship(f.id(3), P(6), a) == Status::Ok);
    CHECK(f.run.deliver(f.id(6), a).verified());
    CHECK(a.holder == P(6));
    CHECK(a.stage_history ==
          std::vector<std::pair<std::size_t, PartyId>>{{0, P(0)}, {1, P(3)}, {2, P(6)}});

    auto b = f.run.new_item(f.id(2));
    CHECK(f.run.ship(f.id(2), P(4), b) == Status::Ok);
    CHECK(f.run.deliver(f.id(4), b).verified());
    CHECK(f.run.ship(f.id(4), P(7), b) == Status::Ok);
    CHECK(f.run.deliver(f.id(7), b).verified());
  }

  TEST_CASE("shipping along a missing edge throws") {
    ChainFixture f(example_graph());
    auto a = f.run.new_item(f.id(1));
    CHECK_THROWS_AS(f.run.ship(f.id(1), P(4), a), EdgeAbsent);
    CHECK_THROWS_AS(f.run.hand_over(a, P(1), P(5)), EdgeAbsent);
  }

  TEST_CASE("only stage-0 parties produce and only the holder ships") {
    ChainFixture f(linear_chain(3));
    CHECK_THROWS_AS(f.run.new_item(f.id(1)), ScenarioError);
    auto a = f.run.new_item(f.id(0));
    CHECK_THROWS_AS(f.run.ship(f.id(1), P(2), a), ScenarioError);
    CHECK(f.run.ship(f.id(0), P(1), a) == Status::Ok);
    CHECK_THROWS_AS(f.run.deliver(f.id(2), a), ScenarioError);
  }

  TEST_CASE("double shipment reports KeyExists") {
    ChainFixture f(linear_chain(3));
    auto a = f.run.new_item(f.id(0));
    CHECK(f.run.ship(f.id(0), P(1), a) == Status::Ok);
    CHECK(f.contract.ship_item(f.id(0), P(1), a.item) == Status::KeyExists);
    CHECK_THROWS_AS(f.run.ship(f.id(0), P(1), a), ScenarioError);
  }

  TEST_CASE("item ids are distinct per producer") {
    ChainFixture f(example_graph());
    std::set<ItemId> ids;
    for (int k = 0; k < 4; ++k) {
      for (std::uint32_t p : {0u, 1u, 2u}) ids.insert(f.run.fabricate(P(p)).item);
    }
    CHECK(ids.size() == 12);
  }

  TEST_CASE("delivery without a shipment record raises no_ship") {
    ChainFixture f(linear_chain(3));
    auto a = f.run.new_item(f.id(0));
    f.run.hand_over(a, P(0), P(1));
    const auto out = f.run.deliver(f.id(1), a);
    CHECK(out.status == Status::NoShip);
    CHECK_FALSE(out.verified());
    CHECK(a.holder == P(1));
  }

  TEST_CASE("graph and contract must agree") {
    const auto setup = make_pki(3, 1);
    const ContractConfig cfg{10, 9, 3};
    Consortium net(setup.pki, setup.identities, {DeliveryPolicy::Fifo, 1}, make_tracking_validator(cfg));
    TrackingContract contract(net, cfg);
    Rng rng(1);
    CHECK_THROWS_AS(SupplyChainRun(linear_chain(4), contract, PufParams{}, rng), ScenarioError);
    auto bad = linear_chain(3);
    bad.edges.insert({P(0), P(2)});
    CHECK_THROWS_AS(SupplyChainRun(bad, contract, PufParams{}, rng), ScenarioError);
  }
}
