#include <cmath>

#include "doctest.h"
#include "pufchain/experiments.hpp"
#include "support/binomial.hpp"

using namespace pufchain;
using pufchain::testing::binomial_tail;
using pufchain::testing::three_sigma;

namespace {

TuningConfig small_tuning() {
  TuningConfig c;
  c.devices = 5;
  c.tuning_devices = 2;
  c.r_min = 1;
  c.r_max = 10;
  c.repetitions = 200;
  c.pair_pool = 500;
  c.puf = {2, 0.002};
  c.seed = 7;
  return c;
}

std::size_t config_error_line(const std::string& text) {
  try {
    (void)parse_attack_suite(text, "suite.json");
  } catch (const ConfigError& e) {
    CHECK(e.source() == "suite.json");
    return e.line();
  }
  FAIL("no ConfigError");
  return 0;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("rate identities hold on every row") {
    const auto report = run_tuning(small_tuning());
    CHECK(report.rows.size() == 2 * 10);
    for (const auto& row : report.rows) {
      CHECK(row.tar + row.frr == doctest::Approx(1.0));
      CHECK(row.far + row.trr == doctest::Approx(1.0));
      CHECK(row.own_trials == 200);
      CHECK(row.cross_trials == 4 * 200);
    }
  }

  TEST_CASE("acceptance counts do not increase with R") {
    const auto report = run_tuning(small_tuning());
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
      const auto& a = report.rows[i - 1];
      const auto& b = report.rows[i];
      if (a.puf_index != b.puf_index) continue;
      CHECK(b.r == a.r + 1);
      CHECK(b.cross_accepted <= a.cross_accepted);
      CHECK(b.own_accepted <= a.own_accepted);
    }
  }

  TEST_CASE("false acceptance follows the binomial tail") {
    // A foreign device matches each pair with probability 2^-W.
    const auto cfg = small_tuning();
    const auto report = run_tuning(cfg);
    const double p = std::ldexp(1.0, -static_cast<int>(cfg.puf.width));
    for (std::size_t r = cfg.r_min; r <= cfg.r_max; ++r) {
      std::size_t trials = 0, accepted = 0;
      for (const auto& row : report.rows) {
        if (row.r != r) continue;
        trials += row.cross_trials;
        accepted += row.cross_accepted;
      }
      const double expect = binomial_tail(cfg.challenges, r, p);
      const double band = std::max(three_sigma(expect, trials), 1.5 / static_cast<double>(trials));
      INFO("R=", r, " observed ", accepted, "/", trials, " expected ", expect);
      CHECK(std::abs(static_cast<double>(accepted) / trials - expect) <= band);
    }
  }

  TEST_CASE("default tuning: no false acceptance at R=9 and identities hold") {
    const auto report = run_tuning(TuningConfig{});
    CHECK(report.rows.size() == 3 * 5);
    for (const auto& check : tuning_checks(report)) {
      if (check.name == "far_zero_at_R9" || check.name == "rate_identities" ||
          check.name == "far_non_increasing") {
        INFO(check.name, ": ", check.detail);
        CHECK(check.passed);
      }
    }
  }

  TEST_CASE("tuning is reproducible byte for byte") {
    const auto cfg = small_tuning();
    CHECK(tuning_csv(run_tuning(cfg)) == tuning_csv(run_tuning(cfg)));
    CHECK(to_json(run_tuning(cfg)) == to_json(run_tuning(cfg)));
    auto other = cfg;
    other.seed = 8;
    CHECK(tuning_csv(run_tuning(cfg)) != tuning_csv(run_tuning(other)));
  }

  TEST_CASE("tuning CSV layout") {
    const auto csv = tuning_csv(run_tuning(small_tuning()));
    CHECK(csv.rfind("puf_index,R,TAR,FAR,TRR,FRR\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 20);
  }

  TEST_CASE("invalid tuning parameters") {
    auto c = TuningConfig{};
    c.r_max = 11;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TuningConfig{};
    c.tuning_devices = 18;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TuningConfig{};
    c.puf.width = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("prototype reports are reproducible and pass") {
    const PrototypeConfig cfg;
    const auto honest = run_prototype_honest(cfg);
    CHECK(honest.passed());
    CHECK(to_json(honest) == to_json(run_prototype_honest(cfg)));
    CHECK(honest.ledger_jsonl == run_prototype_honest(cfg).ledger_jsonl);
    const auto adv = run_prototype_adversary(cfg);
    CHECK(adv.passed());
    CHECK(to_json(adv) == to_json(run_prototype_adversary(cfg)));
  }

  TEST_CASE("scenario file errors carry line numbers") {
    CHECK(config_error_line("{\n  \"name\": \"x\",\n  \"bogus\": 1,\n  \"adversary\": {\"attack\": \"forge_in_transit\"}\n}") == 3);
    CHECK(config_error_line("{\n  \"name\": \"x\",\n  \"adversary\": {\n    \"attack\": \"teleport\"\n  }\n}") == 4);
    CHECK(config_error_line("{\n  \"name\": \"x\",\n\n  \"parties\": -4,\n  \"adversary\": {\"attack\": \"forge_in_transit\"}\n}") == 4);
    CHECK(config_error_line("{\n  \"name\": \"x\",\n  \"adversary\": {\"attack\": \"forge_in_transit\",,}\n}") == 3);
    CHECK(config_error_line("{\n  \"name\": \"x\"\n}") >= 1);
  }

  TEST_CASE("scenario file with defaults") {
    const auto s = parse_attack_suite(
        R"({"name": "t", "adversary": {"party": 2, "attack": "blame_supplier"}})", "t.json");
    CHECK(s.name == "t");
    CHECK(s.adversary.controlled_party == PartyId{2});
    CHECK(s.adversary.attack == AttackKind::BlameSupplier);
    CHECK(s.scenario.parties == 4);
    CHECK(s.seeds == 100);
  }

  TEST_CASE("prototype and tuning config files") {
    const auto t = parse_tuning_config(R"({"seed": 5, "repetitions": 3, "puf": {"width": 6}})", "t");
    CHECK(t.seed == 5);
    CHECK(t.repetitions == 3);
    CHECK(t.puf.width == 6);
    CHECK_THROWS_AS(parse_tuning_config(R"({"r_min": 9, "r_max": 5})", "t"), ConfigError);
    const auto p = parse_prototype_config(R"({"policy": "fifo", "honest_items": 2})", "p");
    CHECK(p.policy == DeliveryPolicy::Fifo);
    CHECK(p.honest_items == 2);
    CHECK_THROWS_AS(parse_prototype_config(R"({"policy": "random"})", "p"), ConfigError);
  }

  TEST_CASE("small attack suite runs") {
    AttackSuite s;
    s.name = "t";
    s.adversary.attack = AttackKind::ForgeInTransit;
    s.seeds = 5;
    const auto r = run_attack_suite(s);
    CHECK(r.runs == 5);
    CHECK(r.passed());
    CHECK(attack_matrix_csv({r}).find("t,forge_in_transit,5,5,5,5,5,0") != std::string::npos);
  }

  TEST_CASE("safety sweep over a few schedules") {
    SafetySweepConfig c;
    c.schedules = 20;
    for (auto s : kAllStrategies) {
      const auto r = run_safety_sweep(s, c);
      CHECK(r.schedules == 20);
      CHECK(r.prefix_violations == 0);
      CHECK(r.invalid_signatures == 0);
      CHECK(r.write_once_violations == 0);
      CHECK(r.liveness_failures == 0);
    }
  }
}
