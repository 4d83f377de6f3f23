#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pufchain/experiments.hpp"
#include "support/binomial.hpp"
#include "support/consensus_check.hpp"

using namespace pufchain;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Tuning at the default parameters.
Outcome tuning() {
  const auto t0 = Clock::now();
  const auto report = run_tuning(TuningConfig{});
  const double elapsed = seconds_since(t0);
  Outcome o{true, {}};
  for (const auto& c : tuning_checks(report)) {
    if (!c.passed) {
      o.passed = false;
      o.detail += c.name + " (" + c.detail + "); ";
    }
  }
  if (elapsed >= 10.0) {
    o.passed = false;
    o.detail += fmt("runtime %.1fs; ", elapsed);
  }
  if (o.passed) {
    o.detail = fmt("TAR=1 FRR=0 for R in [5,9], FAR=0 at R=9, FAR non-increasing (%.2fs)", elapsed);
  } else {
    // Each own trial fails R=9 when two or more of C=10 responses carry a
    // flipped bit; the chance that all 45 own trials pass is well below one.
    const double q = std::pow(1.0 - report.config.puf.noise_rate, report.config.puf.width);
    const double reject = 1.0 - pufchain::testing::binomial_tail(10, 9, q);
    const double all = std::pow(1.0 - reject, 3.0 * 15.0);
    for (const auto& row : report.rows) {
      if (row.own_accepted != row.own_trials)
        o.detail += fmt("device %zu R=%zu TAR %zu/%zu; ", row.puf_index, row.r, row.own_accepted,
                        row.own_trials);
    }
    o.detail += fmt("P(own trial rejected at R=9)=%.2e, P(all 45 accepted)=%.3f", reject, all);
  }
  return o;
}

Outcome prototype() {
  const auto t0 = Clock::now();
  const PrototypeConfig cfg;
  const auto honest = run_prototype_honest(cfg);
  const auto adv = run_prototype_adversary(cfg);
  const double elapsed = seconds_since(t0);
  std::size_t ok = 0;
  for (const auto& v : honest.verifications) ok += v.outcome == "succeeded" ? 1 : 0;
  std::size_t failed_at_dist = 0;
  for (const auto& v : adv.verifications) {
    if (v.outcome == "failed" && v.buyer == PartyId{2} && v.supplier == PartyId{1}) ++failed_at_dist;
  }
  Outcome o;
  o.passed = honest.passed() && adv.passed() && ok == 16 && honest.verifications.size() == 16 &&
             failed_at_dist == 3 && elapsed < 5.0;
  o.detail = fmt("honest %zu/16 succeeded, substituted %zu/3 failed at p2 blaming p1 (%.2fs)", ok,
                 failed_at_dist, elapsed);
  return o;
}

Outcome attack_matrix(const fs::path& dir) {
  const auto t0 = Clock::now();
  const auto suites = load_attack_suites(dir);
  struct Want {
    AttackKind kind;
    std::optional<MethodAbuseVariant> variant;
    bool enabled;
    bool detected;
  };
  const std::map<std::string, Want> wanted = {
      {"forge-in-transit", {AttackKind::ForgeInTransit, std::nullopt, true, true}},
      {"forge-pre-crd", {AttackKind::ForgePreCrd, std::nullopt, true, false}},
      {"blame-supplier", {AttackKind::BlameSupplier, std::nullopt, true, true}},
      {"skip-register-item", {AttackKind::MethodAbuse, MethodAbuseVariant::SkipRegisterItem, true, true}},
      {"skip-ship-item", {AttackKind::MethodAbuse, MethodAbuseVariant::SkipShipItem, true, true}},
  };
  std::map<std::string, std::size_t> covered;
  Outcome o{true, {}};
  for (const auto& suite : suites) {
    const auto& a = suite.adversary;
    for (const auto& [label, w] : wanted) {
      if (a.attack != w.kind || a.enabled != w.enabled) continue;
      if (w.variant && a.variant != *w.variant) continue;
      if (w.kind == AttackKind::ForgePreCrd && a.tamper_after_register) continue;
      if (suite.seeds < 100) continue;
      const auto r = run_attack_suite(suite);
      const auto expected_detected = w.detected ? r.runs : 0;
      const bool ok = r.passed() && r.detected == expected_detected &&
                      r.attributed_as_expected == r.runs && r.evidence_matched == r.runs;
      ++covered[label];
      if (!ok) {
        o.passed = false;
        o.detail += fmt("%s: met %zu/%zu detected %zu; ", suite.name.c_str(), r.met, r.runs, r.detected);
      }
    }
  }
  for (const auto& [label, w] : wanted) {
    if (!covered.count(label)) {
      o.passed = false;
      o.detail += "no 100-seed suite for " + label + "; ";
    }
  }
  if (o.passed) {
    std::size_t n = 0;
    for (const auto& [k, v] : covered) n += v;
    o.detail = fmt("%zu suites x 100 seeds met (%.1fs)", n, seconds_since(t0));
  }
  return o;
}

// Sweep with the safety check kept in the test tree.
Outcome consensus_safety() {
  const auto t0 = Clock::now();
  const SafetySweepConfig cfg;
  std::size_t prefix = 0, sigs = 0, write_once = 0, stuck = 0, runs = 0;
  for (auto strategy : kAllStrategies) {
    for (std::size_t s = 0; s < cfg.schedules; ++s) {
      const auto seed = mix_seed(cfg.seed, s);
      auto keys = make_pki(cfg.nodes, seed);
      const NodeId byz{static_cast<std::uint32_t>(s % cfg.nodes)};
      Consortium net(keys.pki, keys.identities, NetworkOptions{cfg.policy, seed}, {},
                     {{byz, byzantine_factory(strategy, mix_seed(seed, 0x62797a))}});
      std::vector<Digest> ids;
      for (std::size_t k = 0; k < cfg.transactions; ++k) {
        ids.push_back(net.submit(make_transaction(keys.identities[k % cfg.nodes],
                                                  to_bytes("k/" + std::to_string(k % 4)),
                                                  to_bytes("v/" + std::to_string(k)))));
      }
      try {
        for (const auto& id : ids) net.await(id);
        net.run_until_idle(100'000);
      } catch (const LivenessFailure&) {
        ++stuck;
      }
      const auto r = pufchain::testing::check_safety(net);
      prefix += r.prefix_violations;
      sigs += r.invalid_signatures;
      write_once += r.write_once_violations;
      ++runs;
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.passed = prefix == 0 && sigs == 0 && write_once == 0 && runs == 4 * cfg.schedules && elapsed < 60.0;
  o.detail = fmt("%zu schedules: prefix %zu, invalid signatures %zu, write-once %zu, stalled %zu (%.1fs)",
                 runs, prefix, sigs, write_once, stuck, elapsed);
  return o;
}

std::optional<std::string> write_once_property() {
  Rng rng(101);
  for (int round = 0; round < 500; ++round) {
    WriteOnceStore s;
    std::map<Bytes, std::pair<Bytes, PartyId>> first;
    for (int op = 0; op < 80; ++op) {
      const auto key = to_bytes(std::to_string(uniform_below(rng, 20)));
      const auto value = to_bytes(std::to_string(rng()));
      const PartyId who{static_cast<std::uint32_t>(uniform_below(rng, 4))};
      const bool fresh = first.emplace(key, std::make_pair(value, who)).second;
      if ((s.set(key, value, who) == SetResult::Ok) != fresh) return "set result disagrees";
    }
    for (const auto& [k, v] : first) {
      const auto* e = s.find(k);
      if (!e || e->value != v.first || e->submitter != v.second) return "first write not kept";
    }
  }
  return std::nullopt;
}

std::optional<std::string> device_properties() {
  Rng rng(102);
  for (int d = 0; d < 20; ++d) {
    auto dev = make_device({8, 0.0}, rng);
    const auto copy = dev;
    for (int k = 0; k < 500; ++k) {
      const auto c = rng();
      if (dev.query(c) != copy.ideal_response(c) || dev.query(c) != dev.ideal_response(c))
        return "untampered device not exact at zero noise";
    }
  }
  const unsigned W = 8;
  const std::size_t n = 10000;
  auto dev = make_device({W, 0.0}, rng);
  auto forged = tamper(dev, rng);
  std::size_t same = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto c = rng();
    same += forged.query(c) == dev.query(c) ? 1 : 0;
  }
  const double p = std::ldexp(1.0, -static_cast<int>(W));
  const double rate = static_cast<double>(same) / n;
  if (std::abs(rate - p) > pufchain::testing::three_sigma(p, n))
    return fmt("tampered collision rate %.5f vs %.5f", rate, p);
  return std::nullopt;
}

std::optional<std::string> match_count_property() {
  Rng rng(103);
  for (int t = 0; t < 2000; ++t) {
    ChallengeResponseVector a, b;
    const auto n = uniform_below(rng, 16);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = rng();
      a.pairs.push_back({c, rng() & 3});
      b.pairs.push_back({c, rng() & 3});
    }
    std::size_t pairwise = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (a.pairs[i].challenge == b.pairs[j].challenge && a.pairs[i].response == b.pairs[j].response)
          ++pairwise;
      }
    }
    if (match_count(a, b) != pairwise || match_count(b, a) != pairwise) return "match_count differs";
  }
  return std::nullopt;
}

std::optional<std::string> far_oracle_property() {
  TuningConfig c;
  c.devices = 5;
  c.tuning_devices = 2;
  c.r_min = 1;
  c.r_max = 10;
  c.repetitions = 200;
  c.pair_pool = 500;
  c.puf = {2, 0.002};
  c.seed = 104;
  const auto report = run_tuning(c);
  for (std::size_t r = c.r_min; r <= c.r_max; ++r) {
    std::size_t trials = 0, accepted = 0;
    for (const auto& row : report.rows) {
      if (row.r != r) continue;
      trials += row.cross_trials;
      accepted += row.cross_accepted;
    }
    const double expect = pufchain::testing::binomial_tail(c.challenges, r, 0.25);
    const double band =
        std::max(pufchain::testing::three_sigma(expect, trials), 1.5 / static_cast<double>(trials));
    if (std::abs(static_cast<double>(accepted) / trials - expect) > band)
      return fmt("FAR at R=%zu: %zu/%zu vs %.5f", r, accepted, trials, expect);
  }
  return std::nullopt;
}

std::optional<std::string> determinism_property(const fs::path& dir) {
  TuningConfig t;
  t.repetitions = 3;
  if (tuning_csv(run_tuning(t)) != tuning_csv(run_tuning(t))) return "tuning csv differs";
  if (to_json(run_tuning(t)) != to_json(run_tuning(t))) return "tuning json differs";
  const PrototypeConfig p;
  if (to_json(run_prototype_honest(p)) != to_json(run_prototype_honest(p))) return "prototype differs";
  if (to_json(run_prototype_adversary(p)) != to_json(run_prototype_adversary(p)))
    return "prototype adversary differs";
  auto suites = load_attack_suites(dir);
  for (auto& s : suites) s.seeds = 3;
  std::vector<AttackSuiteReport> a, b;
  for (const auto& s : suites) {
    a.push_back(run_attack_suite(s));
    b.push_back(run_attack_suite(s));
  }
  if (to_json(a) != to_json(b) || attack_matrix_csv(a) != attack_matrix_csv(b))
    return "attack reports differ";
  return std::nullopt;
}

Outcome properties(const fs::path& dir) {
  const std::vector<std::pair<std::string, std::optional<std::string>>> results = {
      {"write-once", write_once_property()},
      {"device model", device_properties()},
      {"match_count", match_count_property()},
      {"FAR oracle", far_oracle_property()},
      {"determinism", determinism_property(dir)},
  };
  Outcome o{true, {}};
  for (const auto& [name, err] : results) {
    if (err) {
      o.passed = false;
      o.detail += name + ": " + *err + "; ";
    }
  }
  if (o.passed) o.detail = "write-once, device model, match_count, FAR oracle, determinism";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path(PUFCHAIN_SCENARIO_DIR);
  const std::vector<std::pair<std::string, Outcome (*)(const fs::path&)>> criteria = {
      {"tuning", [](const fs::path&) { return tuning(); }},
      {"prototype", [](const fs::path&) { return prototype(); }},
      {"attack-matrix", attack_matrix},
      {"consensus-safety", [](const fs::path&) { return consensus_safety(); }},
      {"properties", properties},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run(dir);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d %s: %s\n", o.passed ? "PASS" : "FAIL", ++index, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.passed ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
