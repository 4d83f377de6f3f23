#include "pufchain/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "json.hpp"
#include "pufchain/supply_chain.hpp"
#include "pufchain/tracking.hpp"

namespace pufchain {
namespace {

using Json = nlohmann::ordered_json;

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::size_t> sample_indices(Rng& rng, std::size_t population, std::size_t k) {
  std::vector<std::size_t> idx(population);
  for (std::size_t i = 0; i < population; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_below(rng, population - i)]);
  idx.resize(k);
  return idx;
}

struct ProtoSetup {
  PkiSetup keys;
  Consortium net;
  TrackingContract contract;
  Rng rng;
  SupplyChainRun run;

  explicit ProtoSetup(const PrototypeConfig& c)
      : keys(make_pki(3, mix_seed(c.seed, 0x70726f746f))),
        net(keys.pki, keys.identities, NetworkOptions{c.policy, mix_seed(c.seed, 0x6e6574)},
            make_tracking_validator({c.challenges, c.required, 3})),
        contract(net, ContractConfig{c.challenges, c.required, 3}),
        rng(mix_seed(c.seed, 0x72756e)),
        run(linear_chain(3), contract, c.puf, rng) {}

  const PartyIdentity& id(std::uint32_t p) const { return keys.identities.at(p); }
};

void record(ScenarioReport& rep, const ItemInstance& item, PartyId s, PartyId b,
            const DeliveryOutcome& d) {
  EdgeOutcome e{to_string(item.item), s, b, to_string(d.status), 0};
  if (d.record) {
    e.outcome = d.record->succeeded ? "succeeded" : "failed";
    e.match_count = d.record->match_count;
  } else {
    rep.alerts.push_back(to_string(d.status) + " " + to_string(s) + "->" + to_string(b) + " " +
                         to_string(item.item));
  }
  rep.verifications.push_back(std::move(e));
}

void check(ScenarioReport& rep, std::string name, bool ok, std::string detail) {
  rep.checks.push_back({std::move(name), ok, std::move(detail)});
}

std::string ratio(std::size_t a, std::size_t b) {
  return std::to_string(a) + "/" + std::to_string(b);
}

Json party_json(PartyId p) { return p.index; }

}  // namespace

ConfigError::ConfigError(const std::string& message, std::string source, std::size_t line)
    : std::runtime_error(source.empty() ? message
                                        : source + (line ? ":" + std::to_string(line) : "") +
                                              ": " + message),
      source_(std::move(source)),
      line_(line) {}

void TuningConfig::validate() const {
  if (challenges == 0) throw ConfigError("C must be positive");
  if (r_min < 1 || r_max > challenges || r_min > r_max)
    throw ConfigError("R range [" + std::to_string(r_min) + ", " + std::to_string(r_max) +
                      "] must lie within [1, C]");
  if (tuning_devices == 0 || tuning_devices > devices)
    throw ConfigError("tuning devices must be between 1 and the device count");
  if (repetitions == 0) throw ConfigError("repetitions must be positive");
  if (pair_pool < challenges) throw ConfigError("pair pool smaller than C");
  try {
    puf.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

TuningReport run_tuning(const TuningConfig& config) {
  config.validate();
  Rng rng(mix_seed(config.seed, 0x74756e65));
  std::vector<PufDevice> devices;
  std::vector<std::vector<ChallengeResponsePair>> pools(config.devices);
  for (std::size_t d = 0; d < config.devices; ++d) {
    devices.push_back(make_device(config.puf, rng));
    std::unordered_set<std::uint64_t> used;
    auto& pool = pools[d];
    pool.reserve(config.pair_pool);
    while (pool.size() < config.pair_pool) {
      const auto c = rng();
      if (!used.insert(c).second) continue;
      pool.push_back({c, stable_response(devices[d], c)});
    }
  }

  TuningReport report;
  report.config = config;
  report.tuning_indices = sample_indices(rng, config.devices, config.tuning_devices);
  std::sort(report.tuning_indices.begin(), report.tuning_indices.end());

  const auto span = config.r_max - config.r_min + 1;
  for (auto t : report.tuning_indices) {
    std::vector<TuningRow> rows(span);
    for (std::size_t k = 0; k < span; ++k) {
      rows[k].puf_index = t;
      rows[k].r = config.r_min + k;
    }
    for (std::size_t d = 0; d < config.devices; ++d) {
      for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
        ChallengeResponseVector expected;
        for (auto i : sample_indices(rng, pools[d].size(), config.challenges))
          expected.pairs.push_back(pools[d][i]);
        const auto r = match_count(expected, measure(devices[t], expected));
        for (auto& row : rows) {
          const bool accepted = passes(r, row.r);
          if (d == t) {
            ++row.own_trials;
            row.own_accepted += accepted;
          } else {
            ++row.cross_trials;
            row.cross_accepted += accepted;
          }
        }
      }
    }
    for (auto& row : rows) {
      row.tar = static_cast<double>(row.own_accepted) / static_cast<double>(row.own_trials);
      row.frr = static_cast<double>(row.own_trials - row.own_accepted) /
                static_cast<double>(row.own_trials);
      row.far = static_cast<double>(row.cross_accepted) / static_cast<double>(row.cross_trials);
      row.trr = static_cast<double>(row.cross_trials - row.cross_accepted) /
                static_cast<double>(row.cross_trials);
      report.rows.push_back(row);
    }
  }
  return report;
}

std::vector<ExpectationCheck> tuning_checks(const TuningReport& report) {
  std::vector<ExpectationCheck> out;
  bool tar = true, identities = true, monotone = true, far9 = true;
  std::size_t rows9 = 0;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    tar &= row.own_accepted == row.own_trials;
    identities &= std::abs(row.tar + row.frr - 1.0) < 1e-12 &&
                  std::abs(row.far + row.trr - 1.0) < 1e-12;
    if (i > 0 && report.rows[i - 1].puf_index == row.puf_index)
      monotone &= row.cross_accepted <= report.rows[i - 1].cross_accepted;
    if (row.r == 9) {
      ++rows9;
      far9 &= row.cross_accepted == 0;
    }
  }
  out.push_back({"tar_one_frr_zero", tar, "own-CRD validations accepted at every R"});
  out.push_back({"far_zero_at_R9", rows9 > 0 && far9, "no cross-CRD acceptance at R = 9"});
  out.push_back({"far_non_increasing", monotone, "FAR never grows with R"});
  out.push_back({"rate_identities", identities, "TAR+FRR and FAR+TRR from the same trial sets"});
  return out;
}

void PrototypeConfig::validate() const {
  if (challenges == 0 || required < 1 || required > challenges)
    throw ConfigError("R must lie in [1, C]");
  try {
    puf.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

bool ScenarioReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

ScenarioReport run_prototype_honest(const PrototypeConfig& config) {
  config.validate();
  ProtoSetup s(config);
  ScenarioReport rep;
  rep.name = "prototype-honest";
  rep.seed = config.seed;
  std::size_t ok = 0, total = 0;
  for (std::size_t k = 0; k < config.honest_items; ++k) {
    auto item = s.run.new_item(s.id(0));
    for (std::uint32_t p = 0; p < 2; ++p) {
      s.run.ship(s.id(p), PartyId{p + 1}, item);
      const auto d = s.run.deliver(s.id(p + 1), item);
      record(rep, item, PartyId{p}, PartyId{p + 1}, d);
      ++total;
      if (!d.verified()) break;
      ++ok;
    }
  }
  const auto expected = 2 * config.honest_items;
  check(rep, "all_verifications_succeed", ok == expected && total == expected,
        ratio(ok, expected) + " verifications succeeded");
  check(rep, "no_alerts", rep.alerts.empty(), std::to_string(rep.alerts.size()) + " alerts");
  rep.notes.push_back("TAR = " + fixed6(total ? double(ok) / double(total) : 0.0) +
                      ", FRR = " + fixed6(total ? double(total - ok) / double(total) : 0.0));
  rep.ledger_jsonl = export_jsonl(s.net.log(NodeId{0}), s.keys.pki, render_key);
  return rep;
}

ScenarioReport run_prototype_adversary(const PrototypeConfig& config) {
  config.validate();
  ProtoSetup s(config);
  ScenarioReport rep;
  rep.name = "prototype-adversary";
  rep.seed = config.seed;
  std::size_t intake_ok = 0, rejected = 0, attributed = 0;
  for (std::size_t k = 0; k < config.substituted_items; ++k) {
    auto item = s.run.new_item(s.id(0));
    s.run.ship(s.id(0), PartyId{1}, item);
    const auto intake = s.run.deliver(s.id(1), item);
    record(rep, item, PartyId{0}, PartyId{1}, intake);
    intake_ok += intake.verified();
    // The logistic organisation swaps in a device of its own.
    item.device = make_device(config.puf, s.run.rng());
    s.run.ship(s.id(1), PartyId{2}, item);
    const auto d = s.run.deliver(s.id(2), item);
    record(rep, item, PartyId{1}, PartyId{2}, d);
    if (d.record && !d.record->succeeded) {
      ++rejected;
      const auto failed = edge_key(Tag::VerificationFailed, PartyId{1}, PartyId{2}, item.item);
      attributed += s.contract.contains(PartyId{0}, failed) && d.record->supplier == PartyId{1};
    }
  }
  const auto n = config.substituted_items;
  check(rep, "intake_at_logistic_succeeds", intake_ok == n, ratio(intake_ok, n));
  check(rep, "substitutes_fail_at_distribution", rejected == n, ratio(rejected, n));
  check(rep, "failures_attributed_to_logistic", attributed == n, ratio(attributed, n));
  rep.notes.push_back("FAR = " + fixed6(n ? double(n - rejected) / double(n) : 0.0) +
                      ", TRR = " + fixed6(n ? double(rejected) / double(n) : 0.0));
  rep.ledger_jsonl = export_jsonl(s.net.log(NodeId{0}), s.keys.pki, render_key);
  return rep;
}

SafetySweepResult run_safety_sweep(ByzantineStrategy strategy, const SafetySweepConfig& config) {
  SafetySweepResult out;
  out.strategy = strategy;
  for (std::size_t s = 0; s < config.schedules; ++s) {
    const auto seed = mix_seed(config.seed, s);
    auto keys = make_pki(config.nodes, seed);
    const NodeId byz{static_cast<std::uint32_t>(s % config.nodes)};
    Consortium net(keys.pki, keys.identities, NetworkOptions{config.policy, seed}, {},
                   {{byz, byzantine_factory(strategy, mix_seed(seed, 0x62797a))}});
    std::vector<Digest> ids;
    for (std::size_t k = 0; k < config.transactions; ++k) {
      // Keys repeat so that the write-once rule is exercised.
      const auto& submitter = keys.identities[k % config.nodes];
      ids.push_back(net.submit(make_transaction(submitter, to_bytes("k/" + std::to_string(k % 4)),
                                                to_bytes("v/" + std::to_string(k)))));
    }
    try {
      for (const auto& id : ids) net.await(id);
      net.run_until_idle(100'000);
    } catch (const LivenessFailure&) {
      ++out.liveness_failures;
    }
    const auto safety = check_consensus_safety(net);
    out.prefix_violations += safety.prefix_violations;
    out.invalid_signatures += safety.invalid_signatures;
    out.write_once_violations += safety.write_once_violations;
    out.events += net.events_processed();
    ++out.schedules;
  }
  return out;
}

AttackSuiteReport run_attack_suite(const AttackSuite& suite) {
  AttackSuiteReport out;
  out.suite = suite;
  for (std::size_t k = 0; k < suite.seeds; ++k) {
    const auto seed = suite.first_seed + k;
    const auto r = run_attack(suite.adversary, suite.scenario, seed);
    ++out.runs;
    out.met += r.expectation_met();
    out.detected += r.detected;
    out.attributed_as_expected += r.attributed_to == r.expected.attributed_to;
    out.evidence_matched += r.evidence_matches();
    if (r.safety && !r.safety->ok()) ++out.safety_violations;
    if (!r.expectation_met()) out.failing_seeds.push_back(seed);
    if (!r.note.empty() &&
        std::find(out.notes.begin(), out.notes.end(), r.note) == out.notes.end())
      out.notes.push_back(r.note);
  }
  return out;
}

std::vector<AttackSuite> load_attack_suites(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ConfigError("scenario directory not found", dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<AttackSuite> suites;
  for (const auto& f : files) suites.push_back(load_attack_suite(f));
  return suites;
}

std::vector<AttackSuiteReport> run_attack_matrix(const std::filesystem::path& dir) {
  std::vector<AttackSuiteReport> out;
  for (const auto& s : load_attack_suites(dir)) out.push_back(run_attack_suite(s));
  return out;
}

std::string tuning_csv(const TuningReport& report) {
  std::string out = "puf_index,R,TAR,FAR,TRR,FRR\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.puf_index) + "," + std::to_string(r.r) + "," + fixed6(r.tar) + "," +
           fixed6(r.far) + "," + fixed6(r.trr) + "," + fixed6(r.frr) + "\n";
  }
  return out;
}

std::string to_json(const TuningReport& report) {
  const auto& c = report.config;
  Json j;
  j["experiment"] = "tuning";
  j["seed"] = c.seed;
  j["config"] = {{"devices", c.devices},         {"tuning_devices", c.tuning_devices},
                 {"challenges", c.challenges},   {"r_min", c.r_min},
                 {"r_max", c.r_max},             {"repetitions", c.repetitions},
                 {"pair_pool", c.pair_pool},     {"width", c.puf.width},
                 {"noise_rate", c.puf.noise_rate}};
  j["notes"] = Json::array({"each repetition draws a fresh C-subset from the device's pair pool"});
  j["tuning_indices"] = report.tuning_indices;
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"puf_index", r.puf_index},       {"R", r.r},
                    {"TAR", r.tar},                   {"FAR", r.far},
                    {"TRR", r.trr},                   {"FRR", r.frr},
                    {"own_trials", r.own_trials},     {"own_accepted", r.own_accepted},
                    {"cross_trials", r.cross_trials}, {"cross_accepted", r.cross_accepted}});
  }
  j["rows"] = std::move(rows);
  Json checks = Json::array();
  for (const auto& ch : tuning_checks(report))
    checks.push_back({{"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
  j["checks"] = std::move(checks);
  return j.dump(2) + "\n";
}

std::string to_json(const ScenarioReport& report) {
  Json j;
  j["scenario"] = report.name;
  j["seed"] = report.seed;
  j["notes"] = report.notes;
  Json v = Json::array();
  for (const auto& e : report.verifications) {
    v.push_back({{"item", e.item},
                 {"supplier", party_json(e.supplier)},
                 {"buyer", party_json(e.buyer)},
                 {"outcome", e.outcome},
                 {"match_count", e.match_count}});
  }
  j["verifications"] = std::move(v);
  j["alerts"] = report.alerts;
  Json checks = Json::array();
  for (const auto& ch : report.checks)
    checks.push_back({{"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
  j["checks"] = std::move(checks);
  j["passed"] = report.passed();
  return j.dump(2) + "\n";
}

std::string to_json(const std::vector<AttackSuiteReport>& reports) {
  Json arr = Json::array();
  for (const auto& r : reports) {
    const auto& adv = r.suite.adversary;
    Json adversary = {{"party", adv.controlled_party.index}, {"attack", to_string(adv.attack)}};
    if (adv.attack == AttackKind::ByzantineNode) adversary["strategy"] = to_string(adv.strategy);
    if (adv.attack == AttackKind::MethodAbuse) adversary["variant"] = to_string(adv.variant);
    if (adv.clone_queries) adversary["clone_queries"] = adv.clone_queries;
    if (adv.tamper_after_register) adversary["tamper_after_register"] = true;
    if (!adv.enabled) adversary["enabled"] = false;
    const auto expected = expected_outcome(adv, r.suite.scenario);
    Json evidence = Json::array();
    for (const auto& k : expected.ledger_evidence) evidence.push_back(to_string(k));
    arr.push_back({{"name", r.suite.name},
                   {"adversary", adversary},
                   {"parties", r.suite.scenario.parties},
                   {"width", r.suite.scenario.puf.width},
                   {"noise_rate", r.suite.scenario.puf.noise_rate},
                   {"policy", to_string(r.suite.scenario.policy)},
                   {"first_seed", r.suite.first_seed},
                   {"runs", r.runs},
                   {"met", r.met},
                   {"detected", r.detected},
                   {"attributed_as_expected", r.attributed_as_expected},
                   {"evidence_matched", r.evidence_matched},
                   {"safety_violations", r.safety_violations},
                   {"expected_detected", expected.detected},
                   {"expected_attribution",
                    expected.attributed_to ? Json(expected.attributed_to->index) : Json(nullptr)},
                   {"expected_evidence", std::move(evidence)},
                   {"failing_seeds", r.failing_seeds},
                   {"notes", r.notes},
                   {"passed", r.passed()}});
  }
  return arr.dump(2) + "\n";
}

std::string attack_matrix_csv(const std::vector<AttackSuiteReport>& reports) {
  std::string out = "name,attack,runs,met,detected,attributed_as_expected,evidence_matched,safety_violations\n";
  for (const auto& r : reports) {
    out += r.suite.name + "," + to_string(r.suite.adversary.attack) + "," + std::to_string(r.runs) +
           "," + std::to_string(r.met) + "," + std::to_string(r.detected) + "," +
           std::to_string(r.attributed_as_expected) + "," + std::to_string(r.evidence_matched) +
           "," + std::to_string(r.safety_violations) + "\n";
  }
  return out;
}

}  // namespace pufchain
