#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pufchain/adversary.hpp"
#include "pufchain/byzantine.hpp"
#include "pufchain/consortium.hpp"
#include "pufchain/puf.hpp"

namespace pufchain {

// Invalid experiment parameters or scenario files. `line` is 1-based, 0 when
// unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::string source = {}, std::size_t line = 0);
  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

// ---- tuning ---------------------------------------------------------------

struct TuningConfig {
  std::size_t devices = 17;
  std::size_t tuning_devices = 3;
  std::size_t challenges = 10;  // C
  std::size_t r_min = 5;
  std::size_t r_max = 9;
  std::size_t repetitions = 15;
  std::size_t pair_pool = 21000;  // enrolled pairs per device
  PufParams puf{4, 0.002};
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

struct TuningRow {
  std::size_t puf_index = 0;
  std::size_t r = 0;
  double tar = 0, far = 0, trr = 0, frr = 0;
  std::size_t own_trials = 0, own_accepted = 0;
  std::size_t cross_trials = 0, cross_accepted = 0;
};

struct TuningReport {
  TuningConfig config;
  std::vector<std::size_t> tuning_indices;
  std::vector<TuningRow> rows;  // ordered by (puf_index, R)
};

TuningReport run_tuning(const TuningConfig& config);

// ---- prototype ------------------------------------------------------------

struct PrototypeConfig {
  std::size_t honest_items = 8;
  std::size_t substituted_items = 3;
  std::size_t challenges = 10;
  std::size_t required = 9;
  PufParams puf{4, 0.002};
  DeliveryPolicy policy = DeliveryPolicy::UniformRandomDelay;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EdgeOutcome {
  std::string item;
  PartyId supplier;
  PartyId buyer;
  std::string outcome;  // succeeded | failed | no_ship | no_crd | ...
  std::size_t match_count = 0;
};

struct ExpectationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ScenarioReport {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::string> notes;
  std::vector<EdgeOutcome> verifications;
  std::vector<std::string> alerts;
  std::vector<ExpectationCheck> checks;
  std::string ledger_jsonl;  // export of an honest node's log

  bool passed() const;
};

// Three organisations: manufacturer p0 -> logistic p1 -> distribution p2.
ScenarioReport run_prototype_honest(const PrototypeConfig& config);
ScenarioReport run_prototype_adversary(const PrototypeConfig& config);

// ---- consensus ------------------------------------------------------------

struct SafetySweepConfig {
  std::size_t nodes = 4;
  std::size_t schedules = 1000;
  std::size_t transactions = 6;
  DeliveryPolicy policy = DeliveryPolicy::AdversarialReorder;
  std::uint64_t seed = 1;
};

struct SafetySweepResult {
  ByzantineStrategy strategy = ByzantineStrategy::Silent;
  std::size_t schedules = 0;
  std::size_t prefix_violations = 0;
  std::size_t invalid_signatures = 0;
  std::size_t write_once_violations = 0;
  std::size_t liveness_failures = 0;
  std::uint64_t events = 0;
};

SafetySweepResult run_safety_sweep(ByzantineStrategy strategy, const SafetySweepConfig& config);

// ---- attack matrix --------------------------------------------------------

struct AttackSuite {
  std::string name;
  AttackScenario scenario;
  AdversaryConfig adversary;
  std::uint64_t first_seed = 0;
  std::size_t seeds = 100;
};

struct AttackSuiteReport {
  AttackSuite suite;
  std::size_t runs = 0;
  std::size_t met = 0;
  std::size_t detected = 0;
  std::size_t attributed_as_expected = 0;
  std::size_t evidence_matched = 0;
  std::size_t safety_violations = 0;
  std::vector<std::uint64_t> failing_seeds;
  std::vector<std::string> notes;

  bool passed() const { return met == runs; }
};

AttackSuiteReport run_attack_suite(const AttackSuite& suite);
// Every *.json suite in `dir`, in file name order; all files are parsed
// before anything runs.
std::vector<AttackSuite> load_attack_suites(const std::filesystem::path& dir);
std::vector<AttackSuiteReport> run_attack_matrix(const std::filesystem::path& dir);

// ---- scenario files -------------------------------------------------------

AttackSuite parse_attack_suite(const std::string& text, const std::string& source);
AttackSuite load_attack_suite(const std::filesystem::path& file);
TuningConfig parse_tuning_config(const std::string& text, const std::string& source);
PrototypeConfig parse_prototype_config(const std::string& text, const std::string& source);
std::string read_file(const std::filesystem::path& file);

// ---- serialisation --------------------------------------------------------

std::string tuning_csv(const TuningReport& report);
std::string to_json(const TuningReport& report);
std::string to_json(const ScenarioReport& report);
std::string to_json(const std::vector<AttackSuiteReport>& reports);
std::string attack_matrix_csv(const std::vector<AttackSuiteReport>& reports);

// Named expectation checks over a tuning report (all R rows).
std::vector<ExpectationCheck> tuning_checks(const TuningReport& report);

}  // namespace pufchain
