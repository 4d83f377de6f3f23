#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pufchain/experiments.hpp"

namespace fs = std::filesystem;
using namespace pufchain;

namespace {

constexpr int kExpectationFailed = 2;
constexpr int kConfigError = 3;

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string format = "json";
  std::string scenario_case = "adversary";
};

void emit(const Options& o, const std::string& file, const std::string& content) {
  if (o.out.empty()) {
    std::cout << content;
    return;
  }
  fs::create_directories(o.out);
  const auto path = fs::path(o.out) / file;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write output", path.string());
  f << content;
  std::cerr << "wrote " << path.string() << "\n";
}

void report_checks(const std::vector<ExpectationCheck>& checks) {
  for (const auto& c : checks)
    std::cerr << (c.passed ? "ok    " : "FAIL  ") << c.name << ": " << c.detail << "\n";
}

int tune(const Options& o) {
  auto config = o.config.empty() ? TuningConfig{} : parse_tuning_config(read_file(o.config), o.config);
  if (o.seed) config.seed = *o.seed;
  const auto report = run_tuning(config);
  if (o.format == "csv") {
    emit(o, "tuning.csv", tuning_csv(report));
  } else {
    emit(o, "tuning.json", to_json(report));
  }
  const auto checks = tuning_checks(report);
  report_checks(checks);
  for (const auto& c : checks) {
    if (!c.passed) return kExpectationFailed;
  }
  return 0;
}

PrototypeConfig prototype_config(const Options& o) {
  auto config =
      o.config.empty() ? PrototypeConfig{} : parse_prototype_config(read_file(o.config), o.config);
  if (o.seed) config.seed = *o.seed;
  return config;
}

std::string verifications_csv(const ScenarioReport& r) {
  std::string out;
  for (const auto& v : r.verifications) {
    out += r.name + "," + v.item + "," + std::to_string(v.supplier.index) + "," +
           std::to_string(v.buyer.index) + "," + v.outcome + "," + std::to_string(v.match_count) + "\n";
  }
  return out;
}

int prototype(const Options& o) {
  const auto config = prototype_config(o);
  const auto honest = run_prototype_honest(config);
  const auto adversary = run_prototype_adversary(config);
  if (o.format == "csv") {
    emit(o, "prototype.csv",
         "scenario,item,supplier,buyer,outcome,match_count\n" + verifications_csv(honest) +
             verifications_csv(adversary));
  } else {
    emit(o, "prototype-honest.json", to_json(honest));
    emit(o, "prototype-adversary.json", to_json(adversary));
  }
  report_checks(honest.checks);
  report_checks(adversary.checks);
  return honest.passed() && adversary.passed() ? 0 : kExpectationFailed;
}

int attacks(const Options& o) {
  const fs::path where = o.config.empty() ? fs::path("scenarios") : fs::path(o.config);
  std::vector<AttackSuite> suites;
  if (fs::is_regular_file(where)) {
    suites.push_back(load_attack_suite(where));
  } else {
    suites = load_attack_suites(where);
  }
  std::vector<AttackSuiteReport> reports;
  for (auto& s : suites) {
    if (o.seed) s.first_seed = *o.seed;
    reports.push_back(run_attack_suite(s));
  }
  if (o.format == "csv") {
    emit(o, "attacks.csv", attack_matrix_csv(reports));
  } else {
    emit(o, "attacks.json", to_json(reports));
  }
  bool all = true;
  for (const auto& r : reports) {
    std::cerr << (r.passed() ? "ok    " : "FAIL  ") << r.suite.name << ": " << r.met << "/"
              << r.runs << " runs met the expected outcome\n";
    all &= r.passed();
  }
  return all ? 0 : kExpectationFailed;
}

int export_ledger(const Options& o) {
  const auto config = prototype_config(o);
  ScenarioReport report;
  if (o.scenario_case == "honest") {
    report = run_prototype_honest(config);
  } else if (o.scenario_case == "adversary") {
    report = run_prototype_adversary(config);
  } else {
    throw ConfigError("--case must be honest or adversary");
  }
  emit(o, "ledger-" + o.scenario_case + ".jsonl", report.ledger_jsonl);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supply-chain tracking simulator: PUF tuning, prototype and attack experiments"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* cmd, bool formats) {
    cmd->add_option("--seed", o.seed, "Master seed (overrides the config file)");
    cmd->add_option("--config", o.config, "Configuration file or scenario directory");
    cmd->add_option("--out", o.out, "Output directory (stdout when omitted)");
    if (formats) cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  };
  auto* tune_cmd = app.add_subcommand("tune", "PUF tuning sweep (TAR/FAR/TRR/FRR against R)");
  common(tune_cmd, true);
  auto* proto_cmd = app.add_subcommand("prototype", "Three-organisation prototype test");
  common(proto_cmd, true);
  auto* attack_cmd = app.add_subcommand("attacks", "Attack matrix over scenario files");
  common(attack_cmd, true);
  auto* export_cmd = app.add_subcommand("export-ledger", "Prototype ledger as JSON lines");
  common(export_cmd, false);
  export_cmd->add_option("--case", o.scenario_case, "honest or adversary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*tune_cmd) return tune(o);
    if (*proto_cmd) return prototype(o);
    if (*attack_cmd) return attacks(o);
    if (*export_cmd) return export_ledger(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kConfigError;
  }
  return 0;
}
