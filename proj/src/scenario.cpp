#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pufchain/experiments.hpp"

namespace pufchain {
namespace {

using Json = nlohmann::json;

// A parsed scenario document that can point errors at source lines.
class Document {
 public:
  Document(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {
    try {
      root_ = Json::parse(text_);
    } catch (const Json::parse_error& e) {
      throw ConfigError(syntax_message(e), source_, line_at(e.byte == 0 ? 0 : e.byte - 1));
    }
    if (!root_.is_object()) throw ConfigError("top level must be an object", source_, 1);
  }

  const Json& root() const { return root_; }

  [[noreturn]] void fail(const std::string& message, const std::string& key) const {
    throw ConfigError(message, source_, line_of(key));
  }

  void allow(const Json& obj, std::initializer_list<const char*> keys, const std::string& where) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items()) {
      if (!ok.count(k)) fail("unknown key \"" + k + "\" in " + where, k);
    }
  }

  template <class T>
  T get(const Json& obj, const std::string& key, T fallback) const {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail("\"" + key + "\" must be a boolean", key);
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail("\"" + key + "\" must be a string", key);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail("\"" + key + "\" must be a number", key);
    } else {
      if (!v.is_number_unsigned()) fail("\"" + key + "\" must be a non-negative integer", key);
    }
    return v.get<T>();
  }

  const Json& object(const Json& obj, const std::string& key) const {
    static const Json empty = Json::object();
    if (!obj.contains(key)) return empty;
    if (!obj.at(key).is_object()) fail("\"" + key + "\" must be an object", key);
    return obj.at(key);
  }

  PufParams puf(const Json& obj, PufParams base) const {
    const auto& p = object(obj, "puf");
    allow(p, {"width", "noise_rate"}, "puf");
    base.width = get<unsigned>(p, "width", base.width);
    base.noise_rate = get<double>(p, "noise_rate", base.noise_rate);
    try {
      base.validate();
    } catch (const std::invalid_argument& e) {
      fail(e.what(), "puf");
    }
    return base;
  }

  template <class Parse>
  auto parsed(const Json& obj, const std::string& key, Parse parse, decltype(parse("")) fallback) const {
    if (!obj.contains(key)) return fallback;
    try {
      return parse(get<std::string>(obj, key, ""));
    } catch (const std::invalid_argument& e) {
      fail(e.what(), key);
    }
  }

 private:
  static std::string syntax_message(const Json::parse_error& e) {
    std::string what = e.what();
    // Drop the library's "[json.exception.parse_error.101] " prefix.
    if (auto pos = what.find("] "); pos != std::string::npos) what = what.substr(pos + 2);
    return "syntax error: " + what;
  }

  std::size_t line_at(std::size_t offset) const {
    offset = std::min(offset, text_.size());
    return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<long>(offset), '\n'));
  }

  std::size_t line_of(const std::string& key) const {
    const auto pos = text_.find("\"" + key + "\"");
    return pos == std::string::npos ? 0 : line_at(pos);
  }

  std::string text_;
  std::string source_;
  Json root_;
};

}  // namespace

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open file", file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AttackSuite parse_attack_suite(const std::string& text, const std::string& source) {
  Document doc(text, source);
  const auto& root = doc.root();
  doc.allow(root, {"name", "parties", "puf", "contract", "policy", "byzantine_items", "seeds", "adversary"},
            "attack suite");
  AttackSuite s;
  s.name = doc.get<std::string>(root, "name", std::filesystem::path(source).stem().string());
  s.scenario.parties = doc.get<std::size_t>(root, "parties", s.scenario.parties);
  s.scenario.puf = doc.puf(root, s.scenario.puf);
  const auto& contract = doc.object(root, "contract");
  doc.allow(contract, {"challenges", "required"}, "contract");
  s.scenario.challenges = doc.get<std::size_t>(contract, "challenges", s.scenario.challenges);
  s.scenario.required = doc.get<std::size_t>(contract, "required", s.scenario.required);
  s.scenario.policy = doc.parsed(root, "policy", parse_delivery_policy, s.scenario.policy);
  s.scenario.byzantine_items = doc.get<std::size_t>(root, "byzantine_items", s.scenario.byzantine_items);

  const auto& seeds = doc.object(root, "seeds");
  doc.allow(seeds, {"first", "count"}, "seeds");
  s.first_seed = doc.get<std::uint64_t>(seeds, "first", s.first_seed);
  s.seeds = doc.get<std::size_t>(seeds, "count", s.seeds);

  if (!root.contains("adversary")) doc.fail("missing \"adversary\"", "name");
  const auto& adv = doc.object(root, "adversary");
  doc.allow(adv, {"party", "attack", "strategy", "variant", "n_puf", "clone_queries",
                  "tamper_after_register", "enabled"},
            "adversary");
  auto& a = s.adversary;
  a.controlled_party.index = doc.get<std::uint32_t>(adv, "party", a.controlled_party.index);
  if (!adv.contains("attack")) doc.fail("missing \"attack\"", "adversary");
  a.attack = doc.parsed(adv, "attack", parse_attack_kind, a.attack);
  a.strategy = doc.parsed(adv, "strategy", parse_byzantine_strategy, a.strategy);
  a.variant = doc.parsed(adv, "variant", parse_method_abuse, a.variant);
  a.n_puf = doc.get<std::size_t>(adv, "n_puf", a.n_puf);
  a.clone_queries = doc.get<std::size_t>(adv, "clone_queries", a.clone_queries);
  a.tamper_after_register = doc.get<bool>(adv, "tamper_after_register", a.tamper_after_register);
  a.enabled = doc.get<bool>(adv, "enabled", a.enabled);

  try {
    validate(s.adversary, s.scenario);
  } catch (const ScenarioError& e) {
    doc.fail(e.what(), "adversary");
  } catch (const std::invalid_argument& e) {
    doc.fail(e.what(), "contract");
  }
  return s;
}

AttackSuite load_attack_suite(const std::filesystem::path& file) {
  return parse_attack_suite(read_file(file), file.string());
}

TuningConfig parse_tuning_config(const std::string& text, const std::string& source) {
  Document doc(text, source);
  const auto& root = doc.root();
  doc.allow(root, {"seed", "devices", "tuning_devices", "challenges", "r_min", "r_max",
                   "repetitions", "pair_pool", "puf"},
            "tuning config");
  TuningConfig c;
  c.seed = doc.get<std::uint64_t>(root, "seed", c.seed);
  c.devices = doc.get<std::size_t>(root, "devices", c.devices);
  c.tuning_devices = doc.get<std::size_t>(root, "tuning_devices", c.tuning_devices);
  c.challenges = doc.get<std::size_t>(root, "challenges", c.challenges);
  c.r_min = doc.get<std::size_t>(root, "r_min", c.r_min);
  c.r_max = doc.get<std::size_t>(root, "r_max", c.r_max);
  c.repetitions = doc.get<std::size_t>(root, "repetitions", c.repetitions);
  c.pair_pool = doc.get<std::size_t>(root, "pair_pool", c.pair_pool);
  c.puf = doc.puf(root, c.puf);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    doc.fail(e.what(), "r_min");
  }
  return c;
}

PrototypeConfig parse_prototype_config(const std::string& text, const std::string& source) {
  Document doc(text, source);
  const auto& root = doc.root();
  doc.allow(root, {"seed", "honest_items", "substituted_items", "challenges", "required", "puf",
                   "policy"},
            "prototype config");
  PrototypeConfig c;
  c.seed = doc.get<std::uint64_t>(root, "seed", c.seed);
  c.honest_items = doc.get<std::size_t>(root, "honest_items", c.honest_items);
  c.substituted_items = doc.get<std::size_t>(root, "substituted_items", c.substituted_items);
  c.challenges = doc.get<std::size_t>(root, "challenges", c.challenges);
  c.required = doc.get<std::size_t>(root, "required", c.required);
  c.puf = doc.puf(root, c.puf);
  c.policy = doc.parsed(root, "policy", parse_delivery_policy, c.policy);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    doc.fail(e.what(), "required");
  }
  return c;
}

}  // namespace pufchain
