#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "ktrees/harness.hpp"

namespace ktrees::harness {
namespace {

void reject_unknown(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> known) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for '" + key + "'");
  }
}

fs::path resolve(const YAML::Node& node, const std::string& key, const fs::path& base) {
  fs::path p = scalar<std::string>(node, key);
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

RunConfig config_from_yaml(const std::string& text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  RunConfig cfg;
  if (root.IsNull()) return cfg;
  if (!root.IsMap()) throw ConfigError("config must be a mapping");
  reject_unknown(root, "config",
                 {"seed", "alpha", "scenarios", "out", "cache", "jobs", "families", "inputs", "synthetic"});

  if (root["seed"]) cfg.seed = scalar<std::uint64_t>(root["seed"], "seed");
  if (root["alpha"]) cfg.alpha = scalar<double>(root["alpha"], "alpha");
  if (root["jobs"]) cfg.jobs = scalar<std::size_t>(root["jobs"], "jobs");
  if (root["out"]) cfg.out_dir = resolve(root["out"], "out", base_dir);
  if (root["cache"]) cfg.cache_dir = resolve(root["cache"], "cache", base_dir);
  if (const auto s = root["scenarios"]) {
    if (!s.IsSequence()) throw ConfigError("'scenarios' must be a list");
    for (const auto& item : s) cfg.scenarios.push_back(scalar<std::string>(item, "scenarios"));
  }
  if (const auto f = root["families"]) {
    if (!f.IsSequence()) throw ConfigError("'families' must be a list");
    std::set<clf::Family> families;
    for (const auto& item : f) families.insert(clf::family_from_string(scalar<std::string>(item, "families")));
    cfg.families = std::move(families);
  }
  if (const auto in = root["inputs"]) {
    reject_unknown(in, "inputs", {"train_conllu", "test_conllu", "train_bundle", "test_bundle"});
    if (in["train_conllu"]) cfg.train_conllu = resolve(in["train_conllu"], "train_conllu", base_dir);
    if (in["test_conllu"]) cfg.test_conllu = resolve(in["test_conllu"], "test_conllu", base_dir);
    if (in["train_bundle"]) cfg.train_bundle = resolve(in["train_bundle"], "train_bundle", base_dir);
    if (in["test_bundle"]) cfg.test_bundle = resolve(in["test_bundle"], "test_bundle", base_dir);
  }
  if (const auto syn = root["synthetic"]) {
    reject_unknown(syn, "synthetic",
                   {"sentences", "test_sentences", "min_tokens", "max_tokens", "d", "h", "relations", "mode", "band"});
    SyntheticInputs s;
    auto& sp = s.spec;
    if (syn["sentences"]) sp.n_sentences = scalar<std::size_t>(syn["sentences"], "sentences");
    if (syn["test_sentences"]) s.test_sentences = scalar<std::size_t>(syn["test_sentences"], "test_sentences");
    if (syn["min_tokens"]) sp.min_tokens = scalar<std::size_t>(syn["min_tokens"], "min_tokens");
    if (syn["max_tokens"]) sp.max_tokens = scalar<std::size_t>(syn["max_tokens"], "max_tokens");
    if (syn["d"]) sp.d = scalar<std::size_t>(syn["d"], "d");
    if (syn["h"]) sp.h = scalar<std::size_t>(syn["h"], "h");
    if (syn["band"]) sp.band = scalar<double>(syn["band"], "band");
    if (syn["mode"]) sp.mode = repr::signal_mode_from_string(scalar<std::string>(syn["mode"], "mode"));
    if (const auto r = syn["relations"]) {
      if (!r.IsSequence()) throw ConfigError("'relations' must be a list");
      sp.relations.clear();
      for (const auto& item : r) sp.relations.push_back(scalar<std::string>(item, "relations"));
    }
    cfg.synthetic = s;
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_yaml(ss.str(), path.parent_path());
}

void validate(const RunConfig& cfg) {
  const bool bundles = cfg.train_bundle || cfg.test_bundle;
  if (bundles == cfg.synthetic.has_value())
    throw ConfigError("config needs exactly one of bundle inputs or a synthetic section");
  if (bundles) {
    if (!cfg.train_bundle || !cfg.test_bundle) throw ConfigError("both train_bundle and test_bundle are required");
    if (!cfg.train_conllu || !cfg.test_conllu) throw ConfigError("bundle inputs need train_conllu and test_conllu");
  } else if (cfg.train_conllu || cfg.test_conllu) {
    throw ConfigError("synthetic runs draw their own sentences; drop the conllu inputs");
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
  if (cfg.synthetic && cfg.synthetic->test_sentences == 0) throw ConfigError("test_sentences must be positive");
  for (const auto& s : cfg.scenarios) stats::parse_scenario(s);
}

std::vector<stats::Scenario> scenarios_of(const RunConfig& cfg) {
  if (cfg.scenarios.empty()) return stats::preset_scenarios();
  std::vector<stats::Scenario> out;
  for (const auto& s : cfg.scenarios) out.push_back(stats::parse_scenario(s));
  return out;
}

std::vector<clf::ClassifierSpec> specs_of(const RunConfig& cfg) {
  auto specs = clf::all_specs(cfg.seed);
  if (cfg.families) {
    std::erase_if(specs, [&](const clf::ClassifierSpec& s) {
      return s.family != clf::Family::LogReg && !cfg.families->contains(s.family);
    });
  }
  return specs;
}

}  // namespace ktrees::harness
