#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ktrees/classifier_spec.hpp"
#include "ktrees/classifiers.hpp"
#include "ktrees/dataset.hpp"
#include "ktrees/stats.hpp"
#include "ktrees/synth.hpp"

namespace ktrees::harness {

namespace fs = std::filesystem;

struct SyntheticInputs {
  repr::SynthSpec spec;  // split is ignored; both splits are drawn
  std::size_t test_sentences = 40;
};

struct RunConfig {
  std::optional<fs::path> train_conllu;
  std::optional<fs::path> test_conllu;
  std::optional<fs::path> train_bundle;
  std::optional<fs::path> test_bundle;
  std::optional<SyntheticInputs> synthetic;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::vector<std::string> scenarios;  // empty: the five presets
  fs::path out_dir = "out";
  fs::path cache_dir = "cache";
  std::size_t jobs = 0;  // 0: hardware concurrency
  /// Family filter for quick runs. LogReg is always kept because it defines
  /// task difficulty and the advantage baseline.
  std::optional<std::set<clf::Family>> families;
};

/// YAML document. Relative paths resolve against base_dir.
RunConfig config_from_yaml(const std::string& text, const fs::path& base_dir = {});
RunConfig load_config(const fs::path& path);

/// Throws ConfigError unless exactly one of (bundles, synthetic) is given
/// and every field is in range.
void validate(const RunConfig& config);

std::vector<stats::Scenario> scenarios_of(const RunConfig& config);
std::vector<clf::ClassifierSpec> specs_of(const RunConfig& config);

// ------------------------------------------------------------ inputs

struct SplitInputs {
  std::vector<conllu::Sentence> sentences;
  data::FeatureSource repr;
  data::FeatureSource kn;
  std::shared_ptr<const data::RowLookup> lookup;
};

struct Inputs {
  SplitInputs train;
  SplitInputs test;
  std::string model;
};

Inputs load_inputs(const RunConfig& config);

// ------------------------------------------------------------ cache

inline constexpr int kCacheFormatVersion = 1;

/// Stable across runs and platforms; changes with any input.
std::string cache_key(const clf::ClassifierSpec& spec, const conllu::RelationLabel& relation,
                      const std::string& data_fingerprint);

struct CacheEntry {
  clf::EvalResult result;
  std::string model_json;
};

std::optional<CacheEntry> read_cache(const fs::path& cache_dir, const std::string& key);
void write_cache(const fs::path& cache_dir, const std::string& key, const CacheEntry& entry);

// ------------------------------------------------------------ report

struct ManifestRow {
  conllu::RelationLabel relation;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::optional<data::SizeBucket> bucket;
  std::optional<double> lr_accuracy;
  std::string skipped;  // reason, empty for a built task
};

struct ScenarioReport {
  stats::Scenario scenario;
  std::optional<std::size_t> too_small;  // retained task count when rejected
  std::vector<std::string> tasks;
  stats::DominanceGraph graph;
  stats::DominanceGraph reduced;
  std::vector<std::string> non_dominated;
  bool baseline_dominated = false;
  /// Largest error-rate advantage over LR among knowledge-tree specs that
  /// significantly dominate it, computed on scenario mean accuracies.
  std::optional<std::string> best_spec;
  std::optional<double> best_advantage;
};

struct CorrelationRow {
  std::string spec;
  std::string against;     // lr_accuracy, size_small_medium, size_medium_large
  std::string advantage;   // error_rate or difference
  std::size_t n = 0;
  std::optional<stats::CorrelationResult> result;  // empty when undefined
};

struct RunReport {
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::string model;
  std::vector<ManifestRow> manifest;
  stats::AccuracyTable accuracy;
  std::vector<ScenarioReport> scenarios;
  std::vector<CorrelationRow> correlations;
  std::size_t trained = 0;
  std::size_t cached = 0;
};

enum class RunMode { Train, CacheOnly };

using Progress = std::function<void(const std::string& line)>;

/// Trains and evaluates every (spec, relation) pair missing from the cache,
/// then assembles the report. CacheOnly raises DataError on a cache miss.
RunReport run_experiment(const RunConfig& config, RunMode mode = RunMode::Train, const Progress& progress = {});

/// Manifest rows for the inputs without training anything.
std::vector<ManifestRow> build_manifest(const Inputs& inputs, std::uint64_t seed);

/// Scenario analysis over a finished accuracy table.
ScenarioReport analyse_scenario(const stats::AccuracyTable& table, const stats::Scenario& scenario,
                                const std::map<std::string, data::SizeBucket>& buckets, double alpha);

std::vector<CorrelationRow> correlation_table(const stats::AccuracyTable& table,
                                              const std::vector<ManifestRow>& manifest);

std::string render_dot(const stats::DominanceGraph& graph, const std::string& name = "dominance");
void emit_dot(const stats::DominanceGraph& graph, const fs::path& path, const std::string& name = "dominance");

std::string manifest_csv(const std::vector<ManifestRow>& manifest);
std::string accuracy_csv(const stats::AccuracyTable& table);
std::string correlations_csv(const std::vector<CorrelationRow>& rows);
std::string advantage_csv(const RunReport& report);
std::string report_json(const RunReport& report);

/// Writes every report file into dir, each one atomically.
void write_report(const RunReport& report, const fs::path& dir);

}  // namespace ktrees::harness
