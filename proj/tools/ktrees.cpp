#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ktrees/harness.hpp"

namespace {

using namespace ktrees;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kAnalysis = 4 };

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::vector<std::string> scenarios;
  std::optional<std::string> out;
  std::optional<std::string> cache;
  std::optional<std::size_t> jobs;
  std::vector<std::string> families;
  bool quiet = false;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "YAML run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Seed for balancing and training");
  cmd->add_option("--alpha", o.alpha, "Significance level");
  cmd->add_option("--scenario", o.scenarios, "Scenario name or cap/buckets, repeatable");
  cmd->add_option("--out", o.out, "Report directory");
  cmd->add_option("--cache", o.cache, "Result cache directory");
  cmd->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");
  cmd->add_option("--families", o.families, "Classifier families to train (LR is always kept)")->delimiter(',');
  cmd->add_flag("-q,--quiet", o.quiet, "No per-task progress");
}

harness::RunConfig resolve(const Overrides& o) {
  auto cfg = harness::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (!o.scenarios.empty()) cfg.scenarios = o.scenarios;
  if (o.out) cfg.out_dir = *o.out;
  if (o.cache) cfg.cache_dir = *o.cache;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (!o.families.empty()) {
    std::set<clf::Family> f;
    for (const auto& name : o.families) f.insert(clf::family_from_string(name));
    cfg.families = std::move(f);
  }
  harness::validate(cfg);
  return cfg;
}

void summarise(const harness::RunReport& report, const fs::path& out) {
  std::cout << "trained " << report.trained << ", cached " << report.cached << ", tasks "
            << report.accuracy.tasks.size() << "\n";
  for (const auto& s : report.scenarios) {
    std::cout << s.scenario.name << ": ";
    if (s.too_small) {
      std::cout << "too few tasks (" << *s.too_small << ")\n";
      continue;
    }
    for (const auto& n : s.non_dominated) std::cout << n << " ";
    std::cout << (s.baseline_dominated ? "[LR dominated]" : "[LR not dominated]") << "\n";
  }
  std::cout << "reports in " << out.string() << "\n";
}

int cmd_run(const Overrides& o, harness::RunMode mode) {
  const auto cfg = resolve(o);
  harness::Progress progress;
  if (!o.quiet) progress = [](const std::string& line) { std::cerr << line << "\n"; };
  const auto report = harness::run_experiment(cfg, mode, progress);
  harness::write_report(report, cfg.out_dir);
  summarise(report, cfg.out_dir);
  return kOk;
}

int cmd_ingest(const std::string& train_path, const std::string& test_path, const fs::path& out) {
  const auto train = conllu::read_conllu_file(train_path, Split::Train);
  const auto test = conllu::read_conllu_file(test_path, Split::Test);
  std::vector<harness::ManifestRow> rows;
  std::vector<std::pair<std::string, std::size_t>> cohort;
  for (const auto& rel : conllu::relation_inventory(train, test)) {
    harness::ManifestRow m;
    m.relation = rel;
    m.positives = conllu::count_positives(train, rel);
    try {
      m.train_rows = data::balanced_row_count(train, rel);
      m.test_rows = data::balanced_row_count(test, rel);
      m.negatives = m.train_rows / 2;
      cohort.emplace_back(rel, m.train_rows);
    } catch (const data::TaskSkipped& e) {
      m.skipped = e.what();
    }
    rows.push_back(std::move(m));
  }
  const auto buckets = data::assign_buckets(cohort);
  for (auto& m : rows)
    if (auto it = buckets.bucket.find(m.relation); it != buckets.bucket.end()) m.bucket = it->second;
  fs::create_directories(out);
  repr::atomic_write(out / "manifest.csv", harness::manifest_csv(rows));
  std::cout << rows.size() << " relations, " << conllu::count_tokens(train) << " train tokens, "
            << conllu::count_tokens(test) << " test tokens\n";
  return kOk;
}

int cmd_project(const fs::path& bundle_path) {
  const auto bundle = repr::load_bundle(bundle_path);
  const auto kn = repr::load_or_project(bundle, bundle_path);
  std::cout << kn.rows() << " x " << kn.cols() << " -> " << repr::projection_cache_path(bundle_path).string() << "\n";
  return kOk;
}

struct SynthFlags {
  std::uint64_t seed = 0;
  std::string out = "synthetic";
  std::size_t sentences = 60;
  std::size_t test_sentences = 40;
  std::size_t d = 16;
  std::size_t h = 48;
  std::string mode = "kn";
};

int cmd_synth(const SynthFlags& f) {
  repr::SynthSpec spec;
  spec.n_sentences = f.sentences;
  spec.d = f.d;
  spec.h = f.h;
  spec.mode = repr::signal_mode_from_string(f.mode);
  const fs::path out = f.out;
  fs::create_directories(out);
  for (const auto split : {Split::Train, Split::Test}) {
    spec.split = split;
    if (split == Split::Test) spec.n_sentences = f.test_sentences;
    const auto s = repr::synth_bundle(f.seed, spec);
    const std::string stem = to_string(split);
    repr::write_bundle(s.bundle, out / (stem + ".ktb"));
    repr::atomic_write(out / (stem + ".conllu"), conllu::to_conllu(s.sentences));
    std::cout << stem << ": " << s.bundle.n_tokens() << " tokens\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probing benchmark for gradient-boosted trees on knowledge neurons"};
  app.require_subcommand(1);

  std::string train_conllu, test_conllu, ingest_out = ".";
  auto* ingest = app.add_subcommand("ingest", "CoNLL-U files to a dataset manifest");
  ingest->add_option("--train", train_conllu, "Training CoNLL-U")->required();
  ingest->add_option("--test", test_conllu, "Test CoNLL-U")->required();
  ingest->add_option("--out", ingest_out, "Output directory");

  std::string bundle_path;
  auto* project = app.add_subcommand("project", "Cache the knowledge-neuron matrix of a bundle");
  project->add_option("bundle", bundle_path, "KTB1 bundle")->required()->check(CLI::ExistingFile);

  Overrides run_flags, report_flags;
  auto* run = app.add_subcommand("run", "Train, evaluate and analyse");
  add_run_flags(run, run_flags);
  auto* report = app.add_subcommand("report", "Re-render reports from the cache");
  add_run_flags(report, report_flags);

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "Write a synthetic train/test bundle pair");
  synth->add_option("--seed", synth_flags.seed, "Generator seed");
  synth->add_option("--out", synth_flags.out, "Output directory");
  synth->add_option("--sentences", synth_flags.sentences, "Training sentences");
  synth->add_option("--test-sentences", synth_flags.test_sentences, "Test sentences");
  synth->add_option("--dim", synth_flags.d, "Representation width");
  synth->add_option("--neurons", synth_flags.h, "Knowledge-neuron count");
  synth->add_option("--mode", synth_flags.mode, "Planted signal: kn or repr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*ingest) return cmd_ingest(train_conllu, test_conllu, ingest_out);
    if (*project) return cmd_project(bundle_path);
    if (*run) return cmd_run(run_flags, harness::RunMode::Train);
    if (*report) return cmd_run(report_flags, harness::RunMode::CacheOnly);
    if (*synth) return cmd_synth(synth_flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return kAnalysis;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
