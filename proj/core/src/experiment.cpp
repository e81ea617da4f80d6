#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "ktrees/harness.hpp"
#include "ktrees/hashing.hpp"

namespace ktrees::harness {

using json = nlohmann::ordered_json;

namespace {

SplitInputs from_bundle(repr::ReprBundle bundle, Matrix kn, std::vector<conllu::Sentence> sentences) {
  SplitInputs s;
  const auto fp = repr::fingerprint(bundle);
  s.sentences = std::move(sentences);
  s.lookup = std::make_shared<const data::RowLookup>(bundle.index);
  s.repr = {std::make_shared<const Matrix>(std::move(bundle.repr)), repr::ProbingObject::Repr, fp};
  s.kn = {std::make_shared<const Matrix>(std::move(kn)), repr::ProbingObject::KnowledgeNeurons, fp};
  return s;
}

}  // namespace

Inputs load_inputs(const RunConfig& cfg) {
  validate(cfg);
  Inputs in;
  if (cfg.synthetic) {
    auto spec = cfg.synthetic->spec;
    spec.split = Split::Train;
    auto train = repr::synth_bundle(cfg.seed, spec);
    spec.split = Split::Test;
    spec.n_sentences = cfg.synthetic->test_sentences;
    auto test = repr::synth_bundle(cfg.seed, spec);
    in.model = train.bundle.meta.model;
    auto train_kn = repr::project_knowledge_neurons(train.bundle);
    auto test_kn = repr::project_knowledge_neurons(test.bundle);
    in.train = from_bundle(std::move(train.bundle), std::move(train_kn), std::move(train.sentences));
    in.test = from_bundle(std::move(test.bundle), std::move(test_kn), std::move(test.sentences));
    return in;
  }
  auto train_bundle = repr::load_bundle(*cfg.train_bundle);
  in.model = train_bundle.meta.model;
  {
    auto kn = repr::load_or_project(train_bundle, *cfg.train_bundle);
    in.train = from_bundle(std::move(train_bundle), std::move(kn),
                           conllu::read_conllu_file(cfg.train_conllu->string(), Split::Train));
  }
  auto test_bundle = repr::load_bundle(*cfg.test_bundle);
  if (static_cast<Eigen::Index>(test_bundle.d()) != in.train.repr.matrix->cols())
    throw DataError("train and test bundles disagree on the representation width");
  auto kn = repr::load_or_project(test_bundle, *cfg.test_bundle);
  in.test = from_bundle(std::move(test_bundle), std::move(kn),
                        conllu::read_conllu_file(cfg.test_conllu->string(), Split::Test));
  return in;
}

// ------------------------------------------------------------ cache

std::string cache_key(const clf::ClassifierSpec& spec, const conllu::RelationLabel& relation,
                      const std::string& data_fingerprint) {
  Sha256 h;
  h.field("ktrees-cache")
      .field(static_cast<std::uint64_t>(kCacheFormatVersion))
      .field(static_cast<std::uint64_t>(clf::kModelFormatVersion))
      .field(clf::to_string(spec.family))
      .field(static_cast<std::uint64_t>(spec.depth))
      .field(repr::to_string(spec.kind))
      .field(spec.seed)
      .field(relation)
      .field(data_fingerprint);
  return h.hex_digest();
}

std::optional<CacheEntry> read_cache(const fs::path& cache_dir, const std::string& key) {
  std::ifstream in(cache_dir / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  // Unreadable or stale entries count as misses and get retrained.
  try {
    const auto doc = json::parse(ss.str());
    if (doc.at("format").get<int>() != kCacheFormatVersion || doc.at("key").get<std::string>() != key)
      return std::nullopt;
    CacheEntry e;
    e.model_json = doc.at("model").dump();
    auto model = clf::model_from_json(e.model_json);
    e.result.spec = model.spec;
    e.result.relation = doc.at("relation").get<std::string>();
    e.result.test_accuracy = doc.at("test_accuracy").get<double>();
    for (char c : doc.at("correct").get<std::string>()) {
      if (c != '0' && c != '1') return std::nullopt;
      e.result.per_example_correct.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return e;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void write_cache(const fs::path& cache_dir, const std::string& key, const CacheEntry& entry) {
  fs::create_directories(cache_dir);
  std::string correct;
  correct.reserve(entry.result.per_example_correct.size());
  for (auto c : entry.result.per_example_correct) correct.push_back(c ? '1' : '0');
  json doc;
  doc["format"] = kCacheFormatVersion;
  doc["key"] = key;
  doc["spec"] = entry.result.spec.short_name();
  doc["relation"] = entry.result.relation;
  doc["test_accuracy"] = entry.result.test_accuracy;
  doc["correct"] = correct;
  doc["model"] = json::parse(entry.model_json);
  repr::atomic_write(cache_dir / (key + ".json"), doc.dump());
}

// ------------------------------------------------------------ tasks

namespace {

struct Task {
  conllu::RelationLabel relation;
  data::TaskRows train;
  data::TaskRows test;
  std::string repr_fingerprint;
  std::string kn_fingerprint;
};

struct PreparedTasks {
  std::vector<ManifestRow> manifest;
  std::vector<Task> tasks;
};

const char* reason_text(data::TaskSkipped::Reason r) {
  switch (r) {
    case data::TaskSkipped::Reason::RelationAbsent: return "relation absent";
    case data::TaskSkipped::Reason::NoNegatives: return "no negatives";
    case data::TaskSkipped::Reason::NoPositives: return "no positives";
  }
  return "skipped";
}

std::string pair_fingerprint(const data::TaskRows& train, const data::TaskRows& test, const data::FeatureSource& a,
                             const data::FeatureSource& b) {
  Sha256 h;
  h.field(data::fingerprint(train, a)).field(data::fingerprint(test, b));
  return h.hex_digest();
}

PreparedTasks prepare(const Inputs& in, std::uint64_t seed) {
  PreparedTasks out;
  for (const auto& rel : conllu::relation_inventory(in.train.sentences, in.test.sentences)) {
    ManifestRow row;
    row.relation = rel;
    try {
      Task t;
      t.relation = rel;
      t.train = data::build_task_rows(in.train.sentences, *in.train.lookup, rel, derive_seed(seed, "balance/train/" + rel));
      t.test = data::build_task_rows(in.test.sentences, *in.test.lookup, rel, derive_seed(seed, "balance/test/" + rel));
      t.repr_fingerprint = pair_fingerprint(t.train, t.test, in.train.repr, in.test.repr);
      t.kn_fingerprint = pair_fingerprint(t.train, t.test, in.train.kn, in.test.kn);
      row.positives = t.train.n_unique_positives;
      row.negatives = t.train.n_negatives;
      row.train_rows = t.train.size();
      row.test_rows = t.test.size();
      out.tasks.push_back(std::move(t));
    } catch (const data::TaskSkipped& e) {
      row.positives = conllu::count_positives(in.train.sentences, rel);
      row.skipped = reason_text(e.reason());
    }
    out.manifest.push_back(std::move(row));
  }
  std::vector<std::pair<std::string, std::size_t>> cohort;
  for (const auto& t : out.tasks) cohort.emplace_back(t.relation, t.train.size());
  const auto buckets = data::assign_buckets(cohort);
  for (auto& row : out.manifest) {
    if (auto it = buckets.bucket.find(row.relation); it != buckets.bucket.end()) row.bucket = it->second;
  }
  return out;
}

std::string with_context(const clf::ClassifierSpec& spec, const std::string& relation, const char* what) {
  return spec.short_name() + " on " + relation + ": " + what;
}

}  // namespace

std::vector<ManifestRow> build_manifest(const Inputs& inputs, std::uint64_t seed) {
  return prepare(inputs, seed).manifest;
}

RunReport run_experiment(const RunConfig& cfg, RunMode mode, const Progress& progress) {
  validate(cfg);
  const auto specs = specs_of(cfg);
  const auto scenarios = scenarios_of(cfg);
  const auto inputs = load_inputs(cfg);
  auto prepared = prepare(inputs, cfg.seed);
  const auto& tasks = prepared.tasks;
  if (tasks.empty()) throw DataError("no relation yields a balanced task in both splits");

  RunReport report;
  report.seed = cfg.seed;
  report.alpha = cfg.alpha;
  report.model = inputs.model;
  report.accuracy.rows = specs;
  for (const auto& t : tasks) report.accuracy.tasks.push_back(t.relation);
  report.accuracy.cells.assign(specs.size(), std::vector<double>(tasks.size(), 0.0));

  struct Job {
    std::size_t spec;
    std::size_t task;
    std::string key;
  };
  std::vector<Job> pending;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t s = 0; s < specs.size(); ++s) {
      const auto& fp = specs[s].kind == repr::ProbingObject::Repr ? tasks[t].repr_fingerprint : tasks[t].kn_fingerprint;
      auto key = cache_key(specs[s], tasks[t].relation, fp);
      if (auto hit = read_cache(cfg.cache_dir, key)) {
        report.accuracy.cells[s][t] = hit->result.test_accuracy;
        ++report.cached;
      } else {
        pending.push_back({s, t, std::move(key)});
      }
    }
  }
  if (!pending.empty() && mode == RunMode::CacheOnly) {
    const auto& j = pending.front();
    throw DataError(std::to_string(pending.size()) + " results missing from the cache, first " +
                    specs[j.spec].short_name() + " on " + tasks[j.task].relation);
  }
  std::stable_sort(pending.begin(), pending.end(), [&](const Job& a, const Job& b) {
    return tasks[a.task].train.size() > tasks[b.task].train.size();
  });

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mu;
  std::size_t done = 0;

  auto worker = [&] {
    while (!failed) {
      const auto i = next++;
      if (i >= pending.size()) return;
      const auto& job = pending[i];
      const auto& spec = specs[job.spec];
      const auto& task = tasks[job.task];
      try {
        try {
          const bool kn = spec.kind == repr::ProbingObject::KnowledgeNeurons;
          const auto train = data::materialize(task.train, kn ? inputs.train.kn : inputs.train.repr);
          const auto test = data::materialize(task.test, kn ? inputs.test.kn : inputs.test.repr);
          const auto model = clf::fit(spec, train);
          CacheEntry entry{clf::evaluate(model, test), clf::to_json(model)};
          write_cache(cfg.cache_dir, job.key, entry);
          std::lock_guard lock(mu);
          report.accuracy.cells[job.spec][job.task] = entry.result.test_accuracy;
          ++done;
          if (progress) {
            std::ostringstream line;
            line << "[" << done << "/" << pending.size() << "] " << spec.short_name() << " " << task.relation << " "
                 << entry.result.test_accuracy;
            progress(line.str());
          }
        } catch (const ConfigError& e) {
          throw ConfigError(with_context(spec, task.relation, e.what()));
        } catch (const DataError& e) {
          throw DataError(with_context(spec, task.relation, e.what()));
        } catch (const std::exception& e) {
          throw std::runtime_error(with_context(spec, task.relation, e.what()));
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };

  std::size_t jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, std::max<std::size_t>(pending.size(), 1));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  report.trained = done;

  // Analysis runs single-threaded over the finished table.
  report.manifest = std::move(prepared.manifest);
  if (const auto lr = report.accuracy.row_index(stats::kBaselineName)) {
    for (auto& row : report.manifest) {
      const auto it = std::find(report.accuracy.tasks.begin(), report.accuracy.tasks.end(), row.relation);
      if (it != report.accuracy.tasks.end())
        row.lr_accuracy = report.accuracy.cells[*lr][static_cast<std::size_t>(it - report.accuracy.tasks.begin())];
    }
  }
  std::map<std::string, data::SizeBucket> buckets;
  for (const auto& row : report.manifest)
    if (row.bucket) buckets[row.relation] = *row.bucket;
  for (const auto& sc : scenarios) report.scenarios.push_back(analyse_scenario(report.accuracy, sc, buckets, cfg.alpha));
  report.correlations = correlation_table(report.accuracy, report.manifest);
  return report;
}

// ------------------------------------------------------------ analysis

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ScenarioReport analyse_scenario(const stats::AccuracyTable& table, const stats::Scenario& scenario,
                                const std::map<std::string, data::SizeBucket>& buckets, double alpha) {
  ScenarioReport out;
  out.scenario = scenario;
  stats::AccuracyTable filtered;
  try {
    filtered = stats::scenario_filter(table, scenario, buckets);
  } catch (const stats::ScenarioTooSmall& e) {
    out.too_small = e.retained();
    return out;
  }
  out.tasks = filtered.tasks;
  out.graph = stats::build_dominance_graph(filtered, alpha);
  out.reduced = stats::transitive_reduction(out.graph);
  for (auto i : stats::non_dominated_set(out.graph)) out.non_dominated.push_back(out.graph.nodes[i]);

  const auto lr = *filtered.row_index(stats::kBaselineName);
  out.baseline_dominated = out.graph.in_degree()[lr] > 0;
  const double lr_mean = mean(filtered.cells[lr]);
  for (const auto& e : out.graph.edges) {
    if (e.loser != lr || !filtered.rows[e.winner].is_knowledge_tree()) continue;
    double adv = 0.0;
    try {
      adv = stats::error_rate_advantage(mean(filtered.cells[e.winner]), lr_mean);
    } catch (const stats::UndefinedStatistic&) {
      continue;
    }
    if (!out.best_advantage || adv > *out.best_advantage) {
      out.best_advantage = adv;
      out.best_spec = out.graph.nodes[e.winner];
    }
  }
  return out;
}

std::vector<CorrelationRow> correlation_table(const stats::AccuracyTable& table,
                                              const std::vector<ManifestRow>& manifest) {
  std::vector<CorrelationRow> out;
  const auto lr = table.row_index(stats::kBaselineName);
  if (!lr) return out;
  std::map<std::string, const ManifestRow*> rows;
  for (const auto& m : manifest) rows[m.relation] = &m;

  using data::SizeBucket;
  struct Against {
    const char* name;
    std::set<SizeBucket> buckets;  // empty: every task, against LR accuracy
  };
  const std::vector<Against> targets{{"lr_accuracy", {}},
                                     {"size_small_medium", {SizeBucket::Small, SizeBucket::Medium}},
                                     {"size_medium_large", {SizeBucket::Medium, SizeBucket::Large}}};

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (!table.rows[r].is_knowledge_tree()) continue;
    for (const auto& target : targets) {
      for (const bool error_rate : {true, false}) {
        std::vector<double> adv, x;
        for (std::size_t t = 0; t < table.tasks.size(); ++t) {
          const auto* m = rows.at(table.tasks[t]);
          if (!target.buckets.empty() && (!m->bucket || !target.buckets.contains(*m->bucket))) continue;
          const double base = table.cells[*lr][t];
          const double chal = table.cells[r][t];
          if (error_rate) {
            if (base >= 1.0) continue;
            adv.push_back(stats::error_rate_advantage(chal, base));
          } else {
            adv.push_back(chal - base);
          }
          x.push_back(target.buckets.empty() ? base : static_cast<double>(m->train_rows));
        }
        CorrelationRow row;
        row.spec = table.rows[r].short_name();
        row.against = target.name;
        row.advantage = error_rate ? "error_rate" : "difference";
        row.n = adv.size();
        try {
          row.result = stats::spearman(adv, x);
        } catch (const stats::UndefinedStatistic&) {
        }
        out.push_back(std::move(row));
      }
    }
  }
  return out;
}

}  // namespace ktrees::harness
