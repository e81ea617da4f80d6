// One line per acceptance criterion. Exit status is non-zero when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ktrees/classifiers.hpp"
#include "ktrees/harness.hpp"
#include "ktrees/hashing.hpp"
#include "test_support.hpp"

using namespace ktrees;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double v, int digits = 2) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

std::string scientific(double v) {
  std::ostringstream s;
  s.precision(1);
  s << std::scientific << v;
  return s.str();
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// ---------------------------------------------------------------- stumps

struct StumpRule {
  bool count_weights;  // split weights are row counts instead of hessians
  double lambda;
  double min_child;
};

StumpRule rule_for(clf::Family f) {
  switch (f) {
    case clf::Family::GbClassic: return {true, 0.0, 1.0};
    case clf::Family::GbAsymmetric: return {false, 1.0, 1.0};
    default: return {false, 3.0, 0.0};
  }
}

struct Candidate {
  int feature;
  float lo, hi;  // the split sits in [lo, hi)
  double gain;
  double g_left, g_right;
};

/// Every admissible (feature, gap) split with positive gain.
std::vector<Candidate> all_stumps(const Matrix& x, const std::vector<double>& g, const std::vector<double>& w,
                                  const StumpRule& rule) {
  std::vector<Candidate> out;
  const auto n = static_cast<std::size_t>(x.rows());
  double g_all = 0, w_all = 0;
  for (std::size_t i = 0; i < n; ++i) {
    g_all += g[i];
    w_all += w[i];
  }
  auto score = [&](double gs, double ws) { return gs * gs / (ws + rule.lambda); };
  for (int f = 0; f < x.cols(); ++f) {
    std::vector<float> values;
    for (std::size_t i = 0; i < n; ++i) values.push_back(x(static_cast<Eigen::Index>(i), f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      double gl = 0, wl = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (x(static_cast<Eigen::Index>(i), f) <= values[k]) {
          gl += g[i];
          wl += w[i];
        }
      }
      const double gr = g_all - gl, wr = w_all - wl;
      if (wl < rule.min_child || wr < rule.min_child) continue;
      const double sl = score(gl, wl), sr = score(gr, wr), sp = score(g_all, w_all);
      const double gain = sl + sr - sp;
      if (gain > 1e-12 * (sl + sr + sp)) out.push_back({f, values[k], values[k + 1], gain, gl, gr});
    }
  }
  return out;
}

bool sign_agrees(double leaf_value, double g_sum) {
  if (std::abs(g_sum) < 1e-12) return true;
  return leaf_value != 0.0 && (leaf_value > 0) == (g_sum < 0);
}

Outcome stump_oracle() {
  const auto t0 = Clock::now();
  std::size_t models = 0, trees = 0, matched = 0;
  std::string first_miss;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const auto rows = std::uniform_int_distribution<Eigen::Index>(20, 200)(rng);
    const auto cols = std::uniform_int_distribution<Eigen::Index>(1, 5)(rng);
    const auto x = testing::random_matrix(rng, rows, cols, seed % 2 == 1);
    const auto y = testing::noisy_labels(rng, x);
    for (const auto family : {clf::Family::GbClassic, clf::Family::GbAsymmetric, clf::Family::GbSymmetric}) {
      const clf::ClassifierSpec spec{family, 1, repr::ProbingObject::KnowledgeNeurons, seed};
      const auto model = clf::model_from_json(clf::to_json(clf::fit(spec, x, y)));
      ++models;
      const auto rule = rule_for(family);

      // Replay the rounds with the serialised leaf values and re-derive each
      // round's best stump from scratch.
      double base = 0.0;
      std::vector<std::function<double(Eigen::Index)>> stumps;
      std::vector<std::optional<std::pair<int, float>>> splits;
      std::vector<std::pair<double, double>> leaves;
      if (const auto* bt = std::get_if<clf::BoostedTrees>(&model.params)) {
        base = bt->base_margin;
        for (const auto& t : bt->trees) {
          if (t.nodes.size() == 1) {
            splits.push_back(std::nullopt);
            leaves.emplace_back(t.nodes[0].value, t.nodes[0].value);
          } else {
            splits.push_back(std::make_pair(t.nodes[0].feature, t.nodes[0].threshold));
            leaves.emplace_back(t.nodes[static_cast<std::size_t>(t.nodes[0].left)].value,
                                t.nodes[static_cast<std::size_t>(t.nodes[0].right)].value);
          }
        }
      } else {
        const auto& ens = std::get<clf::ObliviousEnsemble>(model.params);
        base = ens.base_margin;
        for (const auto& t : ens.trees) {
          if (t.levels.empty()) {
            splits.push_back(std::nullopt);
            leaves.emplace_back(t.leaf_values[0], t.leaf_values[0]);
          } else {
            splits.push_back(std::make_pair(t.levels[0].feature, t.levels[0].threshold));
            leaves.emplace_back(t.leaf_values[0], t.leaf_values[1]);
          }
        }
      }

      std::vector<double> margin(static_cast<std::size_t>(rows), base), g(margin.size()), w(margin.size());
      for (std::size_t round = 0; round < splits.size(); ++round) {
        ++trees;
        for (std::size_t i = 0; i < margin.size(); ++i) {
          const double p = sigmoid(margin[i]);
          g[i] = p - y[i];
          w[i] = rule.count_weights ? 1.0 : p * (1.0 - p);
        }
        const auto cands = all_stumps(x, g, w, rule);
        bool ok;
        if (cands.empty()) {
          ok = !splits[round];
        } else if (!splits[round]) {
          ok = false;
        } else {
          double best = 0.0;
          for (const auto& c : cands) best = std::max(best, c.gain);
          const auto [f, thr] = *splits[round];
          const auto it = std::find_if(cands.begin(), cands.end(),
                                       [&](const Candidate& c) { return c.feature == f && c.lo <= thr && thr < c.hi; });
          ok = it != cands.end() && it->gain >= best - 1e-9 * best && sign_agrees(leaves[round].first, it->g_left) &&
               sign_agrees(leaves[round].second, it->g_right);
        }
        if (ok) {
          ++matched;
        } else if (first_miss.empty()) {
          first_miss = spec.short_name() + " dataset " + std::to_string(seed) + " round " + std::to_string(round);
        }
        for (std::size_t i = 0; i < margin.size(); ++i) {
          const bool right = splits[round] && x(static_cast<Eigen::Index>(i), splits[round]->first) > splits[round]->second;
          margin[i] += right ? leaves[round].second : leaves[round].first;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = matched == trees && secs < 10.0;
  o.detail = std::to_string(models) + " models, " + std::to_string(matched) + "/" + std::to_string(trees) +
             " stumps match, " + fixed(secs) + " s";
  if (!first_miss.empty()) o.detail += ", first miss " + first_miss;
  return o;
}

// ---------------------------------------------------------------- monotone loss

Outcome monotone_loss() {
  std::size_t histories = 0, steps = 0, violations = 0, mismatched = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(2000 + seed);
    const auto x = testing::random_matrix(rng, 150 + 20 * static_cast<Eigen::Index>(seed), 5, seed % 2 == 0);
    const auto y = testing::noisy_labels(rng, x);
    for (const auto family : {clf::Family::GbClassic, clf::Family::GbAsymmetric, clf::Family::GbSymmetric}) {
      for (const int depth : {1, clf::max_depth(family)}) {
        const clf::ClassifierSpec spec{family, depth, repr::ProbingObject::KnowledgeNeurons, seed};
        const auto model = clf::fit(spec, x, y);
        const auto& h = model.report.loss_history;
        ++histories;
        for (std::size_t i = 1; i < h.size(); ++i, ++steps) violations += h[i] > h[i - 1];
        // The history has to describe the model that was actually returned.
        const auto margins = clf::decision_function(model, x);
        if (std::abs(clf::mean_log_loss(margins, y) - h.back()) > 1e-12) ++mismatched;
      }
    }
  }
  Outcome o;
  o.pass = violations == 0 && mismatched == 0 && histories == 60;
  o.detail = std::to_string(histories) + " histories, " + std::to_string(steps) + " rounds, " +
             std::to_string(violations) + " increases, " + std::to_string(mismatched) + " final-loss mismatches";
  return o;
}

// ---------------------------------------------------------------- graphs

using Reach = std::vector<std::vector<bool>>;

Reach closure(std::size_t n, const std::set<std::pair<std::size_t, std::size_t>>& edges) {
  Reach r(n, std::vector<bool>(n, false));
  for (auto [a, b] : edges) r[a][b] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = true;
  return r;
}

std::set<std::pair<std::size_t, std::size_t>> edge_set(const stats::DominanceGraph& g) {
  std::set<std::pair<std::size_t, std::size_t>> s;
  for (const auto& e : g.edges) s.emplace(e.winner, e.loser);
  return s;
}

std::vector<std::size_t> sources(std::size_t n, const std::set<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<bool> hit(n, false);
  for (auto [a, b] : edges) hit[b] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!hit[i]) out.push_back(i);
  return out;
}

Outcome graph_oracles() {
  std::mt19937_64 rng(3000);
  std::size_t failures = 0, exhaustive = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
    const double density = std::uniform_real_distribution<double>(0.1, 0.8)(rng);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    stats::DominanceGraph g;
    for (std::size_t i = 0; i < n; ++i) g.nodes.push_back("v" + std::to_string(i));
    g.highlighted.assign(n, false);
    std::bernoulli_distribution coin(density);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (coin(rng)) g.edges.push_back({order[i], order[j], 0.01});
    std::shuffle(g.edges.begin(), g.edges.end(), rng);

    const auto original = edge_set(g);
    const auto reduced = edge_set(stats::transitive_reduction(g));
    const auto want = closure(n, original);
    bool ok = closure(n, reduced) == want && std::includes(original.begin(), original.end(), reduced.begin(), reduced.end());
    // Minimal: dropping any kept edge loses reachability.
    for (const auto& e : reduced) {
      auto fewer = reduced;
      fewer.erase(e);
      ok = ok && closure(n, fewer) != want;
    }
    // Minimum: no smaller reachability-preserving subset of the original edges.
    if (original.size() <= 14) {
      ++exhaustive;
      const std::vector<std::pair<std::size_t, std::size_t>> all(original.begin(), original.end());
      std::size_t best = all.size();
      for (std::size_t mask = 0; mask < (std::size_t{1} << all.size()); ++mask) {
        const auto size = static_cast<std::size_t>(std::popcount(mask));
        if (size >= best) continue;
        std::set<std::pair<std::size_t, std::size_t>> sub;
        for (std::size_t k = 0; k < all.size(); ++k)
          if (mask >> k & 1) sub.insert(all[k]);
        if (closure(n, sub) == want) best = size;
      }
      ok = ok && best == reduced.size();
    }
    ok = ok && stats::non_dominated_set(g) == sources(n, original);
    ok = ok && stats::non_dominated_set(stats::transitive_reduction(g)) == sources(n, original);
    failures += !ok;
  }
  Outcome o;
  o.pass = failures == 0;
  o.detail = "200 DAGs, " + std::to_string(exhaustive) + " checked against exhaustive subsets, " +
             std::to_string(failures) + " failures";
  return o;
}

// ---------------------------------------------------------------- spearman

std::vector<double> ranks_of(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += (a[i] - ma) * (b[i] - mb);
    aa += (a[i] - ma) * (a[i] - ma);
    bb += (b[i] - mb) * (b[i] - mb);
  }
  return ab / std::sqrt(aa * bb);
}

Outcome spearman_exactness() {
  std::mt19937_64 rng(4000);
  double worst_rho = 0, worst_p = 0;
  std::size_t cases = 0;
  for (std::size_t n = 3; n <= 7; ++n) {
    for (int trial = 0; trial < 40; ++trial) {
      std::uniform_int_distribution<int> level(0, trial % 2 ? 3 : 1000);
      std::vector<double> x(n), y(n);
      for (auto& v : x) v = level(rng);
      for (auto& v : y) v = level(rng);
      const auto rx = ranks_of(x), ry = ranks_of(y);
      if (std::adjacent_find(rx.begin(), rx.end(), std::not_equal_to<>()) == rx.end() ||
          std::adjacent_find(ry.begin(), ry.end(), std::not_equal_to<>()) == ry.end())
        continue;
      const double rho = pearson(rx, ry);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::size_t hits = 0, total = 0;
      do {
        std::vector<double> shuffled(n);
        for (std::size_t i = 0; i < n; ++i) shuffled[i] = ry[perm[i]];
        ++total;
        hits += std::abs(pearson(rx, shuffled)) >= std::abs(rho) - 1e-12;
      } while (std::next_permutation(perm.begin(), perm.end()));
      const double p = static_cast<double>(hits) / static_cast<double>(total);
      const auto got = stats::spearman(x, y);
      worst_rho = std::max(worst_rho, std::abs(got.rho - rho));
      worst_p = std::max(worst_p, std::abs(got.p_value - p));
      ++cases;
    }
  }
  Outcome o;
  o.pass = worst_rho <= 1e-12 && worst_p <= 1e-12 && cases > 150;
  o.detail = std::to_string(cases) + " cases n=3..7, max |drho| " + scientific(worst_rho) + ", max |dp| " +
             scientific(worst_p);
  return o;
}

// ---------------------------------------------------------------- balancing

Outcome balancing() {
  std::size_t tasks = 0, violations = 0, skipped = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (const auto split : {Split::Train, Split::Test}) {
      const auto sentences = testing::random_sentences(seed * 2 + (split == Split::Test), 30 + seed % 50, split);
      std::vector<repr::RowKey> index;
      for (const auto& s : sentences)
        for (const auto& t : s.tokens) index.push_back({t.sentence_id, t.token_index});
      const data::RowLookup lookup(index);
      for (const auto& rel : conllu::relation_inventory(sentences, sentences)) {
        std::set<std::uint32_t> pos_rows, neg_rows;
        for (const auto& s : sentences) {
          const bool has = std::any_of(s.tokens.begin(), s.tokens.end(), [&](const auto& t) { return t.deprel == rel; });
          if (!has) continue;
          for (const auto& t : s.tokens) (t.deprel == rel ? pos_rows : neg_rows).insert(lookup.row(t.sentence_id, t.token_index));
        }
        data::TaskRows task;
        try {
          task = data::build_task_rows(sentences, lookup, rel, derive_seed(seed, rel));
        } catch (const data::TaskSkipped&) {
          ++skipped;
          violations += !neg_rows.empty();
          continue;
        }
        ++tasks;
        std::map<std::uint32_t, int> seen_neg;
        std::set<std::uint32_t> seen_pos;
        std::size_t ones = 0;
        bool ok = task.size() == 2 * task.n_negatives && task.n_negatives == neg_rows.size() &&
                  task.n_unique_positives == pos_rows.size();
        for (std::size_t i = 0; i < task.size(); ++i) {
          if (task.labels[i]) {
            ++ones;
            ok = ok && pos_rows.contains(task.rows[i]);
            seen_pos.insert(task.rows[i]);
          } else {
            ok = ok && neg_rows.contains(task.rows[i]);
            ++seen_neg[task.rows[i]];
          }
        }
        ok = ok && ones * 2 == task.size() && seen_neg.size() == neg_rows.size();
        for (const auto& [_, count] : seen_neg) ok = ok && count == 1;
        if (pos_rows.size() <= neg_rows.size()) ok = ok && seen_pos == pos_rows;
        violations += !ok;
      }
    }
  }
  Outcome o;
  o.pass = violations == 0 && tasks > 0;
  o.detail = "100 seeds x 2 splits, " + std::to_string(tasks) + " tasks, " + std::to_string(skipped) +
             " degenerate, " + std::to_string(violations) + " violations";
  return o;
}

// ---------------------------------------------------------------- end to end

harness::RunConfig planted_config(const fs::path& dir) {
  harness::RunConfig cfg;
  cfg.seed = 7;
  cfg.alpha = 0.05;
  cfg.synthetic = harness::SyntheticInputs{};  // 8 relations, 60 train / 40 test sentences
  cfg.scenarios = {"all_100"};
  cfg.out_dir = dir / "out";
  cfg.cache_dir = dir / "cache";
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct EndToEnd {
  Outcome planted;
  Outcome oblivious;
};

EndToEnd end_to_end() {
  EndToEnd out;
  const auto dir = testing::scratch_dir("acceptance-planted");
  const auto cfg = planted_config(dir / "a");
  const auto t0 = Clock::now();
  const auto report = harness::run_experiment(cfg);
  const double secs = seconds_since(t0);
  harness::write_report(report, cfg.out_dir);

  auto again_cfg = planted_config(dir / "b");
  again_cfg.jobs = 1;
  harness::write_report(harness::run_experiment(again_cfg), again_cfg.out_dir);
  const bool deterministic = slurp(cfg.out_dir / "report.json") == slurp(again_cfg.out_dir / "report.json") &&
                             slurp(cfg.out_dir / "accuracy.csv") == slurp(again_cfg.out_dir / "accuracy.csv");

  const auto& sc = report.scenarios.at(0);
  std::vector<std::string> trees;
  for (const auto& name : sc.non_dominated)
    if (clf::spec_from_short_name(name, cfg.seed)->is_knowledge_tree()) trees.push_back(name);
  out.planted.pass = !sc.too_small && report.accuracy.tasks.size() >= 8 && !trees.empty() && sc.baseline_dominated &&
                     deterministic && secs < 300.0;
  out.planted.detail = std::to_string(report.accuracy.tasks.size()) + " relations, " + std::to_string(trees.size()) +
                       " knowledge-tree specs non-dominated" + (trees.empty() ? "" : " (" + trees.front() + ", ...)") +
                       ", LR " + (sc.baseline_dominated ? "dominated" : "not dominated") + ", " +
                       (deterministic ? "deterministic" : "NOT deterministic") + ", " + fixed(secs) + " s";

  // Every symmetric model written by that run, read back from the cache.
  std::size_t models = 0, tree_count = 0, levels = 0, bad = 0;
  for (const auto& entry : fs::directory_iterator(cfg.cache_dir)) {
    const auto doc = nlohmann::json::parse(slurp(entry.path()));
    const auto& model = doc.at("model");
    if (model.at("family") != "gb_symmetric") continue;
    ++models;
    const int depth = model.at("depth").get<int>();
    for (const auto& t : model.at("params").at("trees")) {
      ++tree_count;
      const auto& splits = t.at("splits");
      const bool shape = splits.is_array() && static_cast<int>(splits.size()) <= depth &&
                         t.at("leaves").size() == (std::size_t{1} << splits.size());
      bool pairs = true;
      for (const auto& s : splits) {
        pairs = pairs && s.is_array() && s.size() == 2 && s.at(0).is_number_integer() && s.at(1).is_number();
        ++levels;
      }
      bad += !(shape && pairs);
    }
  }
  out.oblivious.pass = bad == 0 && models == 12 * report.accuracy.tasks.size();
  out.oblivious.detail = std::to_string(models) + " models, " + std::to_string(tree_count) + " trees, " +
                         std::to_string(levels) + " levels, " + std::to_string(bad) + " malformed";
  return out;
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, Outcome>> results;
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };
  results.emplace_back("stump-oracle equivalence", guarded(stump_oracle));
  results.emplace_back("boosting monotonicity", guarded(monotone_loss));

  EndToEnd e2e;
  try {
    e2e = end_to_end();
  } catch (const std::exception& e) {
    e2e.planted = {false, std::string("exception: ") + e.what()};
    e2e.oblivious = e2e.planted;
  }
  results.emplace_back("oblivious structure", e2e.oblivious);
  results.emplace_back("graph oracles", guarded(graph_oracles));
  results.emplace_back("spearman exactness", guarded(spearman_exactness));
  results.emplace_back("balancing arithmetic", guarded(balancing));
  results.emplace_back("planted-signal end-to-end", e2e.planted);

  int failed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& [name, o] = results[i];
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << name << ": " << o.detail << "\n";
    failed += !o.pass;
  }
  std::cout << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
