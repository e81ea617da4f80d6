#include <Eigen/Core>
#include <fmt/format.h>

#include <cctype>

#include "json.hpp"
#include "ktrees/harness.hpp"

namespace ktrees::harness {

using json = nlohmann::ordered_json;

namespace {

std::string num(double v) { return fmt::format("{}", v); }

std::string dot_id(const std::string& name) {
  const bool plain = !name.empty() && !std::isdigit(static_cast<unsigned char>(name.front())) &&
                     std::all_of(name.begin(), name.end(),
                                 [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
  if (plain) return name;
  std::string out = "\"";
  for (char c : name) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string scenario_file_stem(const std::string& name) {
  std::string out;
  for (char c : name) out += std::isalnum(static_cast<unsigned char>(c)) || c == '_' ? c : '_';
  return out;
}

}  // namespace

std::string render_dot(const stats::DominanceGraph& g, const std::string& name) {
  stats::require_acyclic(g);
  const auto top = stats::non_dominated_set(g);
  std::string out = "digraph " + dot_id(name) + " {\n";
  out += "  rankdir=TB;\n  node [shape=box, fontname=\"Helvetica\"];\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    out += "  " + dot_id(g.nodes[i]);
    if (i < g.highlighted.size() && g.highlighted[i]) out += " [style=filled, fillcolor=\"palegreen\"]";
    out += ";\n";
  }
  if (!top.empty()) {
    out += "  { rank=source;";
    for (auto i : top) out += " " + dot_id(g.nodes[i]) + ";";
    out += " }\n";
  }
  for (const auto& e : g.edges)
    out += fmt::format("  {} -> {} [label=\"{:.3g}\"];\n", dot_id(g.nodes[e.winner]), dot_id(g.nodes[e.loser]), e.p_value);
  out += "}\n";
  return out;
}

void emit_dot(const stats::DominanceGraph& graph, const fs::path& path, const std::string& name) {
  repr::atomic_write(path, render_dot(graph, name));
}

std::string manifest_csv(const std::vector<ManifestRow>& manifest) {
  std::string out = "relation,positives,negatives,rows,test_rows,bucket,lr_accuracy,skipped\n";
  for (const auto& m : manifest) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", csv_field(m.relation), m.positives, m.negatives, m.train_rows,
                       m.test_rows, m.bucket ? data::to_string(*m.bucket) : "",
                       m.lr_accuracy ? num(*m.lr_accuracy) : "", csv_field(m.skipped));
  }
  return out;
}

std::string accuracy_csv(const stats::AccuracyTable& table) {
  std::string out = "classifier";
  for (const auto& t : table.tasks) out += "," + csv_field(t);
  out += "\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out += table.rows[r].short_name();
    for (double v : table.cells[r]) out += "," + num(v);
    out += "\n";
  }
  return out;
}

std::string correlations_csv(const std::vector<CorrelationRow>& rows) {
  std::string out = "classifier,against,advantage,n,rho,p_value,exact\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},", r.spec, r.against, r.advantage, r.n);
    if (r.result)
      out += fmt::format("{},{},{}\n", num(r.result->rho), num(r.result->p_value), r.result->exact ? 1 : 0);
    else
      out += ",,\n";
  }
  return out;
}

std::string advantage_csv(const RunReport& report) {
  std::string out = "scenario,tasks,non_dominated,lr_dominated,best_spec,advantage\n";
  for (const auto& s : report.scenarios) {
    if (s.too_small) {
      out += fmt::format("{},{},too_small,,,\n", csv_field(s.scenario.name), *s.too_small);
      continue;
    }
    std::string nd;
    for (const auto& n : s.non_dominated) nd += (nd.empty() ? "" : " ") + n;
    out += fmt::format("{},{},{},{},{},{}\n", csv_field(s.scenario.name), s.tasks.size(), nd,
                       s.baseline_dominated ? 1 : 0, s.best_spec.value_or(""),
                       s.best_advantage ? num(*s.best_advantage) : "");
  }
  return out;
}

std::string report_json(const RunReport& report) {
  json doc;
  doc["format"] = 1;
  doc["seed"] = report.seed;
  doc["alpha"] = report.alpha;
  doc["test"] = "one-sided Wilcoxon signed-rank over per-task accuracies";
  doc["multiple_comparison_correction"] = "none";
  doc["model"] = report.model;
  doc["environment"] = {
      {"compiler", fmt::format("{} {}.{}.{}",
#if defined(__clang__)
                               "clang", __clang_major__, __clang_minor__, __clang_patchlevel__
#elif defined(__GNUC__)
                               "gcc", __GNUC__, __GNUC_MINOR__, __GNUC_PATCHLEVEL__
#else
                               "unknown", 0, 0, 0
#endif
                               )},
      {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
      {"fmt", FMT_VERSION},
      {"model_format", clf::kModelFormatVersion},
      {"cache_format", kCacheFormatVersion},
  };

  json manifest = json::array();
  for (const auto& m : report.manifest) {
    json row = {{"relation", m.relation}, {"positives", m.positives}, {"negatives", m.negatives},
                {"rows", m.train_rows},   {"test_rows", m.test_rows}};
    row["bucket"] = m.bucket ? json(data::to_string(*m.bucket)) : json(nullptr);
    row["lr_accuracy"] = m.lr_accuracy ? json(*m.lr_accuracy) : json(nullptr);
    if (!m.skipped.empty()) row["skipped"] = m.skipped;
    manifest.push_back(row);
  }
  doc["manifest"] = manifest;

  json acc = json::object();
  for (std::size_t r = 0; r < report.accuracy.rows.size(); ++r) {
    json cells = json::object();
    for (std::size_t t = 0; t < report.accuracy.tasks.size(); ++t)
      cells[report.accuracy.tasks[t]] = report.accuracy.cells[r][t];
    acc[report.accuracy.rows[r].short_name()] = cells;
  }
  doc["accuracy"] = acc;

  json scenarios = json::array();
  for (const auto& s : report.scenarios) {
    json j = {{"name", s.scenario.name}};
    j["lr_cap"] = s.scenario.lr_cap ? json(*s.scenario.lr_cap) : json(nullptr);
    json b = json::array();
    if (s.scenario.buckets)
      for (auto x : *s.scenario.buckets) b.push_back(data::to_string(x));
    j["buckets"] = s.scenario.buckets ? b : json("all");
    if (s.too_small) {
      j["status"] = "too_small";
      j["retained"] = *s.too_small;
      scenarios.push_back(j);
      continue;
    }
    j["status"] = "ok";
    j["tasks"] = s.tasks;
    j["non_dominated"] = s.non_dominated;
    j["lr_dominated"] = s.baseline_dominated;
    json edges = json::array();
    for (const auto& e : s.graph.edges)
      edges.push_back({{"winner", s.graph.nodes[e.winner]}, {"loser", s.graph.nodes[e.loser]}, {"p", e.p_value}});
    j["edges"] = edges;
    json reduced = json::array();
    for (const auto& e : s.reduced.edges)
      reduced.push_back({s.reduced.nodes[e.winner], s.reduced.nodes[e.loser]});
    j["reduced_edges"] = reduced;
    j["best_spec"] = s.best_spec ? json(*s.best_spec) : json(nullptr);
    j["best_advantage"] = s.best_advantage ? json(*s.best_advantage) : json(nullptr);
    j["dot"] = "dominance_" + scenario_file_stem(s.scenario.name) + ".dot";
    scenarios.push_back(j);
  }
  doc["scenarios"] = scenarios;

  json corr = json::array();
  for (const auto& c : report.correlations) {
    json j = {{"classifier", c.spec}, {"against", c.against}, {"advantage", c.advantage}, {"n", c.n}};
    j["rho"] = c.result ? json(c.result->rho) : json(nullptr);
    j["p_value"] = c.result ? json(c.result->p_value) : json(nullptr);
    corr.push_back(j);
  }
  doc["correlations"] = corr;
  return doc.dump(2) + "\n";
}

void write_report(const RunReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  repr::atomic_write(dir / "manifest.csv", manifest_csv(report.manifest));
  repr::atomic_write(dir / "accuracy.csv", accuracy_csv(report.accuracy));
  repr::atomic_write(dir / "correlations.csv", correlations_csv(report.correlations));
  repr::atomic_write(dir / "advantage_summary.csv", advantage_csv(report));
  for (const auto& s : report.scenarios) {
    if (s.too_small) continue;
    const auto stem = scenario_file_stem(s.scenario.name);
    emit_dot(s.reduced, dir / ("dominance_" + stem + ".dot"), stem);
  }
  repr::atomic_write(dir / "report.json", report_json(report));
}

}  // namespace ktrees::harness
