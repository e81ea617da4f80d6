#include <algorithm>
#include <functional>

#include "ktrees/stats.hpp"

namespace ktrees::stats {

std::optional<std::size_t> AccuracyTable::row_index(const std::string& short_name) const {
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].short_name() == short_name) return i;
  return std::nullopt;
}

std::vector<double> AccuracyTable::column(std::size_t task) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : cells) out.push_back(r.at(task));
  return out;
}

std::vector<std::size_t> DominanceGraph::in_degree() const {
  std::vector<std::size_t> deg(nodes.size(), 0);
  for (const auto& e : edges) ++deg[e.loser];
  return deg;
}

namespace {

std::vector<std::vector<std::size_t>> adjacency(const DominanceGraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.nodes.size());
  for (const auto& e : g.edges) adj[e.winner].push_back(e.loser);
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

}  // namespace

std::optional<std::vector<std::size_t>> find_cycle(const DominanceGraph& g) {
  const auto adj = adjacency(g);
  enum : char { kWhite, kGrey, kBlack };
  std::vector<char> colour(g.nodes.size(), kWhite);
  std::vector<std::size_t> path;
  std::optional<std::vector<std::size_t>> found;

  std::function<bool(std::size_t)> visit = [&](std::size_t u) {
    colour[u] = kGrey;
    path.push_back(u);
    for (auto v : adj[u]) {
      if (colour[v] == kGrey) {
        const auto start = std::find(path.begin(), path.end(), v);
        found = std::vector<std::size_t>(start, path.end());
        return true;
      }
      if (colour[v] == kWhite && visit(v)) return true;
    }
    path.pop_back();
    colour[u] = kBlack;
    return false;
  };
  for (std::size_t u = 0; u < g.nodes.size(); ++u)
    if (colour[u] == kWhite && visit(u)) break;
  return found;
}

void require_acyclic(const DominanceGraph& g) {
  if (auto cycle = find_cycle(g)) {
    std::string names;
    for (auto v : *cycle) names += g.nodes[v] + " -> ";
    names += g.nodes[cycle->front()];
    throw DominanceCycle(*cycle, "dominance cycle: " + names);
  }
}

DominanceGraph build_dominance_graph(const AccuracyTable& table, double alpha) {
  DominanceGraph g;
  for (const auto& spec : table.rows) {
    g.nodes.push_back(spec.short_name());
    g.highlighted.push_back(spec.is_knowledge_tree());
  }
  for (std::size_t a = 0; a < table.rows.size(); ++a) {
    for (std::size_t b = a + 1; b < table.rows.size(); ++b) {
      const auto r = pairwise_dominates(table.cells[a], table.cells[b], alpha);
      if (r.outcome == Outcome::Dominates) g.edges.push_back({a, b, r.p_value});
      if (r.outcome == Outcome::DominatedBy) g.edges.push_back({b, a, r.p_value});
    }
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& x, const Edge& y) { return std::tie(x.winner, x.loser) < std::tie(y.winner, y.loser); });
  require_acyclic(g);
  return g;
}

std::vector<std::vector<bool>> reachability(const DominanceGraph& g) {
  const auto adj = adjacency(g);
  const auto n = g.nodes.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> stack(adj[s].begin(), adj[s].end());
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      if (reach[s][u]) continue;
      reach[s][u] = true;
      for (auto v : adj[u]) stack.push_back(v);
    }
  }
  return reach;
}

DominanceGraph transitive_reduction(const DominanceGraph& g) {
  require_acyclic(g);
  const auto reach = reachability(g);
  const auto adj = adjacency(g);
  DominanceGraph out = g;
  out.edges.clear();
  for (const auto& e : g.edges) {
    // Redundant when another direct successor of the winner reaches the loser.
    const bool implied = std::any_of(adj[e.winner].begin(), adj[e.winner].end(),
                                     [&](std::size_t w) { return w != e.loser && reach[w][e.loser]; });
    if (!implied) out.edges.push_back(e);
  }
  return out;
}

std::vector<std::size_t> non_dominated_set(const DominanceGraph& g) {
  require_acyclic(g);
  const auto deg = g.in_degree();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < deg.size(); ++i)
    if (deg[i] == 0) out.push_back(i);
  return out;
}

}  // namespace ktrees::stats
