#include "ktrees/trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ktrees::trees {

SortedColumns SortedColumns::build(const Matrix& x) {
  SortedColumns s;
  s.order.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    auto& idx = s.order[static_cast<std::size_t>(f)];
    idx.resize(static_cast<std::size_t>(x.rows()));
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  }
  return s;
}

float split_threshold(float lo, float hi) {
  const auto mid = static_cast<float>(0.5 * (static_cast<double>(lo) + static_cast<double>(hi)));
  return (mid >= hi || mid < lo) ? lo : mid;
}

bool strictly_better(double candidate, double incumbent) {
  if (!(candidate > incumbent)) return false;
  if (!std::isfinite(incumbent)) return true;
  return candidate - incumbent > 1e-10 * std::max(std::abs(candidate), std::abs(incumbent));
}

std::int32_t RegressionTree::leaf_of(std::span<const float> row) const {
  std::int32_t n = 0;
  while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    n = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return n;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int out = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
    d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    out = std::max(out, d[i] + 1);
  }
  return out;
}

namespace {

struct Candidate {
  double gain = 0.0;
  std::int32_t feature = -1;
  float threshold = 0.0f;
};

}  // namespace

RegressionTree grow_tree(std::span<const double> g, std::span<const double> w, const Matrix& x,
                         const SortedColumns& sorted, const GrowOptions& opt) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (g.size() != n || w.size() != n) throw std::invalid_argument("grow_tree: gradient/weight length mismatch");

  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<std::int32_t> node_of(n, 0);
  std::vector<std::int32_t> active{0};

  for (int level = 0; level < opt.max_depth && !active.empty(); ++level) {
    std::vector<std::int32_t> local(tree.nodes.size(), -1);
    for (std::size_t k = 0; k < active.size(); ++k) local[static_cast<std::size_t>(active[k])] = static_cast<std::int32_t>(k);
    const auto m = active.size();

    std::vector<double> g_tot(m, 0.0), w_tot(m, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto k = local[static_cast<std::size_t>(node_of[r])];
      if (k < 0) continue;
      g_tot[static_cast<std::size_t>(k)] += g[r];
      w_tot[static_cast<std::size_t>(k)] += w[r];
    }

    std::vector<Candidate> best(m);
    std::vector<double> g_left(m), w_left(m);
    std::vector<float> last(m);
    std::vector<std::uint8_t> seen(m);
    for (std::size_t f = 0; f < sorted.order.size(); ++f) {
      std::fill(g_left.begin(), g_left.end(), 0.0);
      std::fill(w_left.begin(), w_left.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0);
      for (const auto r : sorted.order[f]) {
        const auto kk = local[static_cast<std::size_t>(node_of[r])];
        if (kk < 0) continue;
        const auto k = static_cast<std::size_t>(kk);
        const float v = x(r, static_cast<Eigen::Index>(f));
        if (seen[k] && v > last[k]) {
          const double gl = g_left[k], wl = w_left[k];
          const double gr = g_tot[k] - gl, wr = w_tot[k] - wl;
          if (wl >= opt.min_child_weight && wr >= opt.min_child_weight) {
            const double sl = leaf_score(gl, wl, opt.lambda);
            const double sr = leaf_score(gr, wr, opt.lambda);
            const double sp = leaf_score(g_tot[k], w_tot[k], opt.lambda);
            const double gain = sl + sr - sp - opt.min_gain;
            if (gain > kGainNoise * (sl + sr + sp) && strictly_better(gain, best[k].gain)) {
              best[k] = {gain, static_cast<std::int32_t>(f), split_threshold(last[k], v)};
            }
          }
        }
        g_left[k] += g[r];
        w_left[k] += w[r];
        last[k] = v;
        seen[k] = 1;
      }
    }

    std::vector<std::int32_t> next;
    for (std::size_t k = 0; k < m; ++k) {
      if (best[k].feature < 0) continue;
      const auto id = active[k];
      const auto left = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(id)];
      node.feature = best[k].feature;
      node.threshold = best[k].threshold;
      node.left = left;
      node.right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    for (std::size_t r = 0; r < n; ++r) {
      const auto& node = tree.nodes[static_cast<std::size_t>(node_of[r])];
      if (node.is_leaf()) continue;
      node_of[r] = x(static_cast<Eigen::Index>(r), node.feature) <= node.threshold ? node.left : node.right;
    }
    active = std::move(next);
  }
  return tree;
}

std::size_t ObliviousTree::leaf_of(std::span<const float> row) const {
  std::size_t leaf = 0;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (row[static_cast<std::size_t>(levels[l].feature)] > levels[l].threshold) leaf |= std::size_t{1} << l;
  }
  return leaf;
}

ObliviousTree oblivious_tree_fit(std::span<const double> g, std::span<const double> h, const Matrix& x, int depth,
                                 double lambda) {
  return oblivious_tree_fit(g, h, x, SortedColumns::build(x), depth, lambda);
}

ObliviousTree oblivious_tree_fit(std::span<const double> g, std::span<const double> h, const Matrix& x,
                                 const SortedColumns& sorted, int depth, double lambda) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (g.size() != n || h.size() != n) throw std::invalid_argument("oblivious_tree_fit: length mismatch");
  if (depth < 1) throw std::invalid_argument("oblivious_tree_fit: depth must be >= 1");

  ObliviousTree tree;
  std::vector<std::uint32_t> node_of(n, 0);
  constexpr std::size_t kDirectSumNodes = 8;

  for (int level = 0; level < depth; ++level) {
    const std::size_t m = std::size_t{1} << level;
    std::vector<double> g_tot(m, 0.0), h_tot(m, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      g_tot[node_of[r]] += g[r];
      h_tot[node_of[r]] += h[r];
    }
    std::vector<double> parent(m);
    for (std::size_t k = 0; k < m; ++k) parent[k] = leaf_score(g_tot[k], h_tot[k], lambda);

    Candidate best;
    std::vector<double> g_left(m), h_left(m), gain(m), mag(m);
    for (std::size_t f = 0; f < sorted.order.size(); ++f) {
      std::fill(g_left.begin(), g_left.end(), 0.0);
      std::fill(h_left.begin(), h_left.end(), 0.0);
      double total = 0.0, total_mag = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        gain[k] = 0.0;
        mag[k] = 2.0 * parent[k];
        total_mag += mag[k];
      }
      bool seen = false;
      float last = 0.0f;
      for (const auto r : sorted.order[f]) {
        const float v = x(r, static_cast<Eigen::Index>(f));
        if (seen && v > last) {
          double sum = total, sum_mag = total_mag;
          if (m <= kDirectSumNodes) {
            sum = 0.0;
            sum_mag = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
              sum += gain[k];
              sum_mag += mag[k];
            }
          }
          if (sum > kGainNoise * sum_mag && strictly_better(sum, best.gain)) {
            best = {sum, static_cast<std::int32_t>(f), split_threshold(last, v)};
          }
        }
        const auto k = node_of[r];
        g_left[k] += g[r];
        h_left[k] += h[r];
        const double sl = leaf_score(g_left[k], h_left[k], lambda);
        const double sr = leaf_score(g_tot[k] - g_left[k], h_tot[k] - h_left[k], lambda);
        const double new_gain = sl + sr - parent[k];
        const double new_mag = sl + sr + parent[k];
        total += new_gain - gain[k];
        total_mag += new_mag - mag[k];
        gain[k] = new_gain;
        mag[k] = new_mag;
        last = v;
        seen = true;
      }
    }
    if (best.feature < 0) break;
    tree.levels.push_back({best.feature, best.threshold});
    for (std::size_t r = 0; r < n; ++r) {
      if (x(static_cast<Eigen::Index>(r), best.feature) > best.threshold) node_of[r] |= std::uint32_t{1} << level;
    }
  }

  const std::size_t leaves = std::size_t{1} << tree.levels.size();
  std::vector<double> g_leaf(leaves, 0.0), h_leaf(leaves, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    g_leaf[node_of[r]] += g[r];
    h_leaf[node_of[r]] += h[r];
  }
  tree.leaf_values.resize(leaves);
  for (std::size_t k = 0; k < leaves; ++k) {
    const double denom = h_leaf[k] + lambda;
    tree.leaf_values[k] = denom > 0 ? -g_leaf[k] / denom : 0.0;
  }
  return tree;
}

}  // namespace ktrees::trees
