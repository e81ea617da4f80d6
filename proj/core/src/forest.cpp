#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ktrees/classifiers.hpp"

namespace ktrees::clf {
namespace {

struct GiniSplit {
  double score = -1.0;  // sum over children of (c0^2 + c1^2) / n; larger is purer
  std::int32_t feature = -1;
  float threshold = 0.0f;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const Labels& y, std::size_t max_features, std::mt19937_64& rng)
      : x_(x), y_(y), max_features_(max_features), rng_(rng) {}

  trees::RegressionTree build(std::vector<std::uint32_t> sample) {
    trees::RegressionTree tree;
    tree.nodes.emplace_back();
    std::vector<std::pair<std::int32_t, std::vector<std::uint32_t>>> stack;
    stack.emplace_back(0, std::move(sample));
    std::vector<std::int32_t> features(static_cast<std::size_t>(x_.cols()));
    std::iota(features.begin(), features.end(), 0);

    while (!stack.empty()) {
      auto [id, rows] = std::move(stack.back());
      stack.pop_back();
      const auto pos = static_cast<double>(std::count_if(rows.begin(), rows.end(), [&](auto r) { return y_[r] == 1; }));
      const auto n = static_cast<double>(rows.size());
      tree.nodes[static_cast<std::size_t>(id)].value = n > 0 ? pos / n : 0.0;
      if (rows.size() < 2 || pos == 0 || pos == n) continue;

      const double parent = (pos * pos + (n - pos) * (n - pos)) / n;
      const auto split = best_split(rows, features, parent);
      if (split.feature < 0) continue;

      std::vector<std::uint32_t> left, right;
      for (auto r : rows) (x_(r, split.feature) <= split.threshold ? left : right).push_back(r);
      const auto l = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(id)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = l;
      node.right = l + 1;
      stack.emplace_back(l + 1, std::move(right));
      stack.emplace_back(l, std::move(left));
    }
    return tree;
  }

 private:
  GiniSplit best_split(const std::vector<std::uint32_t>& rows, std::vector<std::int32_t>& features, double parent) {
    GiniSplit best;
    std::size_t useful = 0;
    std::vector<std::pair<float, std::uint8_t>> values(rows.size());
    // Partial Fisher-Yates: draw features until max_features non-constant ones were seen.
    for (std::size_t drawn = 0; drawn < features.size() && useful < max_features_; ++drawn) {
      std::uniform_int_distribution<std::size_t> pick(drawn, features.size() - 1);
      std::swap(features[drawn], features[pick(rng_)]);
      const auto f = features[drawn];
      for (std::size_t i = 0; i < rows.size(); ++i) values[i] = {x_(rows[i], f), y_[rows[i]]};
      std::sort(values.begin(), values.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (values.front().first == values.back().first) continue;
      ++useful;
      const double n = static_cast<double>(values.size());
      const double total_pos = static_cast<double>(
          std::count_if(values.begin(), values.end(), [](const auto& v) { return v.second == 1; }));
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        left_pos += values[i].second;
        if (!(values[i + 1].first > values[i].first)) continue;
        const double nl = static_cast<double>(i + 1), nr = n - nl;
        const double rp = total_pos - left_pos;
        const double score = (left_pos * left_pos + (nl - left_pos) * (nl - left_pos)) / nl +
                             (rp * rp + (nr - rp) * (nr - rp)) / nr;
        if (!trees::strictly_better(score, parent)) continue;
        const bool tie = !trees::strictly_better(score, best.score) && !trees::strictly_better(best.score, score);
        if (trees::strictly_better(score, best.score) || (tie && f < best.feature)) {
          best = {score, f, trees::split_threshold(values[i].first, values[i + 1].first)};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const Labels& y_;
  std::size_t max_features_;
  std::mt19937_64& rng_;
};

}  // namespace

ForestParams fit_forest(const Matrix& x, const Labels& y, const Hyperparameters& hp, std::uint64_t seed,
                        TrainingReport& report) {
  const auto max_features =
      static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));
  std::mt19937_64 rng(seed);
  ForestParams out;
  const auto n = static_cast<std::size_t>(x.rows());
  std::uniform_int_distribution<std::uint32_t> draw(0, static_cast<std::uint32_t>(n - 1));
  TreeBuilder builder(x, y, max_features, rng);
  for (int t = 0; t < hp.n_trees; ++t) {
    std::vector<std::uint32_t> sample(n);
    for (auto& r : sample) r = draw(rng);
    out.trees.push_back(builder.build(std::move(sample)));
  }
  report.iterations = hp.n_trees;
  return out;
}

std::vector<double> forest_decision(const ForestParams& p, const Matrix& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()), 0.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (const auto& t : p.trees) s += t.predict(trees::row_span(x, i));
    out[static_cast<std::size_t>(i)] = s / static_cast<double>(p.trees.size()) - 0.5;
  }
  return out;
}

}  // namespace ktrees::clf
