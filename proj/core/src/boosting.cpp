#include <algorithm>
#include <cmath>

#include "ktrees/classifiers.hpp"

namespace ktrees::clf {
namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct GradientState {
  std::vector<double> g, h;

  void update(const std::vector<double>& margins, const Labels& y) {
    g.resize(margins.size());
    h.resize(margins.size());
    for (std::size_t i = 0; i < margins.size(); ++i) {
      const double p = sigmoid(margins[i]);
      g[i] = p - static_cast<double>(y[i]);
      h[i] = p * (1.0 - p);
    }
  }
};

/// Halve each leaf's step while it raises the log-loss of that leaf's rows.
void backtrack_leaves(const std::vector<std::size_t>& leaf_of_row, std::vector<double>& values,
                      const std::vector<double>& margins, const Labels& y) {
  std::vector<std::vector<std::size_t>> members(values.size());
  for (std::size_t i = 0; i < leaf_of_row.size(); ++i) members[leaf_of_row[i]].push_back(i);
  auto leaf_loss = [&](std::size_t leaf, double v) {
    double s = 0.0;
    for (auto i : members[leaf]) s += softplus(margins[i] + v) - static_cast<double>(y[i]) * (margins[i] + v);
    return s;
  };
  for (std::size_t leaf = 0; leaf < values.size(); ++leaf) {
    if (members[leaf].empty() || values[leaf] == 0.0) continue;
    const double base = leaf_loss(leaf, 0.0);
    int halvings = 0;
    while (leaf_loss(leaf, values[leaf]) > base) {
      if (++halvings > 60) {
        values[leaf] = 0.0;
        break;
      }
      values[leaf] *= 0.5;
    }
  }
}

/// Adds the leaf values to the margins and returns the new mean loss. The
/// per-leaf check above is exact only up to summation order, so the whole
/// step is halved again while the reported loss would rise.
double apply_step(std::vector<double>& values, const std::vector<std::size_t>& leaf_of_row,
                  std::vector<double>& margins, const Labels& y, double previous) {
  std::vector<double> next(margins.size());
  for (int halvings = 0;; ++halvings) {
    if (halvings > 60) std::fill(values.begin(), values.end(), 0.0);
    for (std::size_t i = 0; i < margins.size(); ++i) next[i] = margins[i] + values[leaf_of_row[i]];
    const double loss = mean_log_loss(next, y);
    if (loss <= previous || halvings > 60) {
      margins.swap(next);
      return loss;
    }
    for (auto& v : values) v *= 0.5;
  }
}

void check_labels(const Matrix& x, const Labels& y) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("feature/label row mismatch");
}

template <typename LeafValueFn>
BoostedTrees boost_node_trees(const Matrix& x, const Labels& y, const trees::GrowOptions& grow, bool count_weights,
                              double base_margin, const Hyperparameters& hp, LeafValueFn leaf_value,
                              TrainingReport& report) {
  check_labels(x, y);
  const auto n = y.size();
  const auto sorted = trees::SortedColumns::build(x);
  BoostedTrees model;
  model.base_margin = base_margin;
  std::vector<double> margins(n, base_margin);
  const std::vector<double> ones(n, 1.0);
  GradientState grad;
  report.loss_history = {mean_log_loss(margins, y)};

  for (int round = 0; round < hp.rounds; ++round) {
    grad.update(margins, y);
    auto tree = trees::grow_tree(grad.g, count_weights ? ones : grad.h, x, sorted, grow);

    std::vector<std::size_t> leaf_of_row(n);
    std::vector<std::int32_t> leaf_ids;
    std::vector<std::int32_t> slot(tree.nodes.size(), -1);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      if (tree.nodes[i].is_leaf()) {
        slot[i] = static_cast<std::int32_t>(leaf_ids.size());
        leaf_ids.push_back(static_cast<std::int32_t>(i));
      }
    }
    std::vector<double> g_sum(leaf_ids.size(), 0.0), h_sum(leaf_ids.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto leaf = static_cast<std::size_t>(slot[static_cast<std::size_t>(tree.leaf_of(trees::row_span(x, static_cast<Eigen::Index>(i))))]);
      leaf_of_row[i] = leaf;
      g_sum[leaf] += grad.g[i];
      h_sum[leaf] += grad.h[i];
    }
    std::vector<double> values(leaf_ids.size());
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = hp.step * leaf_value(g_sum[k], h_sum[k]);
    backtrack_leaves(leaf_of_row, values, margins, y);
    const double loss = apply_step(values, leaf_of_row, margins, y, report.loss_history.back());
    for (std::size_t k = 0; k < values.size(); ++k) tree.nodes[static_cast<std::size_t>(leaf_ids[k])].value = values[k];
    model.trees.push_back(std::move(tree));
    report.loss_history.push_back(loss);
  }
  report.iterations = hp.rounds;
  report.final_loss = report.loss_history.back();
  return model;
}

}  // namespace

double mean_log_loss(std::span<const double> margins, const Labels& y) {
  if (margins.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) s += softplus(margins[i]) - static_cast<double>(y[i]) * margins[i];
  return s / static_cast<double>(margins.size());
}

BoostedTrees fit_gb_classic(const Matrix& x, const Labels& y, int depth, const Hyperparameters& hp,
                            TrainingReport& report) {
  const auto pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const auto neg = static_cast<double>(y.size()) - pos;
  trees::GrowOptions grow{depth, 0.0, 1.0, 0.0};
  auto newton = [](double g, double h) { return h < 1e-150 ? 0.0 : -g / h; };
  return boost_node_trees(x, y, grow, /*count_weights=*/true, std::log(pos / neg), hp, newton, report);
}

BoostedTrees fit_gb_asymmetric(const Matrix& x, const Labels& y, int depth, const Hyperparameters& hp,
                               TrainingReport& report) {
  trees::GrowOptions grow{depth, hp.lambda, hp.min_child_hessian, hp.gamma};
  auto regularized = [lambda = hp.lambda](double g, double h) { return -g / (h + lambda); };
  return boost_node_trees(x, y, grow, /*count_weights=*/false, 0.0, hp, regularized, report);
}

ObliviousEnsemble fit_gb_symmetric(const Matrix& x, const Labels& y, int depth, const Hyperparameters& hp,
                                   TrainingReport& report) {
  check_labels(x, y);
  const auto n = y.size();
  const auto sorted = trees::SortedColumns::build(x);
  ObliviousEnsemble model;
  std::vector<double> margins(n, 0.0);
  GradientState grad;
  report.loss_history = {mean_log_loss(margins, y)};
  for (int round = 0; round < hp.rounds; ++round) {
    grad.update(margins, y);
    auto tree = trees::oblivious_tree_fit(grad.g, grad.h, x, sorted, depth, hp.lambda);
    std::vector<std::size_t> leaf_of_row(n);
    for (std::size_t i = 0; i < n; ++i) leaf_of_row[i] = tree.leaf_of(trees::row_span(x, static_cast<Eigen::Index>(i)));
    for (auto& v : tree.leaf_values) v *= hp.step;
    backtrack_leaves(leaf_of_row, tree.leaf_values, margins, y);
    const double loss = apply_step(tree.leaf_values, leaf_of_row, margins, y, report.loss_history.back());
    model.trees.push_back(std::move(tree));
    report.loss_history.push_back(loss);
  }
  report.iterations = hp.rounds;
  report.final_loss = report.loss_history.back();
  return model;
}

std::vector<double> boosted_margin(const BoostedTrees& p, const Matrix& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()), p.base_margin);
  for (const auto& t : p.trees)
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] += t.predict(trees::row_span(x, i));
  return out;
}

std::vector<double> boosted_margin(const ObliviousEnsemble& p, const Matrix& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()), p.base_margin);
  for (const auto& t : p.trees)
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] += t.predict(trees::row_span(x, i));
  return out;
}

}  // namespace ktrees::clf
