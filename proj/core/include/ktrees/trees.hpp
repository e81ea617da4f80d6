#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ktrees/matrix.hpp"

namespace ktrees::trees {

/// For every feature, the row indices ordered by value (ties by row index).
/// Computed once per fit and reused by every boosting round.
struct SortedColumns {
  std::vector<std::vector<std::uint32_t>> order;

  static SortedColumns build(const Matrix& x);
};

/// Threshold between two consecutive distinct values; rows with x <= t go left.
/// Always satisfies lo <= t < hi.
float split_threshold(float lo, float hi);

/// Second-order structure score G^2 / (H + lambda).
inline double leaf_score(double g, double h, double lambda) { return g * g / (h + lambda); }

/// True when `candidate` beats `incumbent` by more than floating-point noise.
/// Near-equal gains keep the incumbent, which was found at a lower feature
/// index or lower threshold.
bool strictly_better(double candidate, double incumbent);

/// Gains at or below this fraction of the magnitudes involved count as zero.
inline constexpr double kGainNoise = 1e-12;

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  float threshold = 0.0f;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

/// Binary tree with per-node splits. Node 0 is the root.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  std::int32_t leaf_of(std::span<const float> row) const;
  double predict(std::span<const float> row) const { return nodes[static_cast<std::size_t>(leaf_of(row))].value; }
  int depth() const;
};

struct GrowOptions {
  int max_depth = 1;
  double lambda = 0.0;
  double min_child_weight = 0.0;  // on the split weights (hessians or counts)
  double min_gain = 0.0;          // gamma
};

/// Grow a tree level by level, giving every leaf its best split under the
/// gain sum_children G^2/(W+lambda) - G^2/(W+lambda), where W sums `weights`.
/// Leaves keep value 0; callers assign leaf values. Without a leaf budget,
/// best-first growth capped at max_depth yields the same tree.
RegressionTree grow_tree(std::span<const double> gradients, std::span<const double> weights, const Matrix& x,
                         const SortedColumns& sorted, const GrowOptions& options);

struct ObliviousSplit {
  std::int32_t feature = 0;
  float threshold = 0.0f;
};

/// Symmetric tree: one split per level shared by every node of that level.
/// Leaf index bit l is set when row[levels[l].feature] > levels[l].threshold.
struct ObliviousTree {
  std::vector<ObliviousSplit> levels;
  std::vector<double> leaf_values;  // 2^levels.size()

  std::size_t leaf_of(std::span<const float> row) const;
  double predict(std::span<const float> row) const { return leaf_values[leaf_of(row)]; }
};

/// Greedy level-wise oblivious tree. Each level takes the (feature, threshold)
/// maximising the second-order gain summed over all nodes of the level. Stops
/// early when no candidate has positive gain, so a tree may have fewer than
/// `depth` levels (zero levels: a single leaf). Leaf values are -G/(H+lambda).
ObliviousTree oblivious_tree_fit(std::span<const double> gradients, std::span<const double> hessians,
                                 const Matrix& x, int depth, double lambda);
ObliviousTree oblivious_tree_fit(std::span<const double> gradients, std::span<const double> hessians,
                                 const Matrix& x, const SortedColumns& sorted, int depth, double lambda);

inline std::span<const float> row_span(const Matrix& x, Eigen::Index r) {
  return {x.data() + r * x.cols(), static_cast<std::size_t>(x.cols())};
}

}  // namespace ktrees::trees
