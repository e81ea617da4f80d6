#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktrees/classifier_spec.hpp"
#include "ktrees/dataset.hpp"
#include "ktrees/error.hpp"

namespace ktrees::stats {

// ------------------------------------------------------------ Wilcoxon

struct SignedRankResult {
  std::size_t n = 0;      // non-zero differences
  double w_plus = 0.0;    // sum of ranks of positive differences
  double w_minus = 0.0;
  double p_greater = 1.0; // one-sided, H1: differences tend to be positive
  double p_less = 1.0;
  bool exact = true;
};

/// Differences with |d| <= 1e-12 are dropped; magnitudes within 1e-12 of each
/// other share an average rank. Exact null distribution for n <= 25, normal
/// approximation with continuity and tie correction above.
SignedRankResult wilcoxon_signed_rank(std::span<const double> differences);

inline constexpr std::size_t kExactWilcoxonMax = 25;
inline constexpr std::size_t kMinTasks = 5;

enum class Outcome { Dominates, DominatedBy, Incomparable };
const char* to_string(Outcome o);

struct PairwiseResult {
  Outcome outcome = Outcome::Incomparable;
  /// One-sided p-value in the direction the data favour (the smaller one).
  double p_value = 1.0;
};

/// One-sided Wilcoxon signed-rank over paired per-task accuracies. Throws
/// std::invalid_argument for unequal lengths or fewer than 5 tasks.
PairwiseResult pairwise_dominates(std::span<const double> a, std::span<const double> b, double alpha);

// ------------------------------------------------------------ tables

/// Rows: probing classifiers. Columns: tasks (relations).
struct AccuracyTable {
  std::vector<clf::ClassifierSpec> rows;
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> cells;  // cells[row][task]

  std::optional<std::size_t> row_index(const std::string& short_name) const;
  std::vector<double> column(std::size_t task) const;
};

// ------------------------------------------------------------ graphs

struct Edge {
  std::size_t winner = 0;
  std::size_t loser = 0;
  double p_value = 1.0;

  bool operator==(const Edge&) const = default;
};

struct DominanceGraph {
  std::vector<std::string> nodes;
  std::vector<bool> highlighted;  // knowledge-tree nodes
  std::vector<Edge> edges;

  std::vector<std::size_t> in_degree() const;
};

class DominanceCycle : public AnalysisError {
 public:
  DominanceCycle(std::vector<std::size_t> cycle, const std::string& what)
      : AnalysisError(what), cycle_(std::move(cycle)) {}
  const std::vector<std::size_t>& cycle() const { return cycle_; }

 private:
  std::vector<std::size_t> cycle_;
};

/// A directed cycle as a node sequence, or nullopt for a DAG.
std::optional<std::vector<std::size_t>> find_cycle(const DominanceGraph& g);
/// Throws DominanceCycle naming the cycle's nodes.
void require_acyclic(const DominanceGraph& g);

DominanceGraph build_dominance_graph(const AccuracyTable& table, double alpha);

/// Minimal edge set with the same reachability. Edges keep their p-values.
DominanceGraph transitive_reduction(const DominanceGraph& g);

/// Nodes with in-degree 0, ascending.
std::vector<std::size_t> non_dominated_set(const DominanceGraph& g);

/// Reachability matrix via repeated DFS.
std::vector<std::vector<bool>> reachability(const DominanceGraph& g);

// ------------------------------------------------------------ correlation

struct CorrelationResult {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided
  bool exact = false;
};

class UndefinedStatistic : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Average ranks (1-based) with exact-equality ties.
std::vector<double> average_ranks(std::span<const double> v);

/// Spearman rho on average-tied ranks. Two-sided p by exact permutation
/// enumeration for n <= 8, t approximation with n - 2 degrees of freedom
/// otherwise. Throws UndefinedStatistic for a constant input.
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

inline constexpr std::size_t kExactSpearmanMax = 8;

/// Relative error-rate reduction of the challenger over the baseline:
/// ((1 - base) - (1 - chal)) / (1 - base). Throws UndefinedStatistic when
/// the baseline accuracy is 1.
double error_rate_advantage(double challenger_accuracy, double baseline_accuracy);

// ------------------------------------------------------------ scenarios

struct Scenario {
  std::string name;
  std::optional<double> lr_cap;                      // drop tasks with LR accuracy above this
  std::optional<std::set<data::SizeBucket>> buckets; // keep only these buckets
};

/// The five analysis settings: all_100, all_98, medium_98, medium_large_98, large_98.
std::vector<Scenario> preset_scenarios();
/// Preset name, or "<cap|none>/<bucket+bucket|all>" such as "0.98/medium+large".
Scenario parse_scenario(const std::string& text);

class ScenarioTooSmall : public std::runtime_error {
 public:
  ScenarioTooSmall(std::size_t retained, const std::string& what) : std::runtime_error(what), retained_(retained) {}
  std::size_t retained() const { return retained_; }

 private:
  std::size_t retained_;
};

/// Short name of the row that defines task difficulty.
inline constexpr const char* kBaselineName = "LR";

/// Keep tasks whose baseline accuracy is <= lr_cap and whose bucket is
/// listed. Throws ConfigError when the baseline row is missing and
/// ScenarioTooSmall when fewer than 5 tasks survive.
AccuracyTable scenario_filter(const AccuracyTable& table, const Scenario& scenario,
                              const std::map<std::string, data::SizeBucket>& buckets);

}  // namespace ktrees::stats
