#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ktrees/classifier_spec.hpp"
#include "ktrees/dataset.hpp"
#include "ktrees/matrix.hpp"
#include "ktrees/trees.hpp"

namespace ktrees::clf {

struct LogRegParams {
  std::vector<double> weights;
  double intercept = 0.0;
};

struct MlpParams {
  Matrix w1;  // cols x hidden
  Eigen::VectorXf b1;
  Eigen::VectorXf w2;  // hidden
  float b2 = 0.0f;
};

struct ForestParams {
  std::vector<trees::RegressionTree> trees;  // leaf value = P(y = 1)
};

struct KnnParams {
  Matrix x;
  Labels y;
  int k = 5;
};

struct SvmParams {
  Matrix support_vectors;
  std::vector<double> coef;  // alpha_i * y_i, y in {-1, +1}
  double rho = 0.0;          // decision = sum coef_i K(sv_i, x) - rho
  double gamma = 1.0;
};

struct NaiveBayesParams {
  std::array<std::vector<double>, 2> mean;
  std::array<std::vector<double>, 2> var;
  std::array<double, 2> log_prior{};
};

/// Additive ensemble of per-node trees (GbClassic, GbAsymmetric).
struct BoostedTrees {
  double base_margin = 0.0;
  std::vector<trees::RegressionTree> trees;
};

/// Additive ensemble of oblivious trees (GbSymmetric).
struct ObliviousEnsemble {
  double base_margin = 0.0;
  std::vector<trees::ObliviousTree> trees;
};

using ModelParams =
    std::variant<LogRegParams, MlpParams, ForestParams, KnnParams, SvmParams, NaiveBayesParams, BoostedTrees,
                 ObliviousEnsemble>;

struct TrainingReport {
  std::int64_t iterations = 0;
  std::optional<double> final_loss;  // family-specific training objective
  bool converged = true;
  /// Boosting: mean training log-loss before round 1 and after every round.
  std::vector<double> loss_history;
  /// Svm: original row count when training used a subsample.
  std::optional<std::size_t> subsampled_from;
};

struct TrainedModel {
  ClassifierSpec spec;
  Hyperparameters hyperparameters;
  std::size_t n_features = 0;
  ModelParams params;
  TrainingReport report;
};

class DegenerateFit : public DataError {
 public:
  using DataError::DataError;
};

struct EvalResult {
  ClassifierSpec spec;
  conllu::RelationLabel relation;
  double test_accuracy = 0.0;
  Labels per_example_correct;
};

/// Train one probing classifier. Family contracts (defaults in
/// default_hyperparameters):
///   LogReg        L2 logistic loss (inverse strength C), L-BFGS to max|grad| <= tol or max_iter.
///   Mlp           100 ReLU units, Adam (step 1e-3), minibatches of 200, up to 200 epochs,
///                 stops after 10 epochs without a tol improvement of training loss.
///   RandomForest  100 bootstrap Gini trees, ceil(sqrt(cols)) features per split, no depth cap.
///   Knn           k = 5, Euclidean, majority vote.
///   Svm           RBF with gamma = 1 / (cols * var(X)), C = 1, SMO to KKT tolerance 1e-3.
///                 More than svm_max_rows rows: a seeded subsample is used.
///   NaiveBayes    Gaussian, variances floored by var_smoothing * max feature variance.
///   GbClassic     trees on residuals by squared error, Newton leaf values, step 0.1.
///   GbAsymmetric  second-order gain, lambda 1, min child hessian 1, step 0.3.
///   GbSymmetric   oblivious trees, lambda 3, step 0.06, 500 rounds.
/// Boosting leaf steps are halved while they would raise that leaf's loss,
/// then the whole step is halved while it would raise the mean loss, so
/// training log-loss never increases between rounds.
TrainedModel fit(const ClassifierSpec& spec, const Matrix& x, const Labels& y);
TrainedModel fit(const ClassifierSpec& spec, const Matrix& x, const Labels& y, const Hyperparameters& hp);
TrainedModel fit(const ClassifierSpec& spec, const data::BalancedDataset& train);

/// Margin or log-odds style score; predict() thresholds it at zero (p > 0.5).
std::vector<double> decision_function(const TrainedModel& model, const Matrix& x);
Labels predict(const TrainedModel& model, const Matrix& x);

EvalResult evaluate(const TrainedModel& model, const data::BalancedDataset& test);

/// Mean log-loss for labels in {0,1} at the given margins.
double mean_log_loss(std::span<const double> margins, const Labels& y);

// Family entry points, used by fit().
LogRegParams fit_logreg(const Matrix& x, const Labels& y, const Hyperparameters& hp, TrainingReport& report);
MlpParams fit_mlp(const Matrix& x, const Labels& y, const Hyperparameters& hp, std::uint64_t seed,
                  TrainingReport& report);
ForestParams fit_forest(const Matrix& x, const Labels& y, const Hyperparameters& hp, std::uint64_t seed,
                        TrainingReport& report);
KnnParams fit_knn(const Matrix& x, const Labels& y, const Hyperparameters& hp);
SvmParams fit_svm(const Matrix& x, const Labels& y, const Hyperparameters& hp, std::uint64_t seed,
                  TrainingReport& report);
NaiveBayesParams fit_naive_bayes(const Matrix& x, const Labels& y, const Hyperparameters& hp);
BoostedTrees fit_gb_classic(const Matrix& x, const Labels& y, int depth, const Hyperparameters& hp,
                            TrainingReport& report);
BoostedTrees fit_gb_asymmetric(const Matrix& x, const Labels& y, int depth, const Hyperparameters& hp,
                               TrainingReport& report);
ObliviousEnsemble fit_gb_symmetric(const Matrix& x, const Labels& y, int depth, const Hyperparameters& hp,
                                   TrainingReport& report);

std::vector<double> logreg_decision(const LogRegParams& p, const Matrix& x);
std::vector<double> mlp_decision(const MlpParams& p, const Matrix& x);
std::vector<double> forest_decision(const ForestParams& p, const Matrix& x);
std::vector<double> knn_decision(const KnnParams& p, const Matrix& x);
std::vector<double> svm_decision(const SvmParams& p, const Matrix& x);
std::vector<double> naive_bayes_decision(const NaiveBayesParams& p, const Matrix& x);
std::vector<double> boosted_margin(const BoostedTrees& p, const Matrix& x);
std::vector<double> boosted_margin(const ObliviousEnsemble& p, const Matrix& x);

/// Versioned JSON document: family, hyperparameters, trees as nested arrays,
/// weight matrices as flat arrays.
std::string to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);

inline constexpr int kModelFormatVersion = 1;

}  // namespace ktrees::clf
