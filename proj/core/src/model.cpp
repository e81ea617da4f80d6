#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "ktrees/classifiers.hpp"
#include "ktrees/hashing.hpp"

namespace ktrees::clf {
namespace {

using json = nlohmann::json;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_training_data(const Matrix& x, const Labels& y) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("feature/label row mismatch");
  if (y.size() < 2) throw DegenerateFit("need at least two training rows");
  const auto pos = std::count(y.begin(), y.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size())) {
    throw DegenerateFit("training labels are constant");
  }
  if (std::any_of(y.begin(), y.end(), [](auto v) { return v > 1; })) throw DataError("labels must be 0 or 1");
  if (!x.allFinite()) throw DataError("training features contain NaN or Inf");
}

}  // namespace

TrainedModel fit(const ClassifierSpec& spec, const Matrix& x, const Labels& y) {
  return fit(spec, x, y, default_hyperparameters(spec));
}

TrainedModel fit(const ClassifierSpec& spec, const Matrix& x, const Labels& y, const Hyperparameters& hp) {
  validate(spec);
  check_training_data(x, y);
  TrainedModel m;
  m.spec = spec;
  m.hyperparameters = hp;
  m.n_features = static_cast<std::size_t>(x.cols());
  const auto seed = derive_seed(spec.seed, spec.short_name());
  switch (spec.family) {
    case Family::LogReg: m.params = fit_logreg(x, y, hp, m.report); break;
    case Family::Mlp: m.params = fit_mlp(x, y, hp, seed, m.report); break;
    case Family::RandomForest: m.params = fit_forest(x, y, hp, seed, m.report); break;
    case Family::Knn: m.params = fit_knn(x, y, hp); break;
    case Family::Svm: m.params = fit_svm(x, y, hp, seed, m.report); break;
    case Family::NaiveBayes: m.params = fit_naive_bayes(x, y, hp); break;
    case Family::GbClassic: m.params = fit_gb_classic(x, y, spec.depth, hp, m.report); break;
    case Family::GbAsymmetric: m.params = fit_gb_asymmetric(x, y, spec.depth, hp, m.report); break;
    case Family::GbSymmetric: m.params = fit_gb_symmetric(x, y, spec.depth, hp, m.report); break;
  }
  return m;
}

TrainedModel fit(const ClassifierSpec& spec, const data::BalancedDataset& train) {
  if (train.kind != spec.kind) throw ShapeError("dataset probing object does not match classifier spec");
  return fit(spec, train.features, train.labels);
}

std::vector<double> decision_function(const TrainedModel& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.n_features) {
    throw ShapeError("model expects " + std::to_string(model.n_features) + " columns, got " +
                     std::to_string(x.cols()));
  }
  return std::visit(Overloaded{
                        [&](const LogRegParams& p) { return logreg_decision(p, x); },
                        [&](const MlpParams& p) { return mlp_decision(p, x); },
                        [&](const ForestParams& p) { return forest_decision(p, x); },
                        [&](const KnnParams& p) { return knn_decision(p, x); },
                        [&](const SvmParams& p) { return svm_decision(p, x); },
                        [&](const NaiveBayesParams& p) { return naive_bayes_decision(p, x); },
                        [&](const BoostedTrees& p) { return boosted_margin(p, x); },
                        [&](const ObliviousEnsemble& p) { return boosted_margin(p, x); },
                    },
                    model.params);
}

Labels predict(const TrainedModel& model, const Matrix& x) {
  const auto scores = decision_function(model, x);
  Labels out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > 0 ? 1 : 0;
  return out;
}

EvalResult evaluate(const TrainedModel& model, const data::BalancedDataset& test) {
  if (test.kind != model.spec.kind) throw ShapeError("test set probing object does not match the model");
  const auto predicted = predict(model, test.features);
  EvalResult r;
  r.spec = model.spec;
  r.relation = test.relation;
  r.per_example_correct.resize(predicted.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    r.per_example_correct[i] = predicted[i] == test.labels[i] ? 1 : 0;
    correct += r.per_example_correct[i];
  }
  r.test_accuracy = predicted.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(predicted.size());
  return r;
}

// ---------------------------------------------------------------- JSON

namespace {

json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<float>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from(const json& j) {
  Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto data = j.at("data").get<std::vector<float>>();
  if (data.size() != static_cast<std::size_t>(m.size())) throw DataError("model matrix payload size mismatch");
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

template <typename V>
json vector_json(const V& v) {
  return std::vector<float>(v.data(), v.data() + v.size());
}

// Node arrays: [feature, threshold, left, right, value]; leaves use feature -1.
json tree_json(const trees::RegressionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value}));
  return nodes;
}

trees::RegressionTree tree_from(const json& j) {
  trees::RegressionTree t;
  for (const auto& n : j) {
    t.nodes.push_back({n.at(0).get<std::int32_t>(), n.at(1).get<float>(), n.at(2).get<std::int32_t>(),
                       n.at(3).get<std::int32_t>(), n.at(4).get<double>()});
  }
  return t;
}

json hyperparameters_json(const ClassifierSpec& spec, const Hyperparameters& hp) {
  switch (spec.family) {
    case Family::LogReg: return {{"C", hp.C}, {"tol", hp.tol}, {"max_iter", hp.max_iter}};
    case Family::Mlp:
      return {{"hidden_units", hp.hidden_units}, {"learning_rate", hp.learning_rate}, {"max_epochs", hp.max_epochs},
              {"batch_size", hp.batch_size},     {"l2_alpha", hp.l2_alpha},           {"tol", hp.tol},
              {"n_iter_no_change", hp.n_iter_no_change}};
    case Family::RandomForest: return {{"n_trees", hp.n_trees}};
    case Family::Knn: return {{"k", hp.k}};
    case Family::Svm:
      return {{"C", hp.C},
              {"tol", hp.tol},
              {"max_rows", hp.svm_max_rows},
              {"cache_mb", hp.svm_cache_mb},
              {"max_iter", hp.svm_max_iter}};
    case Family::NaiveBayes: return {{"var_smoothing", hp.var_smoothing}};
    default:
      return {{"depth", spec.depth},   {"rounds", hp.rounds},
              {"step", hp.step},       {"lambda", hp.lambda},
              {"min_child_hessian", hp.min_child_hessian}, {"gamma", hp.gamma}};
  }
}

Hyperparameters hyperparameters_from(const ClassifierSpec& spec, const json& j) {
  auto hp = default_hyperparameters(spec);
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("C", hp.C);
  get("tol", hp.tol);
  if (spec.family == Family::Svm) {
    get("max_iter", hp.svm_max_iter);
  } else {
    get("max_iter", hp.max_iter);
  }
  get("hidden_units", hp.hidden_units);
  get("learning_rate", hp.learning_rate);
  get("max_epochs", hp.max_epochs);
  get("batch_size", hp.batch_size);
  get("l2_alpha", hp.l2_alpha);
  get("n_iter_no_change", hp.n_iter_no_change);
  get("n_trees", hp.n_trees);
  get("k", hp.k);
  get("max_rows", hp.svm_max_rows);
  get("cache_mb", hp.svm_cache_mb);
  get("var_smoothing", hp.var_smoothing);
  get("rounds", hp.rounds);
  get("step", hp.step);
  get("lambda", hp.lambda);
  get("min_child_hessian", hp.min_child_hessian);
  get("gamma", hp.gamma);
  return hp;
}

}  // namespace

std::string to_json(const TrainedModel& m) {
  json j;
  j["format"] = "ktrees-model";
  j["version"] = kModelFormatVersion;
  j["family"] = to_string(m.spec.family);
  j["name"] = m.spec.short_name();
  j["depth"] = m.spec.depth;
  j["kind"] = repr::to_string(m.spec.kind);
  j["seed"] = m.spec.seed;
  j["n_features"] = m.n_features;
  j["hyperparameters"] = hyperparameters_json(m.spec, m.hyperparameters);

  json report;
  report["iterations"] = m.report.iterations;
  report["final_loss"] = m.report.final_loss ? json(*m.report.final_loss) : json(nullptr);
  report["converged"] = m.report.converged;
  report["loss_history"] = m.report.loss_history;
  report["subsampled_from"] = m.report.subsampled_from ? json(*m.report.subsampled_from) : json(nullptr);
  j["training_report"] = report;

  j["params"] = std::visit(
      Overloaded{
          [](const LogRegParams& p) -> json { return {{"weights", p.weights}, {"intercept", p.intercept}}; },
          [](const MlpParams& p) -> json {
            return {{"w1", matrix_json(p.w1)}, {"b1", vector_json(p.b1)}, {"w2", vector_json(p.w2)}, {"b2", p.b2}};
          },
          [](const ForestParams& p) -> json {
            json trees = json::array();
            for (const auto& t : p.trees) trees.push_back(tree_json(t));
            return {{"trees", trees}};
          },
          [](const KnnParams& p) -> json { return {{"x", matrix_json(p.x)}, {"y", p.y}, {"k", p.k}}; },
          [](const SvmParams& p) -> json {
            return {{"support_vectors", matrix_json(p.support_vectors)},
                    {"coef", p.coef},
                    {"rho", p.rho},
                    {"gamma", p.gamma}};
          },
          [](const NaiveBayesParams& p) -> json {
            return {{"mean", {p.mean[0], p.mean[1]}},
                    {"var", {p.var[0], p.var[1]}},
                    {"log_prior", {p.log_prior[0], p.log_prior[1]}}};
          },
          [](const BoostedTrees& p) -> json {
            json trees = json::array();
            for (const auto& t : p.trees) trees.push_back(tree_json(t));
            return {{"base_margin", p.base_margin}, {"trees", trees}};
          },
          [](const ObliviousEnsemble& p) -> json {
            json trees = json::array();
            for (const auto& t : p.trees) {
              json splits = json::array();
              for (const auto& s : t.levels) splits.push_back(json::array({s.feature, s.threshold}));
              trees.push_back({{"splits", splits}, {"leaves", t.leaf_values}});
            }
            return {{"base_margin", p.base_margin}, {"trees", trees}};
          },
      },
      m.params);
  return j.dump();
}

TrainedModel model_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    if (j.at("format") != "ktrees-model") throw DataError("not a ktrees model document");
    if (j.at("version").get<int>() != kModelFormatVersion) throw DataError("unsupported model format version");
    TrainedModel m;
    m.spec.family = family_from_string(j.at("family").get<std::string>());
    m.spec.depth = j.at("depth").get<int>();
    m.spec.kind = repr::probing_object_from_string(j.at("kind").get<std::string>());
    m.spec.seed = j.at("seed").get<std::uint64_t>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.hyperparameters = hyperparameters_from(m.spec, j.at("hyperparameters"));

    const auto& r = j.at("training_report");
    m.report.iterations = r.at("iterations").get<std::int64_t>();
    if (!r.at("final_loss").is_null()) m.report.final_loss = r.at("final_loss").get<double>();
    m.report.converged = r.at("converged").get<bool>();
    m.report.loss_history = r.at("loss_history").get<std::vector<double>>();
    if (!r.at("subsampled_from").is_null()) m.report.subsampled_from = r.at("subsampled_from").get<std::size_t>();

    const auto& p = j.at("params");
    switch (m.spec.family) {
      case Family::LogReg:
        m.params = LogRegParams{p.at("weights").get<std::vector<double>>(), p.at("intercept").get<double>()};
        break;
      case Family::Mlp: {
        MlpParams q;
        q.w1 = matrix_from(p.at("w1"));
        const auto b1 = p.at("b1").get<std::vector<float>>();
        const auto w2 = p.at("w2").get<std::vector<float>>();
        q.b1 = Eigen::Map<const Eigen::VectorXf>(b1.data(), static_cast<Eigen::Index>(b1.size()));
        q.w2 = Eigen::Map<const Eigen::VectorXf>(w2.data(), static_cast<Eigen::Index>(w2.size()));
        q.b2 = p.at("b2").get<float>();
        m.params = std::move(q);
        break;
      }
      case Family::RandomForest: {
        ForestParams q;
        for (const auto& t : p.at("trees")) q.trees.push_back(tree_from(t));
        m.params = std::move(q);
        break;
      }
      case Family::Knn:
        m.params = KnnParams{matrix_from(p.at("x")), p.at("y").get<Labels>(), p.at("k").get<int>()};
        break;
      case Family::Svm:
        m.params = SvmParams{matrix_from(p.at("support_vectors")), p.at("coef").get<std::vector<double>>(),
                             p.at("rho").get<double>(), p.at("gamma").get<double>()};
        break;
      case Family::NaiveBayes: {
        NaiveBayesParams q;
        for (int c = 0; c < 2; ++c) {
          q.mean[c] = p.at("mean").at(c).get<std::vector<double>>();
          q.var[c] = p.at("var").at(c).get<std::vector<double>>();
          q.log_prior[c] = p.at("log_prior").at(c).get<double>();
        }
        m.params = std::move(q);
        break;
      }
      case Family::GbClassic:
      case Family::GbAsymmetric: {
        BoostedTrees q;
        q.base_margin = p.at("base_margin").get<double>();
        for (const auto& t : p.at("trees")) q.trees.push_back(tree_from(t));
        m.params = std::move(q);
        break;
      }
      case Family::GbSymmetric: {
        ObliviousEnsemble q;
        q.base_margin = p.at("base_margin").get<double>();
        for (const auto& t : p.at("trees")) {
          trees::ObliviousTree tree;
          for (const auto& s : t.at("splits")) tree.levels.push_back({s.at(0).get<std::int32_t>(), s.at(1).get<float>()});
          tree.leaf_values = t.at("leaves").get<std::vector<double>>();
          if (tree.leaf_values.size() != (std::size_t{1} << tree.levels.size())) {
            throw DataError("oblivious tree leaf count does not match its depth");
          }
          q.trees.push_back(std::move(tree));
        }
        m.params = std::move(q);
        break;
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad model document: ") + e.what());
  }
}

}  // namespace ktrees::clf
