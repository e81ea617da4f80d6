#include "ktrees/classifier_spec.hpp"

#include <array>

namespace ktrees::clf {
namespace {

struct FamilyName {
  Family family;
  const char* name;   // config / serialisation name
  const char* table;  // short-name stem
};

constexpr std::array<FamilyName, 9> kFamilies{{
    {Family::LogReg, "logreg", "LR"},
    {Family::Mlp, "mlp", "MLP"},
    {Family::RandomForest, "random_forest", "RF"},
    {Family::Knn, "knn", "KNN"},
    {Family::Svm, "svm", "SVC"},
    {Family::NaiveBayes, "naive_bayes", "NB"},
    {Family::GbClassic, "gb_classic", "GB"},
    {Family::GbAsymmetric, "gb_asymmetric", "XGB"},
    {Family::GbSymmetric, "gb_symmetric", "Ct"},
}};

const FamilyName& entry(Family f) {
  for (const auto& e : kFamilies)
    if (e.family == f) return e;
  throw std::logic_error("unknown family");
}

}  // namespace

const char* to_string(Family f) { return entry(f).name; }

Family family_from_string(const std::string& name) {
  for (const auto& e : kFamilies)
    if (name == e.name || name == e.table) return e.family;
  throw ConfigError("unknown classifier family '" + name + "'");
}

bool is_boosting(Family f) {
  return f == Family::GbClassic || f == Family::GbAsymmetric || f == Family::GbSymmetric;
}

int max_depth(Family f) {
  if (f == Family::GbClassic) return 3;
  return is_boosting(f) ? 6 : 0;
}

std::string ClassifierSpec::short_name() const {
  std::string name = kind == ProbingObject::KnowledgeNeurons ? "kn_" : "";
  name += entry(family).table;
  if (is_boosting(family)) name += "_" + std::to_string(depth);
  return name;
}

std::vector<ClassifierSpec> all_specs(std::uint64_t seed) {
  std::vector<ClassifierSpec> out;
  for (const auto kind : {ProbingObject::Repr, ProbingObject::KnowledgeNeurons}) {
    for (const auto f : {Family::LogReg, Family::Mlp, Family::RandomForest, Family::Knn, Family::Svm,
                         Family::NaiveBayes}) {
      out.push_back({f, 0, kind, seed});
    }
    for (const auto f : {Family::GbClassic, Family::GbAsymmetric, Family::GbSymmetric}) {
      for (int depth = max_depth(f); depth >= 1; --depth) out.push_back({f, depth, kind, seed});
    }
  }
  return out;
}

std::optional<ClassifierSpec> spec_from_short_name(const std::string& name, std::uint64_t seed) {
  for (auto s : all_specs(seed))
    if (s.short_name() == name) return s;
  return std::nullopt;
}

void validate(const ClassifierSpec& spec) {
  if (is_boosting(spec.family)) {
    if (spec.depth < 1 || spec.depth > max_depth(spec.family)) {
      throw ConfigError(std::string(to_string(spec.family)) + " depth must be in 1.." +
                        std::to_string(max_depth(spec.family)));
    }
  } else if (spec.depth != 0) {
    throw ConfigError(std::string(to_string(spec.family)) + " takes no depth");
  }
}

Hyperparameters default_hyperparameters(const ClassifierSpec& spec) {
  Hyperparameters hp;
  switch (spec.family) {
    case Family::Svm:
      hp.tol = 1e-3;
      break;
    case Family::GbClassic:
      hp.rounds = 100;
      hp.step = 0.1;
      break;
    case Family::GbAsymmetric:
      hp.rounds = 100;
      hp.step = 0.3;
      hp.lambda = 1.0;
      hp.min_child_hessian = 1.0;
      hp.gamma = 0.0;
      break;
    case Family::GbSymmetric:
      hp.rounds = 500;
      hp.step = 0.06;
      hp.lambda = 3.0;
      break;
    default:
      break;
  }
  return hp;
}

}  // namespace ktrees::clf
