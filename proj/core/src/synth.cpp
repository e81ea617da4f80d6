#include "ktrees/synth.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "ktrees/hashing.hpp"

namespace ktrees::repr {
namespace {

void check(const SynthSpec& spec) {
  if (spec.relations.empty()) throw ConfigError("synthetic spec: no relations");
  if (std::set<std::string>(spec.relations.begin(), spec.relations.end()).size() != spec.relations.size()) {
    throw ConfigError("synthetic spec: duplicate relation names");
  }
  if (spec.n_sentences == 0) throw ConfigError("synthetic spec: n_sentences must be positive");
  if (spec.min_tokens == 0 || spec.min_tokens > spec.max_tokens) {
    throw ConfigError("synthetic spec: need 1 <= min_tokens <= max_tokens");
  }
  if (spec.d == 0 || spec.h == 0) throw ConfigError("synthetic spec: zero dimension");
  const auto planted = spec.relations.size();
  if (spec.h < planted) {
    throw ConfigError("synthetic spec: h = " + std::to_string(spec.h) + " is smaller than the " +
                      std::to_string(planted) + " planted coordinates");
  }
  if (spec.d < planted) {
    throw ConfigError("synthetic spec: d = " + std::to_string(spec.d) + " cannot carry " +
                      std::to_string(planted) + " independent planted directions");
  }
  if (!(spec.band > 0)) throw ConfigError("synthetic spec: band must be positive");
}

}  // namespace

const char* to_string(SignalMode mode) { return mode == SignalMode::Repr ? "repr" : "kn"; }

SignalMode signal_mode_from_string(const std::string& name) {
  if (name == "repr") return SignalMode::Repr;
  if (name == "kn") return SignalMode::KnowledgeNeurons;
  throw ConfigError("unknown synthetic signal mode '" + name + "'");
}

SynthOutput synth_bundle(std::uint64_t seed, const SynthSpec& spec) {
  check(spec);
  const auto d = static_cast<Eigen::Index>(spec.d);
  const auto h = static_cast<Eigen::Index>(spec.h);
  const auto n_rel = static_cast<Eigen::Index>(spec.relations.size());

  // Model-level state: identical for both splits of one seed.
  std::mt19937_64 model_rng(derive_seed(seed, "model"));
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixD ffn(d, h);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < ffn.size(); ++i) ffn.data()[i] = normal(model_rng) * scale;

  // Planted directions, one column per relation.
  MatrixD directions(d, n_rel);
  if (spec.mode == SignalMode::KnowledgeNeurons) {
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(h));
    std::iota(coords.begin(), coords.end(), 0);
    std::shuffle(coords.begin(), coords.end(), model_rng);
    for (Eigen::Index k = 0; k < n_rel; ++k) directions.col(k) = ffn.col(coords[static_cast<std::size_t>(k)]);
  } else {
    MatrixD raw(d, n_rel);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = normal(model_rng);
    Eigen::HouseholderQR<MatrixD> qr(raw);
    directions = qr.householderQ() * MatrixD::Identity(d, n_rel);
  }
  // x = x0 + D (D^T D)^{-1} (t - D^T x0) pins D^T x = t exactly.
  const MatrixD gram = directions.transpose() * directions;
  const Eigen::LDLT<MatrixD> gram_solver(gram);

  std::mt19937_64 rng(derive_seed(seed, std::string("tokens-") + ktrees::to_string(spec.split)));
  std::uniform_int_distribution<std::size_t> length_dist(spec.min_tokens, spec.max_tokens);
  std::vector<double> weights(spec.relations.size());
  std::iota(weights.begin(), weights.end(), 1.0);
  std::discrete_distribution<std::size_t> relation_dist(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  SynthOutput out;
  std::vector<Eigen::VectorXd> rows;
  const std::string prefix = std::string(ktrees::to_string(spec.split)) + "-s";
  for (std::size_t s = 0; s < spec.n_sentences; ++s) {
    conllu::Sentence sentence;
    sentence.split = spec.split;
    sentence.sentence_id = prefix + std::to_string(s + 1);
    const auto len = length_dist(rng);
    for (std::size_t t = 0; t < len; ++t) {
      const auto label = relation_dist(rng);
      conllu::Token token;
      token.sentence_id = sentence.sentence_id;
      token.token_index = static_cast<int>(t + 1);
      token.surface_form = "w" + std::to_string(rng() % 1000);
      token.deprel = spec.relations[label];
      sentence.tokens.push_back(token);

      Eigen::VectorXd x0(d);
      for (Eigen::Index i = 0; i < d; ++i) x0[i] = normal(rng);
      Eigen::VectorXd target(n_rel);
      for (Eigen::Index k = 0; k < n_rel; ++k) {
        const bool positive = static_cast<std::size_t>(k) == label;
        if (spec.mode == SignalMode::KnowledgeNeurons) {
          target[k] = positive ? spec.band * (2.0 * unit(rng) - 1.0)
                               : (coin(rng) ? 1.0 : -1.0) * spec.band * (2.0 + unit(rng));
        } else {
          const double mag = spec.band * (1.0 + unit(rng));
          target[k] = positive ? mag : -mag;
        }
      }
      const Eigen::VectorXd residual = target - directions.transpose() * x0;
      rows.push_back(x0 + directions * gram_solver.solve(residual));
      out.bundle.index.push_back({sentence.sentence_id, token.token_index});
    }
    out.sentences.push_back(std::move(sentence));
  }

  out.bundle.repr.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.bundle.repr.row(static_cast<Eigen::Index>(i)) = rows[i].transpose().cast<float>();
  }
  out.bundle.ffn = ffn.cast<float>();
  out.bundle.meta.model = "synthetic";
  out.bundle.meta.repr_layer = 5;
  out.bundle.meta.ffn_layer = 4;
  out.bundle.meta.extra["synthetic_mode"] = std::string("\"") + to_string(spec.mode) + "\"";
  out.bundle.meta.extra["synthetic_seed"] = std::to_string(seed);
  return out;
}

}  // namespace ktrees::repr
