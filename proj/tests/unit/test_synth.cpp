#include "doctest.h"
#include "ktrees/classifiers.hpp"
#include "ktrees/dataset.hpp"
#include "ktrees/synth.hpp"

using namespace ktrees;
using namespace ktrees::repr;

namespace {

struct Pair {
  SynthOutput train, test;
};

Pair draw(std::uint64_t seed, SignalMode mode) {
  SynthSpec spec;
  spec.mode = mode;
  spec.split = Split::Train;
  auto train = synth_bundle(seed, spec);
  spec.split = Split::Test;
  spec.n_sentences = 40;
  return {std::move(train), synth_bundle(seed, spec)};
}

double accuracy(const clf::ClassifierSpec& spec, const Pair& p, const std::string& rel) {
  const auto view = [&](const SynthOutput& s) {
    return data::FeatureSource{std::make_shared<const Matrix>(feature_view(s.bundle, spec.kind)), spec.kind,
                               fingerprint(s.bundle)};
  };
  const data::RowLookup train_rows(p.train.bundle.index), test_rows(p.test.bundle.index);
  const auto train = data::build_task_dataset(p.train.sentences, view(p.train), train_rows, rel, 1);
  const auto test = data::build_task_dataset(p.test.sentences, view(p.test), test_rows, rel, 2);
  return clf::evaluate(clf::fit(spec, train), test).test_accuracy;
}

}  // namespace

TEST_CASE("same seed gives byte-identical bundles") {
  SynthSpec spec;
  const auto a = synth_bundle(42, spec);
  const auto b = synth_bundle(42, spec);
  CHECK(encode_bundle(a.bundle) == encode_bundle(b.bundle));
  CHECK(encode_bundle(a.bundle) != encode_bundle(synth_bundle(43, spec).bundle));
}

TEST_CASE("sentences and bundle agree") {
  const auto out = synth_bundle(3, SynthSpec{});
  CHECK(out.bundle.n_tokens() == conllu::count_tokens(out.sentences));
  const data::RowLookup lookup(out.bundle.index);
  for (const auto& s : out.sentences)
    for (const auto& t : s.tokens) CHECK_NOTHROW(lookup.row(t.sentence_id, t.token_index));
  validate(out.bundle);
}

TEST_CASE("train and test splits share the model matrix") {
  const auto p = draw(8, SignalMode::KnowledgeNeurons);
  CHECK(p.train.bundle.ffn == p.test.bundle.ffn);
  CHECK(p.train.bundle.repr.rows() != p.test.bundle.repr.rows());
}

TEST_CASE("inconsistent specs are rejected") {
  SynthSpec spec;
  spec.h = 4;
  CHECK_THROWS_AS(synth_bundle(1, spec), ConfigError);
  spec = {};
  spec.mode = SignalMode::Repr;
  spec.d = 3;
  CHECK_THROWS_AS(synth_bundle(1, spec), ConfigError);
  spec = {};
  spec.min_tokens = 9;
  spec.max_tokens = 3;
  CHECK_THROWS_AS(synth_bundle(1, spec), ConfigError);
}

TEST_CASE("planted repr signal is linearly separable") {
  const auto p = draw(21, SignalMode::Repr);
  const clf::ClassifierSpec lr{clf::Family::LogReg, 0, ProbingObject::Repr, 0};
  for (const auto& rel : {"nsubj", "det", "obl"}) CHECK(accuracy(lr, p, rel) >= 0.99);
}

TEST_CASE("planted knowledge-neuron signal favours depth-1 trees on knowledge neurons") {
  const auto p = draw(21, SignalMode::KnowledgeNeurons);
  const clf::ClassifierSpec lr{clf::Family::LogReg, 0, ProbingObject::Repr, 0};
  for (const auto family : {clf::Family::GbClassic, clf::Family::GbAsymmetric, clf::Family::GbSymmetric}) {
    const clf::ClassifierSpec stump{family, 1, ProbingObject::KnowledgeNeurons, 0};
    for (const auto& rel : {"nsubj", "det", "obl"}) {
      CAPTURE(rel);
      CHECK(accuracy(stump, p, rel) >= accuracy(lr, p, rel) + 0.05);
    }
  }
}
