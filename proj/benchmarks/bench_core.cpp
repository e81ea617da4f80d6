#include <benchmark/benchmark.h>

#include <random>

#include "ktrees/repr_store.hpp"
#include "ktrees/stats.hpp"
#include "ktrees/synth.hpp"
#include "ktrees/trees.hpp"

using namespace ktrees;

namespace {

struct Problem {
  Matrix x;
  std::vector<double> g, h;
};

Problem make_problem(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(11);
  std::normal_distribution<float> normal;
  Problem p{Matrix(rows, cols), {}, {}};
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) p.x(r, c) = normal(rng);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double y = p.x(r, 0) + 0.5 * p.x(r, 1) > 0 ? 1.0 : 0.0;
    p.g.push_back(0.5 - y);
    p.h.push_back(0.25);
  }
  return p;
}

void BM_ObliviousTreeFit(benchmark::State& state) {
  const auto p = make_problem(state.range(0), 48);
  const auto sorted = trees::SortedColumns::build(p.x);
  for (auto _ : state) benchmark::DoNotOptimize(trees::oblivious_tree_fit(p.g, p.h, p.x, sorted, 6, 3.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ObliviousTreeFit)->Arg(500)->Arg(2000)->Arg(8000);

void BM_GrowTree(benchmark::State& state) {
  const auto p = make_problem(state.range(0), 48);
  const auto sorted = trees::SortedColumns::build(p.x);
  const trees::GrowOptions options{6, 1.0, 1.0, 0.0};
  for (auto _ : state) benchmark::DoNotOptimize(trees::grow_tree(p.g, p.h, p.x, sorted, options));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GrowTree)->Arg(500)->Arg(2000)->Arg(8000);

void BM_KnowledgeNeuronProjection(benchmark::State& state) {
  repr::SynthSpec spec;
  spec.n_sentences = static_cast<std::size_t>(state.range(0));
  spec.d = 64;
  spec.h = 256;
  const auto out = repr::synth_bundle(5, spec);
  for (auto _ : state) benchmark::DoNotOptimize(repr::project_knowledge_neurons(out.bundle));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.bundle.n_tokens()));
}
BENCHMARK(BM_KnowledgeNeuronProjection)->Arg(100)->Arg(1000);

void BM_WilcoxonSignedRank(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.01, 0.05);
  std::vector<double> d(static_cast<std::size_t>(state.range(0)));
  for (auto& v : d) v = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(stats::wilcoxon_signed_rank(d));
}
BENCHMARK(BM_WilcoxonSignedRank)->Arg(10)->Arg(25)->Arg(100);

}  // namespace
BENCHMARK_MAIN();
