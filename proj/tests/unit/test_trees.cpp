#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "ktrees/trees.hpp"
#include "test_support.hpp"

using namespace ktrees;
using namespace ktrees::trees;

TEST_CASE("split thresholds stay inside the gap") {
  CHECK(split_threshold(1.0f, 2.0f) == 1.5f);
  const float lo = 1.0f, hi = std::nextafter(1.0f, 2.0f);
  const float t = split_threshold(lo, hi);
  CHECK(t >= lo);
  CHECK(t < hi);
  CHECK(split_threshold(-3.0f, -1.0f) == -2.0f);
}

TEST_CASE("near-equal gains keep the incumbent") {
  CHECK(strictly_better(2.0, 1.0));
  CHECK_FALSE(strictly_better(1.0, 1.0));
  CHECK_FALSE(strictly_better(1.0 + 1e-14, 1.0));
  CHECK(strictly_better(0.5, -std::numeric_limits<double>::infinity()));
}

TEST_CASE("oblivious stump on constant features is a single leaf") {
  Matrix x = Matrix::Constant(6, 2, 1.25f);
  const std::vector<double> g{0.5, -0.5, 0.25, 0.5, 0.5, -0.25};
  const std::vector<double> h(6, 0.25);
  const auto t = oblivious_tree_fit(g, h, x, 3, 3.0);
  CHECK(t.levels.empty());
  REQUIRE(t.leaf_values.size() == 1);
  const double g_sum = std::accumulate(g.begin(), g.end(), 0.0);
  CHECK(t.leaf_values[0] == doctest::Approx(-g_sum / (1.5 + 3.0)));
}

TEST_CASE("oblivious level two maximises the gain summed over both halves") {
  // Column 0 separates the gradient signs; level two has to pick the column
  // whose split helps both halves together, which brute force confirms.
  std::mt19937_64 rng(12);
  const auto x = testing::random_matrix(rng, 60, 4, true);
  std::vector<double> g(60), h(60, 0.25);
  for (int i = 0; i < 60; ++i) g[static_cast<std::size_t>(i)] = (x(i, 0) > 0 ? -0.5 : 0.5) + 0.4 * x(i, 2) - 0.1 * x(i, 3);
  const double lambda = 3.0;
  const auto t = oblivious_tree_fit(g, h, x, 2, lambda);
  REQUIRE(t.levels.size() == 2);

  auto total_gain = [&](int f, float thr) {
    double gain = 0.0;
    for (int half = 0; half < 2; ++half) {
      double gl = 0, hl = 0, gr = 0, hr = 0;
      for (int i = 0; i < 60; ++i) {
        if ((x(i, t.levels[0].feature) > t.levels[0].threshold) != (half == 1)) continue;
        auto& gs = x(i, f) > thr ? gr : gl;
        auto& hs = x(i, f) > thr ? hr : hl;
        gs += g[static_cast<std::size_t>(i)];
        hs += h[static_cast<std::size_t>(i)];
      }
      gain += leaf_score(gl, hl, lambda) + leaf_score(gr, hr, lambda) - leaf_score(gl + gr, hl + hr, lambda);
    }
    return gain;
  };
  const double chosen = total_gain(t.levels[1].feature, t.levels[1].threshold);
  for (int f = 0; f < 4; ++f) {
    std::vector<float> values;
    for (int i = 0; i < 60; ++i) values.push_back(x(i, f));
    std::sort(values.begin(), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      if (values[k] == values[k + 1]) continue;
      CHECK(total_gain(f, split_threshold(values[k], values[k + 1])) <= chosen * (1 + 1e-9));
    }
  }
}

TEST_CASE("grow_tree respects depth and routes rows by x <= t") {
  std::mt19937_64 rng(2);
  const auto x = testing::random_matrix(rng, 80, 3);
  std::vector<double> g(80), w(80, 1.0);
  for (int i = 0; i < 80; ++i) g[static_cast<std::size_t>(i)] = std::sin(3.0 * x(i, 1)) + 0.3 * x(i, 2);
  const auto sorted = SortedColumns::build(x);
  for (int depth = 1; depth <= 4; ++depth) {
    const auto t = grow_tree(g, w, x, sorted, {depth, 0.0, 1.0, 0.0});
    CHECK(t.depth() <= depth);
    CHECK(t.depth() >= 1);
  }
  RegressionTree stump;
  stump.nodes = {{0, 0.5f, 1, 2, 0.0}, {-1, 0, -1, -1, -1.0}, {-1, 0, -1, -1, 1.0}};
  const float at[] = {0.5f};
  const float above[] = {0.6f};
  CHECK(stump.predict(at) == -1.0);
  CHECK(stump.predict(above) == 1.0);
}
