#include <random>

#include "doctest.h"
#include "ktrees/stats.hpp"

using namespace ktrees::stats;

TEST_CASE("perfect agreement and perfect reversal") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(spearman(x, x).rho == doctest::Approx(1.0));
  const std::vector<double> y{9, 7, 4, 2, 1};
  const auto r = spearman(x, y);
  CHECK(r.rho == doctest::Approx(-1.0));
  CHECK(r.exact);
  CHECK(r.p_value == doctest::Approx(2.0 / 120.0).epsilon(1e-12));
}

TEST_CASE("constant input and short input are undefined") {
  const std::vector<double> x{1, 2, 3, 4}, c{2, 2, 2, 2};
  CHECK_THROWS_AS(spearman(x, c), UndefinedStatistic);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{2, 1}), UndefinedStatistic);
  CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("average ranks share ties") {
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("rank invariance and sign flip") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01;
  for (std::size_t n : {5u, 8u, 12u, 30u}) {
    std::vector<double> x(n), y(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = n01(rng);
      y[i] = x[i] + n01(rng);
      neg[i] = -y[i];
    }
    const auto r = spearman(x, y);
    const auto ranked = spearman(average_ranks(x), average_ranks(y));
    CHECK(ranked.rho == doctest::Approx(r.rho));
    CHECK(ranked.p_value == doctest::Approx(r.p_value));
    CHECK(spearman(x, neg).rho == doctest::Approx(-r.rho));
    CHECK(r.exact == (n <= kExactSpearmanMax));
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
  }
}

TEST_CASE("t approximation for larger samples") {
  std::vector<double> x, y;
  for (int i = 0; i < 32; ++i) {
    x.push_back(i);
    y.push_back(-i + (i % 5) * 3.0);
  }
  const auto r = spearman(x, y);
  CHECK_FALSE(r.exact);
  CHECK(r.rho < -0.5);
  CHECK(r.p_value < 0.001);
}

TEST_CASE("error-rate advantage") {
  CHECK(error_rate_advantage(0.95, 0.9) == doctest::Approx(0.5));
  CHECK(error_rate_advantage(0.9, 0.9) == 0.0);
  CHECK(error_rate_advantage(0.8, 0.9) < 0.0);
  CHECK_THROWS_AS(error_rate_advantage(0.9, 1.0), UndefinedStatistic);
  double last = -1e9;
  for (double c = 0.5; c <= 1.0; c += 0.05) {
    const double a = error_rate_advantage(c, 0.85);
    CHECK(a > last);
    last = a;
  }
}
