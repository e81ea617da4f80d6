#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "ktrees/stats.hpp"

namespace ktrees::stats {
namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 3) throw UndefinedStatistic("spearman needs at least 3 pairs");
  const auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  const auto constant = [](const std::vector<double>& r) {
    return std::all_of(r.begin(), r.end(), [&](double v) { return v == r.front(); });
  };
  if (constant(rx) || constant(ry)) throw UndefinedStatistic("spearman on a constant input");

  CorrelationResult out;
  out.rho = pearson(rx, ry);
  const std::size_t n = x.size();
  if (n <= kExactSpearmanMax) {
    out.exact = true;
    const double obs = std::abs(out.rho);
    std::sort(ry.begin(), ry.end());
    std::size_t hits = 0, total = 0;
    do {
      ++total;
      if (std::abs(pearson(rx, ry)) >= obs - 1e-12) ++hits;
    } while (std::next_permutation(ry.begin(), ry.end()));
    // Tied ranks collapse duplicate permutations equally, so the ratio is unchanged.
    out.p_value = static_cast<double>(hits) / static_cast<double>(total);
    return out;
  }
  const double df = static_cast<double>(n - 2);
  if (std::abs(out.rho) >= 1.0) {
    out.p_value = 0.0;
    return out;
  }
  const double t = out.rho * std::sqrt(df / (1.0 - out.rho * out.rho));
  boost::math::students_t dist(df);
  out.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
  return out;
}

double error_rate_advantage(double challenger_accuracy, double baseline_accuracy) {
  const double base_err = 1.0 - baseline_accuracy;
  if (base_err <= 0.0) throw UndefinedStatistic("baseline has zero error rate");
  return (base_err - (1.0 - challenger_accuracy)) / base_err;
}

}  // namespace ktrees::stats
