#include <algorithm>
#include <cmath>
#include <numeric>

#include "ktrees/stats.hpp"

namespace ktrees::stats {
namespace {

constexpr double kZeroDifference = 1e-12;

double upper_normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Dominates: return "dominates";
    case Outcome::DominatedBy: return "dominated_by";
    case Outcome::Incomparable: return "incomparable";
  }
  return "?";
}

SignedRankResult wilcoxon_signed_rank(std::span<const double> differences) {
  std::vector<double> d;
  for (double x : differences)
    if (std::abs(x) > kZeroDifference) d.push_back(x);
  SignedRankResult r;
  r.n = d.size();
  if (d.empty()) return r;

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(d[a]) < std::abs(d[b]); });

  // Doubled average ranks are integers: positions i..j share rank (i + j) / 2.
  std::vector<long> doubled(d.size());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) - std::abs(d[order[j]]) <= kZeroDifference) ++j;
    const long twice_rank = static_cast<long>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) doubled[order[k]] = twice_rank;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long obs2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0) obs2 += doubled[i];
  }
  const long total2 = std::accumulate(doubled.begin(), doubled.end(), 0L);
  r.w_plus = obs2 / 2.0;
  r.w_minus = (total2 - obs2) / 2.0;
  const double n = static_cast<double>(r.n);

  if (r.n <= kExactWilcoxonMax) {
    std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
    count[0] = 1.0;
    long reach = 0;
    for (auto rank2 : doubled) {
      for (long s = reach; s >= 0; --s) count[static_cast<std::size_t>(s + rank2)] += count[static_cast<std::size_t>(s)];
      reach += rank2;
    }
    const double all = std::ldexp(1.0, static_cast<int>(r.n));
    double ge = 0.0, le = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (s >= obs2) ge += count[static_cast<std::size_t>(s)];
      if (s <= obs2) le += count[static_cast<std::size_t>(s)];
    }
    r.p_greater = ge / all;
    r.p_less = le / all;
    r.exact = true;
  } else {
    const double mean = n * (n + 1) / 4.0;
    const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
    const double sd = std::sqrt(var);
    r.p_greater = std::clamp(upper_normal_tail((r.w_plus - mean - 0.5) / sd), 0.0, 1.0);
    r.p_less = std::clamp(upper_normal_tail((r.w_minus - mean - 0.5) / sd), 0.0, 1.0);
    r.exact = false;
  }
  return r;
}

PairwiseResult pairwise_dominates(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size()) throw std::invalid_argument("pairwise_dominates: vectors differ in length");
  if (a.size() < kMinTasks) {
    throw std::invalid_argument("pairwise_dominates: need at least " + std::to_string(kMinTasks) + " tasks, got " +
                                std::to_string(a.size()));
  }
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const auto w = wilcoxon_signed_rank(diff);
  if (w.n == 0) return {Outcome::Incomparable, 1.0};
  if (w.p_greater < alpha) return {Outcome::Dominates, w.p_greater};
  if (w.p_less < alpha) return {Outcome::DominatedBy, w.p_less};
  return {Outcome::Incomparable, std::min(w.p_greater, w.p_less)};
}

}  // namespace ktrees::stats
