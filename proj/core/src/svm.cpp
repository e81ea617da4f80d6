#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <numeric>
#include <random>
#include <unordered_map>

#include "ktrees/classifiers.hpp"

namespace ktrees::clf {
namespace {

/// RBF kernel rows with an LRU cache bounded in bytes.
class KernelRows {
 public:
  KernelRows(const Matrix& x, double gamma, std::size_t cache_bytes)
      : x_(x), gamma_(gamma), norms_(x.rowwise().squaredNorm()) {
    const auto row_bytes = std::max<std::size_t>(1, sizeof(float) * static_cast<std::size_t>(x.rows()));
    capacity_ = std::max<std::size_t>(2, cache_bytes / row_bytes);
  }

  const std::vector<float>& row(Eigen::Index i) {
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    std::vector<float> values(static_cast<std::size_t>(x_.rows()));
    const Eigen::VectorXf dots = x_ * x_.row(i).transpose();
    for (Eigen::Index t = 0; t < x_.rows(); ++t) {
      const double dist = std::max(0.0, static_cast<double>(norms_[i]) + norms_[t] - 2.0 * dots[t]);
      values[static_cast<std::size_t>(t)] = static_cast<float>(std::exp(-gamma_ * dist));
    }
    lru_.emplace_front(i, std::move(values));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  const Matrix& x_;
  double gamma_;
  Eigen::VectorXf norms_;
  std::size_t capacity_ = 2;
  std::list<std::pair<Eigen::Index, std::vector<float>>> lru_;
  std::unordered_map<Eigen::Index, decltype(lru_)::iterator> index_;
};

double rbf_gamma(const Matrix& x) {
  const double n = static_cast<double>(x.size());
  const double mean = x.cast<double>().sum() / n;
  const double var = (x.cast<double>().array() - mean).square().sum() / n;
  return var > 0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;
}

}  // namespace

SvmParams fit_svm(const Matrix& x_full, const Labels& labels_full, const Hyperparameters& hp, std::uint64_t seed,
                  TrainingReport& report) {
  const Matrix* xp = &x_full;
  const Labels* yp = &labels_full;
  Matrix x_sub;
  Labels y_sub;
  if (static_cast<std::size_t>(x_full.rows()) > hp.svm_max_rows) {
    std::vector<std::uint32_t> idx(static_cast<std::size_t>(x_full.rows()));
    std::iota(idx.begin(), idx.end(), 0u);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(hp.svm_max_rows);
    std::sort(idx.begin(), idx.end());
    x_sub.resize(static_cast<Eigen::Index>(idx.size()), x_full.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      x_sub.row(static_cast<Eigen::Index>(i)) = x_full.row(idx[i]);
      y_sub.push_back(labels_full[idx[i]]);
    }
    report.subsampled_from = static_cast<std::size_t>(x_full.rows());
    xp = &x_sub;
    yp = &y_sub;
  }
  const Matrix& x = *xp;
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = (*yp)[i] == 1 ? 1.0 : -1.0;

  const double gamma = rbf_gamma(x);
  const double c = hp.C;
  const double eps = hp.tol;
  constexpr double kTau = 1e-12;
  const std::int64_t max_iter =
      hp.svm_max_iter > 0 ? hp.svm_max_iter : std::max<std::int64_t>(10'000'000, 100 * static_cast<std::int64_t>(n));
  KernelRows kernel(x, gamma, hp.svm_cache_mb * 1024 * 1024);

  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  auto is_upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto is_lower = [&](std::size_t t) { return alpha[t] <= 0; };
  auto in_up = [&](std::size_t t) { return y[t] > 0 ? !is_upper(t) : !is_lower(t); };
  auto in_low = [&](std::size_t t) { return y[t] > 0 ? !is_lower(t) : !is_upper(t); };

  std::int64_t iter = 0;
  bool converged = false;
  while (iter < max_iter) {
    // Working set: maximal violating i, then j by second-order gain.
    double g_max = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i_sel = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * grad[t] >= g_max) {
        if (-y[t] * grad[t] > g_max || i_sel < 0) {
          g_max = -y[t] * grad[t];
          i_sel = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    double g_max2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t j_sel = -1;
    double obj_min = std::numeric_limits<double>::infinity();
    const std::vector<float>* k_i = i_sel >= 0 ? &kernel.row(i_sel) : nullptr;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      g_max2 = std::max(g_max2, y[t] * grad[t]);
      if (i_sel < 0) continue;
      const double b = g_max + y[t] * grad[t];
      if (b > 0) {
        // K(t,t) = 1 for RBF.
        double a = 2.0 - 2.0 * (*k_i)[t];
        if (a <= 0) a = kTau;
        if (-(b * b) / a < obj_min) {
          obj_min = -(b * b) / a;
          j_sel = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    if (g_max + g_max2 < eps || i_sel < 0 || j_sel < 0) {
      converged = true;
      break;
    }
    ++iter;

    const auto i = static_cast<std::size_t>(i_sel), j = static_cast<std::size_t>(j_sel);
    const auto& ki = kernel.row(i_sel);
    const std::vector<float> kj = kernel.row(j_sel);
    const double kij = ki[j];
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = 2.0 - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > 0) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
      } else {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = c + diff; }
      }
    } else {
      double quad = 2.0 - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
      }
      if (sum > c) {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }
    const double d_ai = alpha[i] - old_ai, d_aj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      // Q_ti = y_t y_i K_ti
      grad[t] += y[t] * (y[i] * ki[t] * d_ai + y[j] * kj[t] * d_aj);
    }
  }

  // Offset, averaging over free vectors when there are any.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (is_upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  SvmParams p;
  p.gamma = gamma;
  p.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);

  double objective = 0.0;
  std::vector<std::size_t> sv;
  for (std::size_t t = 0; t < n; ++t) {
    objective += alpha[t] * (grad[t] - 1.0) / 2.0;
    if (alpha[t] > 0) sv.push_back(t);
  }
  p.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  for (std::size_t s = 0; s < sv.size(); ++s) {
    p.support_vectors.row(static_cast<Eigen::Index>(s)) = x.row(static_cast<Eigen::Index>(sv[s]));
    p.coef.push_back(alpha[sv[s]] * y[sv[s]]);
  }
  report.iterations = iter;
  report.final_loss = objective;
  report.converged = converged;
  return p;
}

std::vector<double> svm_decision(const SvmParams& p, const Matrix& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()), -p.rho);
  if (p.support_vectors.rows() == 0) return out;
  const Eigen::VectorXf sv_norms = p.support_vectors.rowwise().squaredNorm();
  constexpr Eigen::Index kBlock = 256;
  for (Eigen::Index start = 0; start < x.rows(); start += kBlock) {
    const auto rows = std::min(kBlock, x.rows() - start);
    const Eigen::MatrixXf dots = x.middleRows(start, rows) * p.support_vectors.transpose();
    for (Eigen::Index q = 0; q < rows; ++q) {
      const double qn = x.row(start + q).squaredNorm();
      double s = 0.0;
      for (Eigen::Index t = 0; t < p.support_vectors.rows(); ++t) {
        const double dist = std::max(0.0, qn + sv_norms[t] - 2.0 * static_cast<double>(dots(q, t)));
        s += p.coef[static_cast<std::size_t>(t)] * std::exp(-p.gamma * dist);
      }
      out[static_cast<std::size_t>(start + q)] += s;
    }
  }
  return out;
}

}  // namespace ktrees::clf
