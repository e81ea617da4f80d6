#include <cmath>
#include <numbers>

#include "ktrees/classifiers.hpp"

namespace ktrees::clf {

NaiveBayesParams fit_naive_bayes(const Matrix& x, const Labels& y, const Hyperparameters& hp) {
  const auto d = static_cast<std::size_t>(x.cols());
  const MatrixD xd = x.cast<double>();
  const Eigen::RowVectorXd mean_all = xd.colwise().mean();
  const double max_var = (xd.rowwise() - mean_all).array().square().colwise().mean().maxCoeff();
  const double epsilon = hp.var_smoothing * max_var;

  NaiveBayesParams p;
  std::array<double, 2> count{};
  for (int c = 0; c < 2; ++c) {
    p.mean[c].assign(d, 0.0);
    p.var[c].assign(d, 0.0);
  }
  for (Eigen::Index i = 0; i < xd.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    count[c] += 1;
    for (std::size_t j = 0; j < d; ++j) p.mean[c][j] += xd(i, static_cast<Eigen::Index>(j));
  }
  for (int c = 0; c < 2; ++c)
    for (auto& m : p.mean[c]) m /= count[c];
  for (Eigen::Index i = 0; i < xd.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = xd(i, static_cast<Eigen::Index>(j)) - p.mean[c][j];
      p.var[c][j] += diff * diff;
    }
  }
  const double n = count[0] + count[1];
  for (int c = 0; c < 2; ++c) {
    for (auto& v : p.var[c]) v = v / count[c] + epsilon;
    p.log_prior[c] = std::log(count[c] / n);
  }
  return p;
}

std::vector<double> naive_bayes_decision(const NaiveBayesParams& p, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != p.mean[0].size()) throw ShapeError("naive bayes: column mismatch");
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::array<double, 2> ll{p.log_prior[0], p.log_prior[1]};
    for (int c = 0; c < 2; ++c) {
      for (std::size_t j = 0; j < p.mean[c].size(); ++j) {
        const double diff = x(i, static_cast<Eigen::Index>(j)) - p.mean[c][j];
        ll[c] -= 0.5 * std::log(2.0 * std::numbers::pi * p.var[c][j]) + 0.5 * diff * diff / p.var[c][j];
      }
    }
    out[static_cast<std::size_t>(i)] = ll[1] - ll[0];
  }
  return out;
}

}  // namespace ktrees::clf
