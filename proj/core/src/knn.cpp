#include <algorithm>

#include "ktrees/classifiers.hpp"

namespace ktrees::clf {

KnnParams fit_knn(const Matrix& x, const Labels& y, const Hyperparameters& hp) {
  if (hp.k < 1) throw ConfigError("knn: k must be >= 1");
  return KnnParams{x, y, hp.k};
}

std::vector<double> knn_decision(const KnnParams& p, const Matrix& x) {
  if (x.cols() != p.x.cols()) throw ShapeError("knn: column mismatch");
  constexpr Eigen::Index kBlock = 256;
  const auto n_train = p.x.rows();
  const auto k = std::min<Eigen::Index>(p.k, n_train);
  const Eigen::VectorXf train_norms = p.x.rowwise().squaredNorm();
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  std::vector<std::pair<float, Eigen::Index>> cand(static_cast<std::size_t>(n_train));
  for (Eigen::Index start = 0; start < x.rows(); start += kBlock) {
    const auto rows = std::min(kBlock, x.rows() - start);
    const Eigen::MatrixXf dots = x.middleRows(start, rows) * p.x.transpose();
    for (Eigen::Index q = 0; q < rows; ++q) {
      const float qn = x.row(start + q).squaredNorm();
      for (Eigen::Index t = 0; t < n_train; ++t) {
        cand[static_cast<std::size_t>(t)] = {std::max(0.0f, qn + train_norms[t] - 2.0f * dots(q, t)), t};
      }
      std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
      int votes = 0;
      for (Eigen::Index j = 0; j < k; ++j) votes += p.y[static_cast<std::size_t>(cand[static_cast<std::size_t>(j)].second)];
      out[static_cast<std::size_t>(start + q)] = 2.0 * votes - static_cast<double>(k);
    }
  }
  return out;
}

}  // namespace ktrees::clf
