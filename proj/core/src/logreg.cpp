#include <cmath>
#include <deque>

#include "ktrees/classifiers.hpp"

namespace ktrees::clf {
namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct Objective {
  const MatrixD& x;
  const Eigen::VectorXd& y;
  double c;

  // params = [w; b]
  double operator()(const Eigen::VectorXd& params, Eigen::VectorXd& grad) const {
    const auto d = x.cols();
    const Eigen::VectorXd w = params.head(d);
    const double b = params[d];
    const Eigen::VectorXd z = (x * w).array() + b;
    double loss = 0.0;
    Eigen::VectorXd resid(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      loss += softplus(z[i]) - y[i] * z[i];
      const double p = z[i] >= 0 ? 1.0 / (1.0 + std::exp(-z[i])) : std::exp(z[i]) / (1.0 + std::exp(z[i]));
      resid[i] = p - y[i];
    }
    grad.resize(d + 1);
    grad.head(d) = w + c * (x.transpose() * resid);
    grad[d] = c * resid.sum();
    return 0.5 * w.squaredNorm() + c * loss;
  }
};

}  // namespace

LogRegParams fit_logreg(const Matrix& xf, const Labels& labels, const Hyperparameters& hp, TrainingReport& report) {
  const MatrixD x = xf.cast<double>();
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y[static_cast<Eigen::Index>(i)] = labels[i];
  const Objective objective{x, y, hp.C};

  constexpr int kHistory = 10;
  const auto dim = x.cols() + 1;
  Eigen::VectorXd params = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd grad;
  double f = objective(params, grad);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y)

  int iter = 0;
  bool converged = grad.lpNorm<Eigen::Infinity>() <= hp.tol;
  while (!converged && iter < hp.max_iter) {
    // Two-loop recursion.
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(memory.size());
    for (std::size_t j = memory.size(); j-- > 0;) {
      const auto& [s, yv] = memory[j];
      alpha[j] = s.dot(q) / yv.dot(s);
      q -= alpha[j] * yv;
    }
    if (!memory.empty()) {
      const auto& [s, yv] = memory.back();
      q *= s.dot(yv) / yv.squaredNorm();
    } else {
      q /= std::max(1.0, grad.norm());
    }
    for (std::size_t j = 0; j < memory.size(); ++j) {
      const auto& [s, yv] = memory[j];
      const double beta = yv.dot(q) / yv.dot(s);
      q += s * (alpha[j] - beta);
    }
    Eigen::VectorXd direction = -q;
    double slope = grad.dot(direction);
    if (!(slope < 0)) {
      memory.clear();
      direction = -grad / std::max(1.0, grad.norm());
      slope = grad.dot(direction);
    }

    double step = 1.0;
    Eigen::VectorXd next, next_grad;
    double f_next = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      next = params + step * direction;
      f_next = objective(next, next_grad);
      if (std::isfinite(f_next) && f_next <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++iter;
    if (!accepted) break;  // no further progress possible in double precision

    Eigen::VectorXd s = next - params;
    Eigen::VectorXd yv = next_grad - grad;
    if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      memory.emplace_back(std::move(s), std::move(yv));
      if (static_cast<int>(memory.size()) > kHistory) memory.pop_front();
    }
    params = std::move(next);
    grad = std::move(next_grad);
    f = f_next;
    converged = grad.lpNorm<Eigen::Infinity>() <= hp.tol;
  }

  report.iterations = iter;
  report.final_loss = f;
  report.converged = converged;
  LogRegParams out;
  out.weights.assign(params.data(), params.data() + x.cols());
  out.intercept = params[x.cols()];
  return out;
}

std::vector<double> logreg_decision(const LogRegParams& p, const Matrix& x) {
  const Eigen::Map<const Eigen::VectorXd> w(p.weights.data(), static_cast<Eigen::Index>(p.weights.size()));
  const Eigen::VectorXd z = (x.cast<double>() * w).array() + p.intercept;
  return {z.data(), z.data() + z.size()};
}

}  // namespace ktrees::clf
