#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ktrees/classifiers.hpp"

namespace ktrees::clf {
namespace {

// Adam state for one parameter block.
template <typename T>
struct AdamSlot {
  T m, v;
  explicit AdamSlot(const T& like) : m(T::Zero(like.rows(), like.cols())), v(T::Zero(like.rows(), like.cols())) {}

  void step(T& param, const T& grad, float lr_t) {
    constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
    param.array() -= lr_t * m.array() / (v.array().sqrt() + eps);
  }
};

float log_loss_term(float z, float y) {
  // softplus(z) - y z
  const float sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return sp - y * z;
}

}  // namespace

MlpParams fit_mlp(const Matrix& x, const Labels& labels, const Hyperparameters& hp, std::uint64_t seed,
                  TrainingReport& report) {
  using MatF = Eigen::MatrixXf;
  using VecF = Eigen::VectorXf;
  const auto n = x.rows();
  const auto d = x.cols();
  const auto hidden = hp.hidden_units;
  std::mt19937_64 rng(seed);

  auto uniform_init = [&](Eigen::Index rows, Eigen::Index cols, double bound) {
    std::uniform_real_distribution<float> u(static_cast<float>(-bound), static_cast<float>(bound));
    MatF m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
  };
  const double bound1 = std::sqrt(6.0 / static_cast<double>(d + hidden));
  const double bound2 = std::sqrt(2.0 / static_cast<double>(hidden + 1));
  MatF w1 = uniform_init(d, hidden, bound1);
  VecF b1 = uniform_init(hidden, 1, bound1);
  VecF w2 = uniform_init(hidden, 1, bound2);
  MatF b2m = uniform_init(1, 1, bound2);
  float b2 = b2m(0, 0);

  AdamSlot<MatF> a_w1(w1);
  AdamSlot<VecF> a_b1(b1), a_w2(w2);
  float m_b2 = 0, v_b2 = 0;

  const auto batch = std::min<Eigen::Index>(hp.batch_size, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const auto alpha = static_cast<float>(hp.l2_alpha);
  const auto lr = static_cast<float>(hp.learning_rate);

  double best_loss = std::numeric_limits<double>::infinity();
  int no_improvement = 0;
  int epoch = 0;
  long t = 0;
  bool stopped = false;
  double epoch_loss = 0.0;
  MatF xb, hid, dh;
  VecF z, dz;
  for (; epoch < hp.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const auto bsz = std::min(batch, n - start);
      xb.resize(bsz, d);
      VecF yb(bsz);
      for (Eigen::Index i = 0; i < bsz; ++i) {
        const auto r = order[static_cast<std::size_t>(start + i)];
        xb.row(i) = x.row(r);
        yb[i] = labels[static_cast<std::size_t>(r)];
      }
      hid = ((xb * w1).rowwise() + b1.transpose()).cwiseMax(0.0f);
      z = (hid * w2).array() + b2;
      dz.resize(bsz);
      double batch_loss = 0.0;
      for (Eigen::Index i = 0; i < bsz; ++i) {
        batch_loss += log_loss_term(z[i], yb[i]);
        const float p = 1.0f / (1.0f + std::exp(-z[i]));
        dz[i] = (p - yb[i]) / static_cast<float>(bsz);
      }
      batch_loss /= static_cast<double>(bsz);
      batch_loss += 0.5 * alpha * (w1.squaredNorm() + w2.squaredNorm()) / static_cast<double>(bsz);
      epoch_loss += batch_loss * static_cast<double>(bsz);

      const float reg = alpha / static_cast<float>(bsz);
      const VecF g_w2 = hid.transpose() * dz + reg * w2;
      const float g_b2 = dz.sum();
      dh = (dz * w2.transpose()).cwiseProduct((hid.array() > 0.0f).cast<float>().matrix());
      const MatF g_w1 = xb.transpose() * dh + reg * w1;
      const VecF g_b1 = dh.colwise().sum().transpose();

      ++t;
      const float lr_t = lr * std::sqrt(1.0f - std::pow(0.999f, static_cast<float>(t))) /
                         (1.0f - std::pow(0.9f, static_cast<float>(t)));
      a_w1.step(w1, g_w1, lr_t);
      a_b1.step(b1, g_b1, lr_t);
      a_w2.step(w2, g_w2, lr_t);
      m_b2 = 0.9f * m_b2 + 0.1f * g_b2;
      v_b2 = 0.999f * v_b2 + 0.001f * g_b2 * g_b2;
      b2 -= lr_t * m_b2 / (std::sqrt(v_b2) + 1e-8f);
    }
    epoch_loss /= static_cast<double>(n);
    if (epoch_loss > best_loss - hp.tol) {
      ++no_improvement;
    } else {
      no_improvement = 0;
    }
    best_loss = std::min(best_loss, epoch_loss);
    if (no_improvement > hp.n_iter_no_change) {
      ++epoch;
      stopped = true;
      break;
    }
  }

  report.iterations = epoch;
  report.final_loss = epoch_loss;
  report.converged = stopped;
  MlpParams p;
  p.w1 = w1;
  p.b1 = b1;
  p.w2 = w2;
  p.b2 = b2;
  return p;
}

std::vector<double> mlp_decision(const MlpParams& p, const Matrix& x) {
  const Eigen::MatrixXf hid = ((x * p.w1).rowwise() + p.b1.transpose()).cwiseMax(0.0f);
  const Eigen::VectorXf z = (hid * p.w2).array() + p.b2;
  return {z.data(), z.data() + z.size()};
}

}  // namespace ktrees::clf
