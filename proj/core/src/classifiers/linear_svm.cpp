#include <algorithm>
#include <numeric>

#include "trainers.hpp"

namespace drgrade::detail {

// One-vs-rest linear SVMs trained jointly by stochastic subgradient descent on
//   lambda/2 |w_c|^2 + mean_i max(0, 1 - y_ic (w_c . x_i + b_c)),  lambda = 1/(C n)
// with step eta_t = lr / (1 + lr lambda t). The bias is not regularised.
LinearParams train_linear_ovr(const Matrix& x, const std::vector<std::size_t>& y, const Hyperparams& hp,
                              Rng& rng, TrainingTrace* trace) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  const double lambda = 1.0 / (hp.c * static_cast<double>(n));
  LinearParams p;
  for (auto& w : p.weights) w.assign(d, 0.0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (const std::size_t i : order) {
      const double eta = hp.learning_rate / (1.0 + hp.learning_rate * lambda * static_cast<double>(t));
      const auto xi = x.row(i);
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        auto& w = p.weights[c];
        const double target = y[i] == c ? 1.0 : -1.0;
        const double margin = target * (dot(w, xi) + p.bias[c]);
        const double shrink = 1.0 - eta * lambda;
        for (auto& wj : w) wj *= shrink;
        if (margin < 1.0) {
          for (std::size_t j = 0; j < d; ++j) w[j] += eta * target * xi[j];
          p.bias[c] += eta * target;
        }
      }
      ++t;
    }
    if (trace) {
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < kNumClasses; ++c) {
          const double target = y[i] == c ? 1.0 : -1.0;
          loss += std::max(0.0, 1.0 - target * (dot(p.weights[c], x.row(i)) + p.bias[c]));
        }
      }
      trace->epoch_loss.push_back(loss / static_cast<double>(n));
    }
  }
  return p;
}

}  // namespace drgrade::detail
