#include <algorithm>
#include <limits>
#include <numeric>

#include "trainers.hpp"

namespace drgrade::detail {

namespace {

// Most-violating competitor r != y and the multiclass hinge for sample x.
double multiclass_hinge(const LinearParams& p, std::span<const double> x, std::size_t y, std::size_t& rival) {
  double own = dot(p.weights[y], x) + p.bias[y];
  double best = -std::numeric_limits<double>::infinity();
  rival = y;
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    if (r == y) continue;
    const double s = dot(p.weights[r], x) + p.bias[r];
    if (s > best) {
      best = s;
      rival = r;
    }
  }
  return std::max(0.0, 1.0 + best - own);
}

}  // namespace

// Natively multiclass SVM: lambda/2 sum_c |w_c|^2 + mean_i max(0, 1 + max_{r != y_i} s_r - s_{y_i}),
// optimised by the same decayed stochastic subgradient schedule as the one-vs-rest machines.
LinearParams train_crammer_singer(const Matrix& x, const std::vector<std::size_t>& y, const Hyperparams& hp,
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
      std::size_t rival = 0;
      const double loss = multiclass_hinge(p, xi, y[i], rival);
      const double shrink = 1.0 - eta * lambda;
      for (auto& w : p.weights) {
        for (auto& wj : w) wj *= shrink;
      }
      if (loss > 0.0) {
        for (std::size_t j = 0; j < d; ++j) {
          p.weights[y[i]][j] += eta * xi[j];
          p.weights[rival][j] -= eta * xi[j];
        }
        p.bias[y[i]] += eta;
        p.bias[rival] -= eta;
      }
      ++t;
    }
    if (trace) {
      double total = 0.0;
      std::size_t rival = 0;
      for (std::size_t i = 0; i < n; ++i) total += multiclass_hinge(p, x.row(i), y[i], rival);
      trace->epoch_loss.push_back(total / static_cast<double>(n));
    }
  }
  return p;
}

}  // namespace drgrade::detail
