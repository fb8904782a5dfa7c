#include <algorithm>
#include <cmath>
#include <numbers>

#include "trainers.hpp"

namespace drgrade::detail {

namespace {
constexpr double kVarianceFloor = 1e-9;
}

NaiveBayesParams train_naive_bayes(const Matrix& x, const std::vector<std::size_t>& y) {
  const std::size_t d = x.cols;
  NaiveBayesParams nb;
  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    nb.mean[c].assign(d, 0.0);
    nb.variance[c].assign(d, 0.0);
  }
  for (std::size_t i = 0; i < x.rows; ++i) {
    ++counts[y[i]];
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) nb.mean[y[i]][j] += row[j];
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (auto& m : nb.mean[c]) m /= static_cast<double>(counts[c]);
  }
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - nb.mean[y[i]][j];
      nb.variance[y[i]][j] += diff * diff;
    }
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (auto& v : nb.variance[c]) v = std::max(v / static_cast<double>(counts[c]), kVarianceFloor);
    nb.log_prior[c] = std::log(static_cast<double>(counts[c]) / static_cast<double>(x.rows));
  }
  return nb;
}

std::array<double, kNumClasses> naive_bayes_posterior(const NaiveBayesParams& nb, std::span<const double> x) noexcept {
  std::array<double, kNumClasses> log_joint{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double acc = nb.log_prior[c];
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double var = nb.variance[c][j];
      const double diff = x[j] - nb.mean[c][j];
      acc -= 0.5 * (std::log(2.0 * std::numbers::pi * var) + diff * diff / var);
    }
    log_joint[c] = acc;
  }
  const double peak = *std::max_element(log_joint.begin(), log_joint.end());
  double total = 0.0;
  std::array<double, kNumClasses> post{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    post[c] = std::exp(log_joint[c] - peak);
    total += post[c];
  }
  for (auto& p : post) p /= total;
  return post;
}

}  // namespace drgrade::detail
