#pragma once

#include <span>
#include <vector>

#include "drgrade/classifiers.hpp"
#include "drgrade/rng.hpp"

namespace drgrade::detail {

// Dense row-major copy of a dataset's feature block.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const noexcept {
    return {data.data() + i * cols, cols};
  }
};

Matrix to_matrix(const FeatureDataset& ds);
std::vector<std::size_t> label_indices(const FeatureDataset& ds);

double dot(std::span<const double> a, std::span<const double> b) noexcept;

LinearParams train_linear_ovr(const Matrix& x, const std::vector<std::size_t>& y, const Hyperparams& hp,
                              Rng& rng, TrainingTrace* trace);
LinearParams train_crammer_singer(const Matrix& x, const std::vector<std::size_t>& y, const Hyperparams& hp,
                                  Rng& rng, TrainingTrace* trace);
KernelParams train_kernel_ovr(KernelType type, const Matrix& x, const std::vector<std::size_t>& y,
                              const Hyperparams& hp, Rng& rng);
ForestParams train_forest(const Matrix& x, const std::vector<std::size_t>& y, const Hyperparams& hp,
                          std::uint64_t seed);
NaiveBayesParams train_naive_bayes(const Matrix& x, const std::vector<std::size_t>& y);

std::array<double, kNumClasses> forest_votes(const ForestParams& forest, std::span<const double> x) noexcept;
std::array<double, kNumClasses> naive_bayes_posterior(const NaiveBayesParams& nb, std::span<const double> x) noexcept;

}  // namespace drgrade::detail
