#include <algorithm>
#include <cmath>
#include <numeric>

#include "trainers.hpp"

namespace drgrade::detail {

namespace {

using Counts = std::array<std::size_t, kNumClasses>;

double gini(const Counts& counts, std::size_t total) noexcept {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

ClassLabel majority(const Counts& counts) noexcept {
  std::array<double, kNumClasses> scores{};
  for (std::size_t c = 0; c < kNumClasses; ++c) scores[c] = static_cast<double>(counts[c]);
  return label_at(severity_argmax(scores));
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<std::size_t>& y, int max_depth, std::size_t mtry, Rng& rng)
      : x_(x), y_(y), max_depth_(max_depth), mtry_(mtry), rng_(rng) {
    features_.resize(x.cols);
    std::iota(features_.begin(), features_.end(), 0);
  }

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    nodes_.clear();
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t>& rows, int depth) {
    Counts counts{};
    for (auto r : rows) ++counts[y_[r]];
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{-1, 0.0, -1, -1, majority(counts)});

    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    if (pure || depth >= max_depth_ || rows.size() < 2) return id;

    // Random feature subset first; if none of its features can separate the
    // node, fall back to the remaining features so consistent data can always
    // be fitted exactly.
    for (std::size_t k = 0; k < mtry_; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng_.below(features_.size() - k));
      std::swap(features_[k], features_[j]);
    }
    const double parent = gini(counts, rows.size());
    Split best = best_split(rows, std::span(features_).first(mtry_), parent);
    if (best.feature < 0) best = best_split(rows, std::span(features_).subspan(mtry_), parent);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (x_.row(r)[static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[static_cast<std::size_t>(id)].feature = best.feature;
    nodes_[static_cast<std::size_t>(id)].threshold = best.threshold;
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& rows, std::span<const std::size_t> candidates, double parent) {
    Split best;
    best.impurity = parent + 1.0;
    std::vector<std::pair<double, std::size_t>> column(rows.size());
    const std::size_t n = rows.size();
    for (const std::size_t f : candidates) {
      for (std::size_t k = 0; k < n; ++k) column[k] = {x_.row(rows[k])[f], y_[rows[k]]};
      std::sort(column.begin(), column.end());
      Counts left{};
      Counts right{};
      for (const auto& [v, label] : column) ++right[label];
      for (std::size_t k = 0; k + 1 < n; ++k) {
        ++left[column[k].second];
        --right[column[k].second];
        if (column[k].first == column[k + 1].first) continue;
        const std::size_t nl = k + 1;
        const std::size_t nr = n - nl;
        const double impurity =
            (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
            static_cast<double>(n);
        if (impurity < best.impurity) {
          double threshold = 0.5 * (column[k].first + column[k + 1].first);
          if (!(threshold < column[k + 1].first)) threshold = column[k].first;
          best = {static_cast<int>(f), threshold, impurity};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<std::size_t>& y_;
  int max_depth_;
  std::size_t mtry_;
  Rng& rng_;
  std::vector<std::size_t> features_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

// Bagged CART trees with Gini splits over sqrt(d) random features per node.
// A single-tree forest is fitted on the full training set (no bootstrap).
ForestParams train_forest(const Matrix& x, const std::vector<std::size_t>& y, const Hyperparams& hp,
                          std::uint64_t seed) {
  const std::size_t n = x.rows;
  const std::size_t mtry =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(x.cols)))), 1, x.cols);
  ForestParams forest;
  forest.trees.reserve(static_cast<std::size_t>(hp.n_trees));
  for (int t = 0; t < hp.n_trees; ++t) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows(n);
    if (hp.n_trees == 1) {
      std::iota(rows.begin(), rows.end(), 0);
    } else {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    }
    TreeBuilder builder(x, y, hp.max_depth, mtry, rng);
    forest.trees.push_back(builder.build(std::move(rows)));
  }
  return forest;
}

std::array<double, kNumClasses> forest_votes(const ForestParams& forest, std::span<const double> x) noexcept {
  std::array<double, kNumClasses> votes{};
  for (const auto& tree : forest.trees) {
    std::size_t node = 0;
    while (tree[node].feature >= 0) {
      node = static_cast<std::size_t>(x[static_cast<std::size_t>(tree[node].feature)] <= tree[node].threshold
                                          ? tree[node].left
                                          : tree[node].right);
    }
    votes[index_of(tree[node].label)] += 1.0;
  }
  return votes;
}

}  // namespace drgrade::detail
