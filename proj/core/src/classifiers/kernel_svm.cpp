#include <algorithm>
#include <numeric>

#include "trainers.hpp"

namespace drgrade::detail {

namespace {

// Gram matrices above this many rows are recomputed on the fly.
constexpr std::size_t kGramCacheRows = 2048;

class KernelSource {
 public:
  KernelSource(const KernelParams& params, const Matrix& x) : params_(params), x_(x) {
    if (x.rows <= kGramCacheRows) {
      gram_.resize(x.rows * x.rows);
      for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t k = i; k < x.rows; ++k) {
          const double v = augmented(i, k);
          gram_[i * x.rows + k] = v;
          gram_[k * x.rows + i] = v;
        }
      }
    }
  }

  // K(x_i, x_k) + 1: the constant absorbs the bias term.
  double operator()(std::size_t i, std::size_t k) const noexcept {
    return gram_.empty() ? augmented(i, k) : gram_[i * x_.rows + k];
  }

 private:
  double augmented(std::size_t i, std::size_t k) const noexcept {
    return kernel_value(params_, x_.row(i), x_.row(k)) + 1.0;
  }

  const KernelParams& params_;
  const Matrix& x_;
  std::vector<double> gram_;
};

// Budgeted kernelised Pegasos for one binary problem. Returns support counts
// alpha_j; the decision function is (1 / (lambda T)) sum_j alpha_j y_j K'(x_j, x).
struct BinaryState {
  std::vector<std::uint32_t> alpha;
  std::vector<double> field;  // sum_j alpha_j y_j K'(x_j, x_i) for every training row i
  std::size_t support_size = 0;
};

void add_support(BinaryState& s, const KernelSource& k, std::size_t j, double target, int delta) {
  const std::size_t n = s.field.size();
  for (std::size_t i = 0; i < n; ++i) s.field[i] += delta * target * k(j, i);
}

}  // namespace

// One-vs-rest kernel SVMs. Each binary machine runs budgeted kernelised Pegasos
// (step 1/(lambda t), lambda = 1/(C n)) over a shared shuffled sample order;
// when a machine's support set exceeds the budget, the support vector with the
// smallest coefficient (lowest index on ties) is removed.
KernelParams train_kernel_ovr(KernelType type, const Matrix& x, const std::vector<std::size_t>& y,
                              const Hyperparams& hp, Rng& rng) {
  const std::size_t n = x.rows;
  KernelParams params;
  params.type = type;
  params.gamma = *hp.gamma;
  params.degree = hp.poly_degree;
  params.coef0 = hp.poly_coef0;
  const KernelSource kernel(params, x);
  const double lambda = 1.0 / (hp.c * static_cast<double>(n));

  std::array<BinaryState, kNumClasses> states;
  for (auto& s : states) {
    s.alpha.assign(n, 0);
    s.field.assign(n, 0.0);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (const std::size_t i : order) {
      ++t;
      const double scale = 1.0 / (lambda * static_cast<double>(t));
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        auto& s = states[c];
        const double target = y[i] == c ? 1.0 : -1.0;
        if (target * scale * s.field[i] >= 1.0) continue;
        if (s.alpha[i]++ == 0) ++s.support_size;
        add_support(s, kernel, i, target, +1);
        if (s.support_size > hp.support_budget) {
          std::size_t victim = n;
          for (std::size_t j = 0; j < n; ++j) {
            if (s.alpha[j] > 0 && (victim == n || s.alpha[j] < s.alpha[victim])) victim = j;
          }
          const double victim_target = y[victim] == c ? 1.0 : -1.0;
          add_support(s, kernel, victim, victim_target, -static_cast<int>(s.alpha[victim]));
          s.alpha[victim] = 0;
          --s.support_size;
        }
      }
    }
  }

  const double final_scale = 1.0 / (lambda * static_cast<double>(t));
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& m = params.machines[c];
    for (std::size_t j = 0; j < n; ++j) {
      if (states[c].alpha[j] == 0) continue;
      const double target = y[j] == c ? 1.0 : -1.0;
      const double coef = final_scale * target * states[c].alpha[j];
      m.support.emplace_back(x.row(j).begin(), x.row(j).end());
      m.coef.push_back(coef);
      m.bias += coef;
    }
  }
  return params;
}

}  // namespace drgrade::detail
