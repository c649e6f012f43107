#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sur/feature_bank.hpp"
#include "sur/ncc.hpp"

namespace sur {

struct SelectorConfig {
  int iterations = 40;
  double learning_rate = 100.0;
  double adadelta_rho = 0.9;
  double adadelta_eps = 1e-6;
  double temperature = 1.0;
  double l1_penalty = 0.0;

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;

  bool operator==(const SelectorConfig&) const = default;
};

/// Optimizer state: logits alpha with lambda = sigmoid(alpha), plus the
/// Adadelta running averages.
struct SelectionState {
  std::vector<double> alpha;
  std::vector<double> lambda;
  std::vector<double> grad_sq_avg;
  std::vector<double> delta_sq_avg;
  std::uint64_t iteration = 0;

  static SelectionState zeros(std::size_t k);

  bool operator==(const SelectionState&) const = default;
};

struct SelectionResult {
  SelectionVector lambda;
  std::vector<double> loss_trace;  // iterations + 1 entries, initial loss first
  double converged_loss = 0.0;

  bool operator==(const SelectionResult&) const = default;
};

/// Logistic function, kept strictly inside (0, 1).
double sigmoid(double x) noexcept;

/// softmax(temperature * cosines) through a max-shifted log-sum-exp.
std::vector<double> class_probabilities(std::span<const double> cosines, double temperature);
std::vector<double> class_probabilities(const NormalizedView& view, std::size_t item,
                                        const CentroidModel& model, const SelectionVector& lambda,
                                        double temperature);

/// The support-set NCC objective of one episode.
///
/// With unit-normalized blocks, every quantity the loss needs is a linear
/// function of mu_k = lambda_k^2:
///
///   <f_lambda(x_i), c_j> = sum_k mu_k <f_k(x_i), m_jk>
///   |f_lambda(x_i)|^2    = sum_k mu_k |f_k(x_i)|^2
///   |c_j|^2              = sum_k mu_k |m_jk|^2
///
/// where m_jk is the unweighted class mean of block k. The constructor
/// tabulates those per-block inner products once, so each evaluation costs
/// O(n_S * C * K) regardless of feature dimension while remaining an exact
/// re-evaluation of the centroids at the current lambda.
class SupportObjective {
 public:
  SupportObjective(const NormalizedView& view, const Episode& episode);

  std::size_t num_blocks() const noexcept { return blocks_; }
  std::size_t num_classes() const noexcept { return classes_; }
  std::size_t num_support() const noexcept { return support_; }

  double loss(std::span<const double> lambda, double temperature, double l1_penalty = 0.0) const;
  /// d loss / d alpha, with lambda = sigmoid(alpha).
  std::vector<double> gradient(std::span<const double> alpha, double temperature,
                               double l1_penalty = 0.0) const;

 private:
  double gram(std::size_t i, std::size_t j, std::size_t k) const {
    return gram_[(i * classes_ + j) * blocks_ + k];
  }

  std::size_t blocks_ = 0;
  std::size_t classes_ = 0;
  std::size_t support_ = 0;
  std::vector<double> gram_;          // n_S x C x K: <f_k(x_i), m_jk>
  std::vector<double> item_sq_;       // n_S x K: |f_k(x_i)|^2
  std::vector<double> centroid_sq_;   // C x K: |m_jk|^2
  std::vector<std::size_t> target_;   // class slot of each support item
};

/// Mean support NLL of the cosine-softmax NCC, plus l1_penalty * sum(lambda).
double support_nll(const NormalizedView& view, const Episode& episode, const SelectionVector& lambda,
                   double temperature = 1.0, double l1_penalty = 0.0);

std::vector<double> nll_gradient(const NormalizedView& view, const Episode& episode,
                                 std::span<const double> alpha, const SelectorConfig& config);

SelectionState adadelta_step(SelectionState state, std::span<const double> grad,
                             const SelectorConfig& config);

/// Full-batch Adadelta on alpha from zero initialisation.
SelectionResult optimize_selection(const NormalizedView& view, const Episode& episode,
                                   const SelectorConfig& config);

/// Fraction of entries below `low` or above `high`.
double saturation_fraction(std::span<const double> lambda, double low = 0.1, double high = 0.9);

}  // namespace sur
