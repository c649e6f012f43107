#include "sur/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sur/error.hpp"

namespace sur {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidArgument, what);
}

struct Norms {
  double value;  // max(sqrt(sq), eps)
  bool active;   // false when the eps floor is in effect
};

Norms guarded_norm(double sq) {
  const double n = std::sqrt(sq);
  return n > kNormEpsilon ? Norms{n, true} : Norms{kNormEpsilon, false};
}

}  // namespace

void SelectorConfig::validate() const {
  require(iterations >= 0, "iterations must be non-negative");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
  require(adadelta_rho > 0.0 && adadelta_rho < 1.0, "adadelta_rho must lie in (0, 1)");
  require(adadelta_eps > 0.0, "adadelta_eps must be positive");
  require(temperature > 0.0 && std::isfinite(temperature), "temperature must be positive");
  require(l1_penalty >= 0.0 && std::isfinite(l1_penalty), "l1_penalty must be non-negative");
}

SelectionState SelectionState::zeros(std::size_t k) {
  SelectionState s;
  s.alpha.assign(k, 0.0);
  s.lambda.assign(k, 0.5);
  s.grad_sq_avg.assign(k, 0.0);
  s.delta_sq_avg.assign(k, 0.0);
  return s;
}

double sigmoid(double x) noexcept {
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(y, lo, hi);
}

std::vector<double> class_probabilities(std::span<const double> cosines, double temperature) {
  if (cosines.empty()) throw Error(ErrorKind::EmptyInput, "no classes");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double c : cosines) max_logit = std::max(max_logit, temperature * c);
  std::vector<double> p(cosines.size());
  double z = 0.0;
  for (std::size_t j = 0; j < cosines.size(); ++j) {
    p[j] = std::exp(temperature * cosines[j] - max_logit);
    z += p[j];
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> class_probabilities(const NormalizedView& view, std::size_t item,
                                        const CentroidModel& model, const SelectionVector& lambda,
                                        double temperature) {
  const auto f = select_features(view, item, lambda);
  std::vector<double> cosines;
  cosines.reserve(model.centroids.size());
  for (const auto& c : model.centroids) cosines.push_back(cosine_similarity(f, c));
  return class_probabilities(cosines, temperature);
}

SupportObjective::SupportObjective(const NormalizedView& view, const Episode& episode)
    : blocks_(view.num_blocks()), support_(episode.support.size()) {
  validate_episode(episode, view.size());
  const auto class_ids = episode.classes();
  classes_ = class_ids.size();

  target_.reserve(support_);
  for (const auto& s : episode.support) {
    target_.push_back(static_cast<std::size_t>(
        std::lower_bound(class_ids.begin(), class_ids.end(), s.label) - class_ids.begin()));
  }

  // Unweighted per-block class means m_jk.
  const auto& dims = view.block_dims();
  std::vector<std::vector<double>> means(classes_ * blocks_);
  std::vector<std::size_t> counts(classes_, 0);
  for (std::size_t j = 0; j < classes_; ++j) {
    for (std::size_t k = 0; k < blocks_; ++k) means[j * blocks_ + k].assign(dims[k], 0.0);
  }
  for (std::size_t i = 0; i < support_; ++i) {
    const auto j = target_[i];
    ++counts[j];
    for (std::size_t k = 0; k < blocks_; ++k) {
      const auto row = view.row(k, episode.support[i].index);
      auto& m = means[j * blocks_ + k];
      for (std::size_t d = 0; d < row.size(); ++d) m[d] += row[d];
    }
  }
  centroid_sq_.assign(classes_ * blocks_, 0.0);
  for (std::size_t j = 0; j < classes_; ++j) {
    const double inv = 1.0 / static_cast<double>(counts[j]);
    for (std::size_t k = 0; k < blocks_; ++k) {
      double sq = 0.0;
      for (double& v : means[j * blocks_ + k]) {
        v *= inv;
        sq += v * v;
      }
      centroid_sq_[j * blocks_ + k] = sq;
    }
  }

  item_sq_.assign(support_ * blocks_, 0.0);
  gram_.assign(support_ * classes_ * blocks_, 0.0);
  for (std::size_t i = 0; i < support_; ++i) {
    for (std::size_t k = 0; k < blocks_; ++k) {
      const auto row = view.row(k, episode.support[i].index);
      double sq = 0.0;
      for (double v : row) sq += v * v;
      item_sq_[i * blocks_ + k] = sq;
      for (std::size_t j = 0; j < classes_; ++j) {
        const auto& m = means[j * blocks_ + k];
        double dot = 0.0;
        for (std::size_t d = 0; d < row.size(); ++d) dot += row[d] * m[d];
        gram_[(i * classes_ + j) * blocks_ + k] = dot;
      }
    }
  }
}

double SupportObjective::loss(std::span<const double> lambda, double temperature,
                              double l1_penalty) const {
  if (lambda.size() != blocks_) {
    throw Error(ErrorKind::DimensionMismatch, "lambda has " + std::to_string(lambda.size()) +
                                                  " entries for " + std::to_string(blocks_) + " blocks");
  }
  std::vector<double> mu(blocks_);
  for (std::size_t k = 0; k < blocks_; ++k) mu[k] = lambda[k] * lambda[k];

  std::vector<double> centroid_norm(classes_);
  for (std::size_t j = 0; j < classes_; ++j) {
    double sq = 0.0;
    for (std::size_t k = 0; k < blocks_; ++k) sq += mu[k] * centroid_sq_[j * blocks_ + k];
    centroid_norm[j] = guarded_norm(sq).value;
  }

  std::vector<double> logits(classes_);
  double total = 0.0;
  for (std::size_t i = 0; i < support_; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < blocks_; ++k) sq += mu[k] * item_sq_[i * blocks_ + k];
    const double item_norm = guarded_norm(sq).value;
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < classes_; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < blocks_; ++k) dot += mu[k] * gram(i, j, k);
      const double cos = std::clamp(dot / (item_norm * centroid_norm[j]), -1.0, 1.0);
      logits[j] = temperature * cos;
      max_logit = std::max(max_logit, logits[j]);
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l - max_logit);
    total += max_logit + std::log(z) - logits[target_[i]];
  }
  double penalty = 0.0;
  for (double l : lambda) penalty += l;
  return total / static_cast<double>(support_) + l1_penalty * penalty;
}

std::vector<double> SupportObjective::gradient(std::span<const double> alpha, double temperature,
                                               double l1_penalty) const {
  if (alpha.size() != blocks_) {
    throw Error(ErrorKind::DimensionMismatch, "alpha has " + std::to_string(alpha.size()) +
                                                  " entries for " + std::to_string(blocks_) + " blocks");
  }
  std::vector<double> lambda(blocks_), mu(blocks_);
  for (std::size_t k = 0; k < blocks_; ++k) {
    lambda[k] = sigmoid(alpha[k]);
    mu[k] = lambda[k] * lambda[k];
  }

  // Per-class norm and the share of each block in |c_j|^2 (zero under the eps floor).
  std::vector<double> centroid_norm(classes_);
  std::vector<double> centroid_share(classes_ * blocks_, 0.0);
  for (std::size_t j = 0; j < classes_; ++j) {
    double sq = 0.0;
    for (std::size_t k = 0; k < blocks_; ++k) sq += mu[k] * centroid_sq_[j * blocks_ + k];
    const auto n = guarded_norm(sq);
    centroid_norm[j] = n.value;
    if (n.active) {
      for (std::size_t k = 0; k < blocks_; ++k) {
        centroid_share[j * blocks_ + k] = mu[k] * centroid_sq_[j * blocks_ + k] / sq;
      }
    }
  }

  // acc[k] = sum_ij dL/dcos_ij * mu_k dcos_ij/dmu_k
  //   mu_k dcos/dmu_k = mu_k G_ijk / (|f||c|) - cos (share_f,k + share_c,k) / 2
  std::vector<double> acc(blocks_, 0.0);
  std::vector<double> item_share(blocks_);
  std::vector<double> cos_raw(classes_), logits(classes_), weight(classes_);
  std::vector<bool> inside(classes_);
  const double scale = temperature / static_cast<double>(support_);
  for (std::size_t i = 0; i < support_; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < blocks_; ++k) sq += mu[k] * item_sq_[i * blocks_ + k];
    const auto item_norm = guarded_norm(sq);
    for (std::size_t k = 0; k < blocks_; ++k) {
      item_share[k] = item_norm.active ? mu[k] * item_sq_[i * blocks_ + k] / sq : 0.0;
    }

    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < classes_; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < blocks_; ++k) dot += mu[k] * gram(i, j, k);
      cos_raw[j] = dot / (item_norm.value * centroid_norm[j]);
      inside[j] = cos_raw[j] >= -1.0 && cos_raw[j] <= 1.0;
      logits[j] = temperature * std::clamp(cos_raw[j], -1.0, 1.0);
      max_logit = std::max(max_logit, logits[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < classes_; ++j) {
      weight[j] = std::exp(logits[j] - max_logit);
      z += weight[j];
    }
    for (std::size_t j = 0; j < classes_; ++j) {
      const double p = weight[j] / z;
      const double dl_dcos = inside[j] ? scale * (p - (j == target_[i] ? 1.0 : 0.0)) : 0.0;
      if (dl_dcos == 0.0) continue;
      const double denom = item_norm.value * centroid_norm[j];
      for (std::size_t k = 0; k < blocks_; ++k) {
        const double direct = mu[k] * gram(i, j, k) / denom;
        const double d = direct - 0.5 * cos_raw[j] * (item_share[k] + centroid_share[j * blocks_ + k]);
        acc[k] += dl_dcos * d;
      }
    }
  }

  // dmu/dlambda = 2 lambda, dlambda/dalpha = lambda (1 - lambda).
  std::vector<double> grad(blocks_);
  for (std::size_t k = 0; k < blocks_; ++k) {
    grad[k] = 2.0 * (1.0 - lambda[k]) * acc[k] + l1_penalty * lambda[k] * (1.0 - lambda[k]);
  }
  return grad;
}

double support_nll(const NormalizedView& view, const Episode& episode, const SelectionVector& lambda,
                   double temperature, double l1_penalty) {
  return SupportObjective(view, episode).loss(lambda.values(), temperature, l1_penalty);
}

std::vector<double> nll_gradient(const NormalizedView& view, const Episode& episode,
                                 std::span<const double> alpha, const SelectorConfig& config) {
  config.validate();
  return SupportObjective(view, episode).gradient(alpha, config.temperature, config.l1_penalty);
}

SelectionState adadelta_step(SelectionState state, std::span<const double> grad,
                             const SelectorConfig& config) {
  const std::size_t k_count = state.alpha.size();
  if (grad.size() != k_count || state.grad_sq_avg.size() != k_count ||
      state.delta_sq_avg.size() != k_count) {
    throw Error(ErrorKind::DimensionMismatch, "Adadelta state and gradient sizes differ");
  }
  const double rho = config.adadelta_rho;
  const double eps = config.adadelta_eps;
  state.lambda.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double g = grad[k];
    state.grad_sq_avg[k] = rho * state.grad_sq_avg[k] + (1.0 - rho) * g * g;
    const double delta =
        -(std::sqrt(state.delta_sq_avg[k] + eps) / std::sqrt(state.grad_sq_avg[k] + eps)) * g;
    state.delta_sq_avg[k] = rho * state.delta_sq_avg[k] + (1.0 - rho) * delta * delta;
    state.alpha[k] += config.learning_rate * delta;
    state.lambda[k] = sigmoid(state.alpha[k]);
  }
  ++state.iteration;
  return state;
}

SelectionResult optimize_selection(const NormalizedView& view, const Episode& episode,
                                   const SelectorConfig& config) {
  config.validate();
  const SupportObjective objective(view, episode);
  auto state = SelectionState::zeros(view.num_blocks());

  SelectionResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(config.iterations) + 1);
  result.loss_trace.push_back(objective.loss(state.lambda, config.temperature, config.l1_penalty));
  for (int it = 0; it < config.iterations; ++it) {
    const auto grad = objective.gradient(state.alpha, config.temperature, config.l1_penalty);
    state = adadelta_step(std::move(state), grad, config);
    result.loss_trace.push_back(objective.loss(state.lambda, config.temperature, config.l1_penalty));
  }
  result.lambda = SelectionVector(state.lambda);
  result.converged_loss = result.loss_trace.back();
  return result;
}

double saturation_fraction(std::span<const double> lambda, double low, double high) {
  if (lambda.empty()) return 0.0;
  const auto n = std::count_if(lambda.begin(), lambda.end(),
                               [&](double l) { return l < low || l > high; });
  return static_cast<double>(n) / static_cast<double>(lambda.size());
}

}  // namespace sur
