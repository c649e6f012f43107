#pragma once

// Reference implementations used only by the tests. They rebuild every
// quantity from the raw float32 bank with explicit vectors and loops and share
// no code with the library's NCC or objective paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sur/feature_bank.hpp"
#include "sur/ncc.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine(const Vec& a, const Vec& b) {
  const double na = std::max(std::sqrt(dot(a, a)), 1e-12);
  const double nb = std::max(std::sqrt(dot(b, b)), 1e-12);
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

/// f_lambda(x) rebuilt from raw features.
inline Vec features(const sur::FeatureBank& bank, std::size_t item, const std::vector<double>& lambda) {
  Vec out;
  for (std::size_t k = 0; k < bank.num_extractors(); ++k) {
    const auto raw = bank.row(k, item);
    double sq = 0.0;
    for (float v : raw) sq += static_cast<double>(v) * static_cast<double>(v);
    const double norm = std::max(std::sqrt(sq), 1e-12);
    for (float v : raw) out.push_back(lambda[k] * (static_cast<double>(v) / norm));
  }
  return out;
}

/// Class id -> centroid (mean of f_lambda over that class's support items).
inline std::map<std::uint32_t, Vec> centroids(const sur::FeatureBank& bank, const sur::Episode& ep,
                                              const std::vector<double>& lambda) {
  std::map<std::uint32_t, Vec> sums;
  std::map<std::uint32_t, int> counts;
  for (const auto& s : ep.support) {
    const auto f = features(bank, s.index, lambda);
    auto& acc = sums[s.label];
    if (acc.empty()) acc.assign(f.size(), 0.0);
    for (std::size_t d = 0; d < f.size(); ++d) acc[d] += f[d];
    ++counts[s.label];
  }
  for (auto& [label, v] : sums) {
    for (double& x : v) x /= counts[label];
  }
  return sums;
}

/// Mean support NLL written term by term.
inline double nll(const sur::FeatureBank& bank, const sur::Episode& ep, const std::vector<double>& lambda,
                  double temperature = 1.0, double l1 = 0.0) {
  const auto cents = centroids(bank, ep, lambda);
  double total = 0.0;
  for (const auto& s : ep.support) {
    const auto f = features(bank, s.index, lambda);
    double z = 0.0;
    double own = 0.0;
    for (const auto& [label, c] : cents) {
      const double cs = cosine(f, c);
      z += std::exp(temperature * cs);
      if (label == s.label) own = temperature * cs;
    }
    total += std::log(z) - own;
  }
  double penalty = 0.0;
  for (double l : lambda) penalty += l;
  return total / static_cast<double>(ep.support.size()) + l1 * penalty;
}

inline std::uint32_t predict(const sur::FeatureBank& bank, const sur::Episode& ep,
                             const std::vector<double>& lambda, std::size_t item) {
  const auto cents = centroids(bank, ep, lambda);
  const auto f = features(bank, item, lambda);
  double best = -2.0;
  std::uint32_t label = 0;
  for (const auto& [id, c] : cents) {  // ascending ids: strict > keeps the smallest on ties
    const double cs = cosine(f, c);
    if (cs > best) {
      best = cs;
      label = id;
    }
  }
  return label;
}

inline double accuracy(const sur::FeatureBank& bank, const sur::Episode& ep, const std::vector<double>& lambda) {
  int correct = 0;
  for (const auto& q : ep.query) correct += predict(bank, ep, lambda, q.index) == q.label;
  return static_cast<double>(correct) / static_cast<double>(ep.query.size());
}

inline double logistic(double a) { return 1.0 / (1.0 + std::exp(-a)); }

/// Central differences of f(sigmoid(alpha)) with respect to alpha.
inline Vec fd_gradient(const std::function<double(const Vec&)>& loss_of_lambda, const Vec& alpha,
                       double h = 1e-5) {
  Vec g(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    Vec up = alpha, down = alpha;
    up[k] += h;
    down[k] -= h;
    Vec lu(alpha.size()), ld(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      lu[i] = logistic(up[i]);
      ld[i] = logistic(down[i]);
    }
    g[k] = (loss_of_lambda(lu) - loss_of_lambda(ld)) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const Vec& a, const Vec& b, double floor = 1e-8) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace oracle
