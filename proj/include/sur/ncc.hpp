#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sur/feature_bank.hpp"

namespace sur {

struct Sample {
  std::size_t index = 0;
  std::uint32_t label = 0;

  bool operator==(const Sample&) const = default;
};

/// A few-shot task: support and query items, given as indices into a bank.
struct Episode {
  std::vector<Sample> support;
  std::vector<Sample> query;

  /// Sorted distinct support labels.
  std::vector<std::uint32_t> classes() const;

  bool operator==(const Episode&) const = default;
};

/// Throws EmptyClass if a query label has no support item, or EmptyInput if
/// the support set is empty. Indices are checked against `bank_size`.
void validate_episode(const Episode& episode, std::size_t bank_size);

/// Per-block weights in [0, 1].
class SelectionVector {
 public:
  SelectionVector() = default;
  explicit SelectionVector(std::vector<double> lambda);

  static SelectionVector ones(std::size_t k) { return SelectionVector(std::vector<double>(k, 1.0)); }
  static SelectionVector constant(std::size_t k, double value) {
    return SelectionVector(std::vector<double>(k, value));
  }

  std::size_t size() const noexcept { return lambda_.size(); }
  double operator[](std::size_t k) const { return lambda_[k]; }
  const std::vector<double>& values() const noexcept { return lambda_; }

  bool operator==(const SelectionVector&) const = default;

 private:
  std::vector<double> lambda_;
};

struct CentroidModel {
  std::vector<std::uint32_t> class_ids;       // ascending
  std::vector<std::vector<double>> centroids;  // one concatenated vector per class
  std::vector<std::size_t> block_dims;
};

/// concat(lambda_k * blocks[k]).
std::vector<double> select_features(std::span<const std::span<const double>> blocks,
                                    const SelectionVector& lambda);
std::vector<double> select_features(const NormalizedView& view, std::size_t item,
                                    const SelectionVector& lambda);

CentroidModel compute_centroids(const NormalizedView& view, const Episode& episode,
                                const SelectionVector& lambda);

/// <u,v> / (max(|u|,eps) max(|v|,eps)), clamped to [-1, 1].
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Class with the largest cosine to `features`; ties go to the smallest id.
std::uint32_t predict(std::span<const double> features, const CentroidModel& model);
std::uint32_t predict(const NormalizedView& view, std::size_t item, const CentroidModel& model,
                      const SelectionVector& lambda);

/// Fraction of query items classified correctly.
double accuracy(const NormalizedView& view, const Episode& episode, const SelectionVector& lambda);

/// Query predictions in query order.
std::vector<std::uint32_t> predict_queries(const NormalizedView& view, const Episode& episode,
                                           const SelectionVector& lambda);

}  // namespace sur
