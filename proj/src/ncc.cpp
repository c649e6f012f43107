#include "sur/ncc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "sur/error.hpp"

namespace sur {

namespace {

void check_lambda(const NormalizedView& view, const SelectionVector& lambda) {
  if (lambda.size() != view.num_blocks()) {
    throw Error(ErrorKind::DimensionMismatch, "selection vector has " + std::to_string(lambda.size()) +
                                                  " entries for " + std::to_string(view.num_blocks()) +
                                                  " blocks");
  }
}

}  // namespace

std::vector<std::uint32_t> Episode::classes() const {
  std::vector<std::uint32_t> out;
  out.reserve(support.size());
  for (const auto& s : support) out.push_back(s.label);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void validate_episode(const Episode& episode, std::size_t bank_size) {
  if (episode.support.empty()) throw Error(ErrorKind::EmptyInput, "episode has no support items");
  const auto classes = episode.classes();
  for (const auto* set : {&episode.support, &episode.query}) {
    for (const auto& s : *set) {
      if (s.index >= bank_size) {
        throw Error(ErrorKind::InvalidArgument, "item index " + std::to_string(s.index) +
                                                    " outside bank of " + std::to_string(bank_size));
      }
    }
  }
  for (const auto& q : episode.query) {
    if (!std::binary_search(classes.begin(), classes.end(), q.label)) {
      throw Error(ErrorKind::EmptyClass, "query class " + std::to_string(q.label) +
                                             " has no support items");
    }
  }
}

SelectionVector::SelectionVector(std::vector<double> lambda) : lambda_(std::move(lambda)) {
  for (std::size_t k = 0; k < lambda_.size(); ++k) {
    if (!(lambda_[k] >= 0.0 && lambda_[k] <= 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "lambda[" + std::to_string(k) + "] = " +
                                                  std::to_string(lambda_[k]) + " outside [0, 1]");
    }
  }
}

std::vector<double> select_features(std::span<const std::span<const double>> blocks,
                                    const SelectionVector& lambda) {
  if (blocks.size() != lambda.size()) {
    throw Error(ErrorKind::DimensionMismatch, "selection vector has " + std::to_string(lambda.size()) +
                                                  " entries for " + std::to_string(blocks.size()) +
                                                  " blocks");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    for (double x : blocks[k]) out.push_back(lambda[k] * x);
  }
  return out;
}

std::vector<double> select_features(const NormalizedView& view, std::size_t item,
                                    const SelectionVector& lambda) {
  check_lambda(view, lambda);
  std::vector<std::span<const double>> blocks;
  blocks.reserve(view.num_blocks());
  for (std::size_t k = 0; k < view.num_blocks(); ++k) blocks.push_back(view.row(k, item));
  return select_features(blocks, lambda);
}

CentroidModel compute_centroids(const NormalizedView& view, const Episode& episode,
                                const SelectionVector& lambda) {
  check_lambda(view, lambda);
  validate_episode(episode, view.size());

  CentroidModel model;
  model.class_ids = episode.classes();
  model.block_dims = view.block_dims();
  const std::size_t dim = view.total_dim();
  model.centroids.assign(model.class_ids.size(), std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(model.class_ids.size(), 0);

  for (const auto& s : episode.support) {
    const auto j = static_cast<std::size_t>(
        std::lower_bound(model.class_ids.begin(), model.class_ids.end(), s.label) -
        model.class_ids.begin());
    auto& c = model.centroids[j];
    std::size_t offset = 0;
    for (std::size_t k = 0; k < view.num_blocks(); ++k) {
      const auto row = view.row(k, s.index);
      for (std::size_t d = 0; d < row.size(); ++d) c[offset + d] += row[d];
      offset += row.size();
    }
    ++counts[j];
  }
  // Mean of normalized rows first, then the block weight: c_jk = lambda_k * mean(f_k).
  for (std::size_t j = 0; j < model.centroids.size(); ++j) {
    auto& c = model.centroids[j];
    const double inv = 1.0 / static_cast<double>(counts[j]);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < view.num_blocks(); ++k) {
      for (std::size_t d = 0; d < model.block_dims[k]; ++d) c[offset + d] *= inv * lambda[k];
      offset += model.block_dims[k];
    }
  }
  return model;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::DimensionMismatch, "cosine of vectors with sizes " +
                                                  std::to_string(u.size()) + " and " +
                                                  std::to_string(v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  const double denom = std::max(std::sqrt(uu), kNormEpsilon) * std::max(std::sqrt(vv), kNormEpsilon);
  return std::clamp(dot / denom, -1.0, 1.0);
}

std::uint32_t predict(std::span<const double> features, const CentroidModel& model) {
  if (model.class_ids.empty()) throw Error(ErrorKind::EmptyInput, "centroid model has no classes");
  std::size_t best = 0;
  double best_cos = cosine_similarity(features, model.centroids[0]);
  for (std::size_t j = 1; j < model.centroids.size(); ++j) {
    const double c = cosine_similarity(features, model.centroids[j]);
    // class_ids ascend, so strict > keeps the smallest id on ties.
    if (c > best_cos) {
      best_cos = c;
      best = j;
    }
  }
  return model.class_ids[best];
}

std::uint32_t predict(const NormalizedView& view, std::size_t item, const CentroidModel& model,
                      const SelectionVector& lambda) {
  return predict(select_features(view, item, lambda), model);
}

std::vector<std::uint32_t> predict_queries(const NormalizedView& view, const Episode& episode,
                                           const SelectionVector& lambda) {
  const auto model = compute_centroids(view, episode, lambda);
  std::vector<std::uint32_t> out;
  out.reserve(episode.query.size());
  for (const auto& q : episode.query) out.push_back(predict(view, q.index, model, lambda));
  return out;
}

double accuracy(const NormalizedView& view, const Episode& episode, const SelectionVector& lambda) {
  if (episode.query.empty()) return 0.0;
  const auto predictions = predict_queries(view, episode, lambda);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == episode.query[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace sur
