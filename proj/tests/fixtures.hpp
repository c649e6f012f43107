#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "sur/feature_bank.hpp"
#include "sur/ncc.hpp"

namespace fixtures {

/// Gaussian bank with `classes` x `per_class` items and the given block dims.
inline sur::FeatureBank random_bank(std::mt19937_64& rng, const std::vector<std::size_t>& dims,
                                    std::uint32_t classes, std::size_t per_class,
                                    std::string name = "random") {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<sur::ExtractorMeta> metas;
  std::vector<std::vector<float>> blocks(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) metas.push_back({"block" + std::to_string(k), dims[k]});
  std::vector<std::uint32_t> labels;
  for (std::uint32_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      labels.push_back(c);
      for (std::size_t k = 0; k < dims.size(); ++k) {
        for (std::size_t d = 0; d < dims[k]; ++d) blocks[k].push_back(static_cast<float>(normal(rng)));
      }
    }
  }
  return sur::FeatureBank(std::move(name), std::move(metas), std::move(labels), std::move(blocks));
}

/// Every item of the bank in the support set (one episode over all classes),
/// queries identical to the support.
inline sur::Episode full_episode(const sur::FeatureBank& bank) {
  sur::Episode ep;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    ep.support.push_back({i, bank.label(i)});
    ep.query.push_back({i, bank.label(i)});
  }
  return ep;
}

/// Bank from explicit rows: rows[i][k] is block k of item i.
inline sur::FeatureBank bank_from_rows(const std::vector<std::vector<std::vector<float>>>& rows,
                                       const std::vector<std::uint32_t>& labels,
                                       std::vector<std::string> names = {}) {
  const std::size_t k_count = rows.at(0).size();
  std::vector<sur::ExtractorMeta> metas;
  std::vector<std::vector<float>> blocks(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    metas.push_back({names.empty() ? "b" + std::to_string(k) : names[k], rows[0][k].size()});
  }
  for (const auto& item : rows) {
    for (std::size_t k = 0; k < k_count; ++k) blocks[k].insert(blocks[k].end(), item[k].begin(), item[k].end());
  }
  return sur::FeatureBank("rows", std::move(metas), labels, std::move(blocks));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("sur_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
