#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sur/feature_bank.hpp"
#include "sur/ncc.hpp"

namespace sur {

/// An inclusive integer range; min == max is a fixed count.
struct CountRange {
  std::uint32_t min = 1;
  std::uint32_t max = 1;

  constexpr CountRange() = default;
  constexpr CountRange(std::uint32_t fixed) : min(fixed), max(fixed) {}  // NOLINT(google-explicit-constructor)
  constexpr CountRange(std::uint32_t lo, std::uint32_t hi) : min(lo), max(hi) {}

  bool is_fixed() const noexcept { return min == max; }
  /// "5" or "3..10".
  static CountRange parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const CountRange&) const = default;
};

struct SamplerConfig {
  CountRange way{5};
  CountRange shots{5};
  std::uint32_t queries_per_class = 15;
  std::uint32_t episodes = 1000;
  std::uint64_t seed = 0;

  void validate() const;

  bool operator==(const SamplerConfig&) const = default;
};

/// Seed of episode `index` in a stream: a SplitMix64 scramble of seed ^ index,
/// so episodes can be drawn independently and in any order.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Draws `way` classes uniformly without replacement, then `shots` support
/// and `queries_per_class` query items per class without replacement.
Episode sample_episode(const FeatureBank& bank, const SamplerConfig& config, std::mt19937_64& rng);

/// Episode `index` of the stream defined by `config.seed`.
Episode sample_indexed_episode(const FeatureBank& bank, const SamplerConfig& config,
                               std::uint64_t index);

struct SyntheticSpec {
  std::size_t n_domains = 3;
  std::size_t classes_per_domain = 10;
  std::size_t items_per_class = 20;
  std::size_t dim = 16;
  double signal_strength = 1.0;
  double noise_sigma = 0.2;
  std::uint64_t seed = 0;
  /// Extra blocks carrying signal on every domain at
  /// `generalist_strength * signal_strength`.
  std::size_t generalist_blocks = 0;
  double generalist_strength = 0.5;

  void validate() const;
};

/// One bank per domain t (dataset "domain_t"), each with every extractor
/// block: extractor "domain_k" is informative only on domain k.
std::vector<FeatureBank> make_synthetic_banks(const SyntheticSpec& spec);

/// Same as subset_extractors; names here are layers of one network.
FeatureBank split_intermediate_layers(const FeatureBank& bank, std::span<const std::string> layer_names);

}  // namespace sur
