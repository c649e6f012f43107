#include "sur/episodes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "sur/error.hpp"

namespace sur {

namespace {

std::uint32_t parse_count(std::string_view text, std::string_view whole) {
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::InvalidArgument, "expected INT or MIN..MAX, got '" + std::string(whole) + "'");
  }
  return value;
}

std::uint32_t draw(const CountRange& range, std::mt19937_64& rng) {
  if (range.is_fixed()) return range.min;
  return std::uniform_int_distribution<std::uint32_t>(range.min, range.max)(rng);
}

// Moves a uniformly drawn subset of size `count` to the front of `items`.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t count, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
}

std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0.0;
  for (double& x : v) {
    x = normal(rng);
    sq += x * x;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace

CountRange CountRange::parse(std::string_view text) {
  const auto dots = text.find("..");
  if (dots == std::string_view::npos) return CountRange(parse_count(text, text));
  const auto lo = parse_count(text.substr(0, dots), text);
  const auto hi = parse_count(text.substr(dots + 2), text);
  if (lo > hi) throw Error(ErrorKind::InvalidArgument, "empty range '" + std::string(text) + "'");
  return {lo, hi};
}

std::string CountRange::to_string() const {
  return is_fixed() ? std::to_string(min) : std::to_string(min) + ".." + std::to_string(max);
}

void SamplerConfig::validate() const {
  if (way.min > way.max || shots.min > shots.max) {
    throw Error(ErrorKind::InvalidArgument, "way/shots ranges must be non-empty");
  }
  if (way.min < 2) throw Error(ErrorKind::InvalidArgument, "way must be at least 2");
  if (shots.min < 1) throw Error(ErrorKind::InvalidArgument, "shots must be at least 1");
  if (queries_per_class < 1) throw Error(ErrorKind::InvalidArgument, "queries must be at least 1");
  if (episodes < 1) throw Error(ErrorKind::InvalidArgument, "episodes must be at least 1");
}

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = (seed ^ index) + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Episode sample_episode(const FeatureBank& bank, const SamplerConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::uint32_t way = draw(config.way, rng);
  const std::uint32_t shots = draw(config.shots, rng);
  const std::size_t needed = static_cast<std::size_t>(shots) + config.queries_per_class;

  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < bank.size(); ++i) by_class[bank.label(i)].push_back(i);
  if (by_class.size() < way) {
    throw Error(ErrorKind::InsufficientClasses, "way " + std::to_string(way) + " requested, bank '" +
                                                    bank.dataset_name() + "' has " +
                                                    std::to_string(by_class.size()) + " classes");
  }
  std::vector<std::uint32_t> eligible;
  std::uint32_t first_short = 0;
  bool any_short = false;
  for (const auto& [label, items] : by_class) {
    if (items.size() >= needed) {
      eligible.push_back(label);
    } else if (!any_short) {
      first_short = label;
      any_short = true;
    }
  }
  if (eligible.size() < way) {
    throw Error(ErrorKind::InsufficientItems,
                "class " + std::to_string(first_short) + " has " +
                    std::to_string(by_class[first_short].size()) + " items, " + std::to_string(needed) +
                    " needed for " + std::to_string(shots) + " shots + " +
                    std::to_string(config.queries_per_class) + " queries");
  }

  partial_shuffle(eligible, way, rng);
  std::vector<std::uint32_t> chosen(eligible.begin(), eligible.begin() + way);
  std::sort(chosen.begin(), chosen.end());

  Episode episode;
  episode.support.reserve(static_cast<std::size_t>(way) * shots);
  episode.query.reserve(static_cast<std::size_t>(way) * config.queries_per_class);
  for (auto label : chosen) {
    auto items = by_class[label];
    partial_shuffle(items, needed, rng);
    for (std::size_t i = 0; i < shots; ++i) episode.support.push_back({items[i], label});
    for (std::size_t i = shots; i < needed; ++i) episode.query.push_back({items[i], label});
  }
  return episode;
}

Episode sample_indexed_episode(const FeatureBank& bank, const SamplerConfig& config,
                               std::uint64_t index) {
  std::mt19937_64 rng(episode_seed(config.seed, index));
  return sample_episode(bank, config, rng);
}

void SyntheticSpec::validate() const {
  if (n_domains < 1 || classes_per_domain < 2 || items_per_class < 1 || dim < 1) {
    throw Error(ErrorKind::InvalidArgument,
                "synthetic spec needs >= 1 domain, >= 2 classes, >= 1 item per class and dim >= 1");
  }
  if (!(signal_strength > 0.0) || !std::isfinite(signal_strength)) {
    throw Error(ErrorKind::InvalidArgument, "signal_strength must be positive");
  }
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorKind::InvalidArgument, "noise_sigma must be positive");
  }
  if (generalist_blocks > 0 && !(generalist_strength > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "generalist_strength must be positive");
  }
}

std::vector<FeatureBank> make_synthetic_banks(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t n_blocks = spec.n_domains + spec.generalist_blocks;
  const std::size_t classes = spec.classes_per_domain;

  // prototypes[t][c]: domain-specific class direction; generalist[g][t][c] likewise per block.
  std::vector<std::vector<std::vector<double>>> prototypes(spec.n_domains);
  for (auto& domain : prototypes) {
    for (std::size_t c = 0; c < classes; ++c) domain.push_back(random_unit(spec.dim, rng));
  }
  std::vector<std::vector<std::vector<std::vector<double>>>> generalist(spec.generalist_blocks);
  for (auto& block : generalist) {
    block.resize(spec.n_domains);
    for (auto& domain : block) {
      for (std::size_t c = 0; c < classes; ++c) domain.push_back(random_unit(spec.dim, rng));
    }
  }

  std::vector<ExtractorMeta> metas;
  for (std::size_t k = 0; k < spec.n_domains; ++k) metas.push_back({"domain_" + std::to_string(k), spec.dim});
  for (std::size_t g = 0; g < spec.generalist_blocks; ++g) {
    metas.push_back({"generalist_" + std::to_string(g), spec.dim});
  }

  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  const std::size_t n = classes * spec.items_per_class;
  std::vector<FeatureBank> banks;
  banks.reserve(spec.n_domains);
  for (std::size_t t = 0; t < spec.n_domains; ++t) {
    std::vector<std::uint32_t> labels;
    labels.reserve(n);
    std::vector<std::vector<float>> blocks(n_blocks);
    for (auto& b : blocks) b.reserve(n * spec.dim);
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t item = 0; item < spec.items_per_class; ++item) {
        labels.push_back(static_cast<std::uint32_t>(c));
        for (std::size_t k = 0; k < n_blocks; ++k) {
          const std::vector<double>* mean = nullptr;
          double strength = 0.0;
          if (k == t) {
            mean = &prototypes[t][c];
            strength = spec.signal_strength;
          } else if (k >= spec.n_domains) {
            mean = &generalist[k - spec.n_domains][t][c];
            strength = spec.generalist_strength * spec.signal_strength;
          }
          for (std::size_t d = 0; d < spec.dim; ++d) {
            const double centre = mean ? strength * (*mean)[d] : 0.0;
            blocks[k].push_back(static_cast<float>(centre + noise(rng)));
          }
        }
      }
    }
    banks.emplace_back("domain_" + std::to_string(t), metas, std::move(labels), std::move(blocks),
                       static_cast<std::uint32_t>(classes));
  }
  return banks;
}

FeatureBank split_intermediate_layers(const FeatureBank& bank, std::span<const std::string> layer_names) {
  if (layer_names.empty()) {
    throw Error(ErrorKind::InvalidArgument, "at least one layer must be selected");
  }
  return subset_extractors(bank, layer_names);
}

}  // namespace sur
