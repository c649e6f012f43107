#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sur {

inline constexpr double kNormEpsilon = 1e-12;

struct ExtractorMeta {
  std::string name;
  std::size_t dim = 0;

  bool operator==(const ExtractorMeta&) const = default;
};

/// Per-item feature blocks produced by K extractors, plus dense class labels.
///
/// Raw features are kept at float32 (the on-disk precision) so that a bank
/// survives a save/load cycle unchanged. All arithmetic downstream happens in
/// double via NormalizedView. Instances are validated on construction and
/// immutable afterwards.
class FeatureBank {
 public:
  using ClassNames = std::map<std::uint32_t, std::string>;

  /// `blocks[k]` is an n x extractors[k].dim row-major matrix. A
  /// `label_cardinality` of 0 means "max label + 1".
  FeatureBank(std::string dataset_name, std::vector<ExtractorMeta> extractors,
              std::vector<std::uint32_t> labels, std::vector<std::vector<float>> blocks,
              std::uint32_t label_cardinality = 0, ClassNames class_names = {});

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t num_extractors() const noexcept { return extractors_.size(); }
  const std::vector<ExtractorMeta>& extractors() const noexcept { return extractors_; }
  const ExtractorMeta& extractor(std::size_t k) const { return extractors_.at(k); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  std::span<const std::uint32_t> labels() const noexcept { return labels_; }
  std::uint32_t label(std::size_t item) const { return labels_.at(item); }
  std::uint32_t label_cardinality() const noexcept { return label_cardinality_; }
  /// Sorted distinct labels actually present.
  std::vector<std::uint32_t> classes() const;

  std::span<const float> block(std::size_t k) const { return blocks_.at(k); }
  std::span<const float> row(std::size_t k, std::size_t item) const;

  const std::string& dataset_name() const noexcept { return dataset_name_; }
  const ClassNames& class_names() const noexcept { return class_names_; }

  bool operator==(const FeatureBank&) const = default;

 private:
  std::string dataset_name_;
  std::vector<ExtractorMeta> extractors_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::vector<float>> blocks_;
  std::uint32_t label_cardinality_ = 0;
  ClassNames class_names_;
};

/// v / max(||v||, 1e-12). A zero vector maps to zero.
std::vector<double> normalize_block(std::span<const double> v);

/// Per-row, per-block L2-normalized copy of a bank in double precision.
/// Holds a non-owning reference; the bank must outlive the view.
class NormalizedView {
 public:
  explicit NormalizedView(const FeatureBank& bank);

  const FeatureBank& bank() const noexcept { return *bank_; }
  std::size_t size() const noexcept { return bank_->size(); }
  std::size_t num_blocks() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& block_dims() const noexcept { return dims_; }
  std::size_t total_dim() const noexcept { return total_dim_; }

  std::span<const double> row(std::size_t k, std::size_t item) const;

 private:
  const FeatureBank* bank_;
  std::vector<std::size_t> dims_;
  std::size_t total_dim_ = 0;
  std::vector<std::vector<double>> blocks_;
};

/// Restricts a bank to the named blocks, in the order given.
FeatureBank subset_extractors(const FeatureBank& bank, std::span<const std::string> names);

// Persistence. SURB-v1 is the canonical binary format; CSV exists for small
// hand-written fixtures. Both pick up an optional `<stem>.json` manifest
// sidecar carrying dataset_name and class_names.

FeatureBank load_bank(const std::filesystem::path& path);
void save_bank(const FeatureBank& bank, const std::filesystem::path& path);

FeatureBank load_surb(const std::filesystem::path& path);
void save_surb(const FeatureBank& bank, const std::filesystem::path& path);
FeatureBank load_csv_bank(const std::filesystem::path& path);
void save_csv_bank(const FeatureBank& bank, const std::filesystem::path& path);

/// Parses SURB-v1 bytes. Errors report the byte offset where decoding failed.
FeatureBank decode_surb(std::span<const std::uint8_t> bytes, std::string dataset_name = {});
std::vector<std::uint8_t> encode_surb(const FeatureBank& bank);

std::filesystem::path manifest_path(const std::filesystem::path& bank_path);

}  // namespace sur
