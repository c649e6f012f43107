#include "sur/feature_bank.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sur/error.hpp"

namespace sur {

namespace {

static_assert(std::endian::native == std::endian::little,
              "SURB encoding assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'U', 'R', 'B'};
constexpr std::uint32_t kVersion = 1;

std::string at_offset(std::size_t offset) { return "at byte offset " + std::to_string(offset); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }

  template <typename T>
  T read(const char* what) {
    T value;
    take(&value, sizeof(T), what);
    return value;
  }

  void take(void* dst, std::size_t count, const char* what) {
    if (bytes_.size() - pos_ < count) {
      throw Error(ErrorKind::TruncatedFile, std::string("file ends while reading ") + what + " " +
                                                at_offset(pos_) + " (need " +
                                                std::to_string(count) + " bytes, have " +
                                                std::to_string(bytes_.size() - pos_) + ")");
    }
    if (count > 0) std::memcpy(dst, bytes_.data() + pos_, count);
    pos_ += count;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

struct Manifest {
  std::optional<std::string> dataset_name;
  FeatureBank::ClassNames class_names;
};

Manifest read_manifest(const std::filesystem::path& bank_path) {
  Manifest m;
  const auto path = manifest_path(bank_path);
  if (!std::filesystem::exists(path)) return m;
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, "malformed manifest " + path.string() + ": " + e.what());
  }
  if (j.contains("dataset_name")) m.dataset_name = j.at("dataset_name").get<std::string>();
  if (j.contains("class_names")) {
    for (const auto& [key, value] : j.at("class_names").items()) {
      std::uint32_t id = 0;
      auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
      if (ec != std::errc{} || ptr != key.data() + key.size()) {
        throw Error(ErrorKind::InvalidArgument, "bad class id '" + key + "' in " + path.string());
      }
      m.class_names[id] = value.get<std::string>();
    }
  }
  return m;
}

void write_manifest(const FeatureBank& bank, const std::filesystem::path& bank_path) {
  if (bank.dataset_name().empty() && bank.class_names().empty()) return;
  nlohmann::ordered_json j;
  j["dataset_name"] = bank.dataset_name();
  nlohmann::ordered_json names = nlohmann::ordered_json::object();
  for (const auto& [id, name] : bank.class_names()) names[std::to_string(id)] = name;
  j["class_names"] = names;
  const std::string text = j.dump(2) + "\n";
  write_file(manifest_path(bank_path),
             {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

FeatureBank with_manifest(FeatureBank bank, const std::filesystem::path& path) {
  Manifest m = read_manifest(path);
  std::string name = m.dataset_name.value_or(path.stem().string());
  std::vector<std::vector<float>> blocks;
  blocks.reserve(bank.num_extractors());
  for (std::size_t k = 0; k < bank.num_extractors(); ++k) {
    blocks.emplace_back(bank.block(k).begin(), bank.block(k).end());
  }
  return FeatureBank(std::move(name), bank.extractors(),
                     {bank.labels().begin(), bank.labels().end()}, std::move(blocks),
                     bank.label_cardinality(), std::move(m.class_names));
}

bool is_csv(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv";
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

FeatureBank::FeatureBank(std::string dataset_name, std::vector<ExtractorMeta> extractors,
                         std::vector<std::uint32_t> labels, std::vector<std::vector<float>> blocks,
                         std::uint32_t label_cardinality, ClassNames class_names)
    : dataset_name_(std::move(dataset_name)),
      extractors_(std::move(extractors)),
      labels_(std::move(labels)),
      blocks_(std::move(blocks)),
      label_cardinality_(label_cardinality),
      class_names_(std::move(class_names)) {
  if (extractors_.empty()) {
    throw Error(ErrorKind::InvalidArgument, "a feature bank needs at least one extractor");
  }
  if (labels_.empty()) throw Error(ErrorKind::InvalidArgument, "a feature bank needs at least one item");
  if (blocks_.size() != extractors_.size()) {
    throw Error(ErrorKind::DimensionMismatch, std::to_string(extractors_.size()) +
                                                  " extractors but " + std::to_string(blocks_.size()) +
                                                  " blocks");
  }
  std::set<std::string_view> seen;
  for (std::size_t k = 0; k < extractors_.size(); ++k) {
    const auto& meta = extractors_[k];
    if (meta.name.empty()) {
      throw Error(ErrorKind::InvalidArgument, "extractor " + std::to_string(k) + " has an empty name");
    }
    if (meta.name.size() > 0xFFFF) {
      throw Error(ErrorKind::InvalidArgument, "extractor name longer than 65535 bytes");
    }
    if (!seen.insert(meta.name).second) {
      throw Error(ErrorKind::DuplicateExtractorName, "'" + meta.name + "' at extractor record " +
                                                         std::to_string(k));
    }
    if (meta.dim == 0) {
      throw Error(ErrorKind::InvalidArgument, "extractor '" + meta.name + "' has dim 0");
    }
    if (blocks_[k].size() != labels_.size() * meta.dim) {
      throw Error(ErrorKind::DimensionMismatch,
                  "block '" + meta.name + "' holds " + std::to_string(blocks_[k].size()) +
                      " values, expected " + std::to_string(labels_.size()) + " x " +
                      std::to_string(meta.dim));
    }
  }
  const std::uint32_t max_label = *std::max_element(labels_.begin(), labels_.end());
  if (label_cardinality_ == 0) label_cardinality_ = max_label + 1;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= label_cardinality_) {
      throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(labels_[i]) + " of item " +
                                                  std::to_string(i) + " >= cardinality " +
                                                  std::to_string(label_cardinality_));
    }
  }
  if (classes().size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "a feature bank needs at least 2 distinct labels");
  }
}

std::optional<std::size_t> FeatureBank::index_of(std::string_view name) const {
  for (std::size_t k = 0; k < extractors_.size(); ++k) {
    if (extractors_[k].name == name) return k;
  }
  return std::nullopt;
}

std::vector<std::uint32_t> FeatureBank::classes() const {
  std::vector<std::uint32_t> out(labels_.begin(), labels_.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::span<const float> FeatureBank::row(std::size_t k, std::size_t item) const {
  const auto dim = extractors_.at(k).dim;
  return std::span<const float>(blocks_.at(k)).subspan(item * dim, dim);
}

std::vector<double> normalize_block(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double scale = 1.0 / std::max(std::sqrt(sq), kNormEpsilon);
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [scale](double x) { return x * scale; });
  return out;
}

NormalizedView::NormalizedView(const FeatureBank& bank) : bank_(&bank) {
  const std::size_t n = bank.size();
  blocks_.reserve(bank.num_extractors());
  std::vector<double> raw;
  for (std::size_t k = 0; k < bank.num_extractors(); ++k) {
    const std::size_t dim = bank.extractor(k).dim;
    dims_.push_back(dim);
    total_dim_ += dim;
    std::vector<double> block(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = bank.row(k, i);
      raw.assign(src.begin(), src.end());
      const auto unit = normalize_block(raw);
      std::copy(unit.begin(), unit.end(), block.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    blocks_.push_back(std::move(block));
  }
}

std::span<const double> NormalizedView::row(std::size_t k, std::size_t item) const {
  const auto dim = dims_.at(k);
  return std::span<const double>(blocks_.at(k)).subspan(item * dim, dim);
}

FeatureBank subset_extractors(const FeatureBank& bank, std::span<const std::string> names) {
  std::vector<ExtractorMeta> metas;
  std::vector<std::vector<float>> blocks;
  for (const auto& name : names) {
    const auto k = bank.index_of(name);
    if (!k) throw Error(ErrorKind::UnknownExtractor, "'" + name + "' is not in the bank");
    metas.push_back(bank.extractor(*k));
    blocks.emplace_back(bank.block(*k).begin(), bank.block(*k).end());
  }
  return FeatureBank(bank.dataset_name(), std::move(metas),
                     {bank.labels().begin(), bank.labels().end()}, std::move(blocks),
                     bank.label_cardinality(), bank.class_names());
}

std::vector<std::uint8_t> encode_surb(const FeatureBank& bank) {
  std::vector<std::uint8_t> out;
  std::size_t total = 24 + 4 * bank.size();
  for (const auto& e : bank.extractors()) total += 2 + e.name.size() + 4 + 4 * bank.size() * e.dim;
  out.reserve(total);

  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, bank.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(bank.num_extractors()));
  put<std::uint32_t>(out, bank.label_cardinality());
  for (auto label : bank.labels()) put<std::uint32_t>(out, label);
  for (std::size_t k = 0; k < bank.num_extractors(); ++k) {
    const auto& meta = bank.extractor(k);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(meta.name.size()));
    out.insert(out.end(), meta.name.begin(), meta.name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.dim));
    const auto block = bank.block(k);
    const auto* p = reinterpret_cast<const std::uint8_t*>(block.data());
    out.insert(out.end(), p, p + block.size_bytes());
  }
  return out;
}

FeatureBank decode_surb(std::span<const std::uint8_t> bytes, std::string dataset_name) {
  Reader r(bytes);
  char magic[4];
  r.take(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorKind::BadMagic, "expected \"SURB\" " + at_offset(0) + ", found \"" +
                                         std::string(magic, 4) + "\"");
  }
  const auto version = r.read<std::uint32_t>("version");
  if (version != kVersion) {
    throw Error(ErrorKind::UnsupportedVersion, "version " + std::to_string(version) + " " +
                                                   at_offset(4) + " (supported: 1)");
  }
  const auto n = r.read<std::uint64_t>("n_items");
  const auto n_extractors = r.read<std::uint32_t>("n_extractors");
  const auto cardinality = r.read<std::uint32_t>("label_cardinality");
  if (n > (bytes.size() - r.offset()) / 4) {
    throw Error(ErrorKind::TruncatedFile, "label array of " + std::to_string(n) + " entries " +
                                              at_offset(r.offset()) + " exceeds the " +
                                              std::to_string(bytes.size() - r.offset()) +
                                              " remaining bytes");
  }

  std::vector<std::uint32_t> labels(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto offset = r.offset();
    labels[i] = r.read<std::uint32_t>("labels");
    if (labels[i] >= cardinality) {
      throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(labels[i]) + " of record " +
                                                  std::to_string(i) + " " + at_offset(offset) +
                                                  " >= label_cardinality " +
                                                  std::to_string(cardinality));
    }
  }

  std::vector<ExtractorMeta> metas;
  std::vector<std::vector<float>> blocks;
  std::set<std::string> seen;
  for (std::uint32_t k = 0; k < n_extractors; ++k) {
    const auto record_offset = r.offset();
    const auto name_len = r.read<std::uint16_t>("extractor name length");
    std::string name(name_len, '\0');
    r.take(name.data(), name_len, "extractor name");
    if (!seen.insert(name).second) {
      throw Error(ErrorKind::DuplicateExtractorName, "'" + name + "' in extractor record " +
                                                         std::to_string(k) + " " +
                                                         at_offset(record_offset));
    }
    const auto dim = r.read<std::uint32_t>("extractor dim");
    const std::uint64_t remaining_values = (bytes.size() - r.offset()) / 4;
    if (dim != 0 && n > remaining_values / dim) {
      throw Error(ErrorKind::TruncatedFile, "block '" + name + "' needs " +
                                                std::to_string(n) + " x " + std::to_string(dim) +
                                                " floats " +
                                                " bytes " + at_offset(r.offset()) + ", only " +
                                                std::to_string(bytes.size() - r.offset()) + " remain");
    }
    std::vector<float> block(static_cast<std::size_t>(n * dim));
    r.take(block.data(), block.size() * sizeof(float), "feature matrix");
    metas.push_back({std::move(name), dim});
    blocks.push_back(std::move(block));
  }
  if (r.offset() != bytes.size()) {
    throw Error(ErrorKind::InvalidArgument, "trailing bytes " + at_offset(r.offset()));
  }
  return FeatureBank(std::move(dataset_name), std::move(metas), std::move(labels), std::move(blocks),
                     cardinality);
}

FeatureBank load_surb(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return with_manifest(decode_surb(bytes, path.stem().string()), path);
}

void save_surb(const FeatureBank& bank, const std::filesystem::path& path) {
  write_file(path, encode_surb(bank));
  write_manifest(bank, path);
}

FeatureBank load_csv_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MalformedCsv, "missing header in " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split(line, ',');
  if (header.empty() || header[0] != "label") {
    throw Error(ErrorKind::MalformedCsv, "header must start with 'label' (record 0)");
  }
  std::vector<ExtractorMeta> metas;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto col = header[c];
    const auto colon = col.rfind(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorKind::MalformedCsv, "column " + std::to_string(c) + " '" + std::string(col) +
                                               "' is not of the form name:index");
    }
    const auto name = col.substr(0, colon);
    std::size_t index = 0;
    const auto digits = col.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
      throw Error(ErrorKind::MalformedCsv, "bad column index in '" + std::string(col) + "'");
    }
    if (!metas.empty() && metas.back().name == name) {
      if (index != metas.back().dim) {
        throw Error(ErrorKind::MalformedCsv, "column '" + std::string(col) + "' out of order");
      }
      ++metas.back().dim;
    } else {
      if (index != 0) {
        throw Error(ErrorKind::MalformedCsv, "block '" + std::string(name) + "' must start at index 0");
      }
      for (const auto& m : metas) {
        if (m.name == name) {
          throw Error(ErrorKind::DuplicateExtractorName, "'" + std::string(name) + "' in CSV header");
        }
      }
      metas.push_back({std::string(name), 1});
    }
  }
  if (metas.empty()) throw Error(ErrorKind::MalformedCsv, "no feature columns");

  std::vector<std::uint32_t> labels;
  std::vector<std::vector<float>> blocks(metas.size());
  std::size_t record = 0;
  while (std::getline(in, line)) {
    ++record;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::MalformedCsv, "record " + std::to_string(record) + " has " +
                                               std::to_string(cells.size()) + " fields, expected " +
                                               std::to_string(header.size()));
    }
    std::uint32_t label = 0;
    auto [lp, lec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), label);
    if (lec != std::errc{} || lp != cells[0].data() + cells[0].size()) {
      throw Error(ErrorKind::MalformedCsv, "bad label in record " + std::to_string(record));
    }
    labels.push_back(label);
    std::size_t c = 1;
    for (std::size_t k = 0; k < metas.size(); ++k) {
      for (std::size_t d = 0; d < metas[k].dim; ++d, ++c) {
        float value = 0.0f;
        auto [p, ec] = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), value);
        if (ec != std::errc{} || p != cells[c].data() + cells[c].size()) {
          throw Error(ErrorKind::MalformedCsv, "bad value in record " + std::to_string(record) +
                                                   ", column " + std::to_string(c));
        }
        blocks[k].push_back(value);
      }
    }
  }
  FeatureBank bank(path.stem().string(), std::move(metas), std::move(labels), std::move(blocks));
  return with_manifest(std::move(bank), path);
}

void save_csv_bank(const FeatureBank& bank, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "label";
  for (const auto& e : bank.extractors()) {
    for (std::size_t d = 0; d < e.dim; ++d) os << ',' << e.name << ':' << d;
  }
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < bank.size(); ++i) {
    os << bank.label(i);
    for (std::size_t k = 0; k < bank.num_extractors(); ++k) {
      for (float v : bank.row(k, i)) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        os << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
      }
    }
    os << '\n';
  }
  const std::string text = os.str();
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  write_manifest(bank, path);
}

FeatureBank load_bank(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::IoError, "no such file: " + path.string());
  return is_csv(path) ? load_csv_bank(path) : load_surb(path);
}

void save_bank(const FeatureBank& bank, const std::filesystem::path& path) {
  if (is_csv(path)) {
    save_csv_bank(bank, path);
  } else {
    save_surb(bank, path);
  }
}

std::filesystem::path manifest_path(const std::filesystem::path& bank_path) {
  auto p = bank_path;
  p.replace_extension(".json");
  return p;
}

}  // namespace sur
