#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include "fixtures.hpp"
#include "sur/error.hpp"
#include "sur/feature_bank.hpp"

using namespace sur;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an sur::Error");
  return ErrorKind::InvalidArgument;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

FeatureBank three_block_bank() {
  std::mt19937_64 rng(11);
  auto bank = fixtures::random_bank(rng, {3, 2, 4}, 3, 4, "abc");
  std::vector<std::vector<float>> blocks;
  for (std::size_t k = 0; k < 3; ++k) blocks.emplace_back(bank.block(k).begin(), bank.block(k).end());
  return FeatureBank("abc", {{"A", 3}, {"B", 2}, {"C", 4}}, {bank.labels().begin(), bank.labels().end()},
                     std::move(blocks), 0, {{0, "zero"}, {2, "two"}});
}

}  // namespace

TEST_CASE("normalize_block examples") {
  const auto v = normalize_block(std::vector<double>{3.0, 4.0});
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-15));

  const auto zero = normalize_block(std::vector<double>{0.0, 0.0});
  CHECK(zero == std::vector<double>{0.0, 0.0});

  // The epsilon floor dominates: 1e-20 / 1e-12.
  const auto tiny = normalize_block(std::vector<double>{1e-20, 0.0});
  CHECK(tiny[0] == doctest::Approx(1e-8).epsilon(1e-12));
  CHECK(tiny[1] == 0.0);
}

TEST_CASE("normalize_block properties") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + trial % 9);
    for (double& x : v) x = normal(rng);
    const auto once = normalize_block(v);
    const double n = norm(once);
    CHECK((n == 0.0 || (n >= 1.0 - 1e-6 && n <= 1.0 + 1e-12)));

    const auto twice = normalize_block(once);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(twice[i] - once[i]) <= 1e-6);

    const double c = scale(rng);
    std::vector<double> scaled(v);
    for (double& x : scaled) x *= c;
    const auto s = normalize_block(scaled);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(s[i] - once[i]) <= 1e-6);
  }
}

TEST_CASE("NormalizedView rows are unit or zero") {
  auto rows = std::vector<std::vector<std::vector<float>>>{
      {{3, 4}, {0, 0, 0}}, {{0, 0}, {1, 2, 2}}, {{1e-3f, 0}, {5, 0, 0}}};
  const auto bank = fixtures::bank_from_rows(rows, {0, 1, 1});
  const NormalizedView view(bank);
  CHECK(view.total_dim() == 5);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      const auto r = view.row(k, i);
      double sq = 0.0;
      for (double x : r) {
        CHECK(std::isfinite(x));
        sq += x * x;
      }
      const bool raw_zero = std::all_of(bank.row(k, i).begin(), bank.row(k, i).end(), [](float x) { return x == 0.0f; });
      if (raw_zero) {
        CHECK(sq == 0.0);
      } else {
        CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("FeatureBank invariants are enforced") {
  std::vector<float> two(4, 1.0f);
  CHECK(kind_of([&] { FeatureBank("x", {}, {0, 1}, {}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { FeatureBank("x", {{"a", 2}}, {}, {{}}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { FeatureBank("x", {{"a", 2}, {"a", 2}}, {0, 1}, {two, two}); }) ==
        ErrorKind::DuplicateExtractorName);
  CHECK(kind_of([&] { FeatureBank("x", {{"a", 2}}, {0, 0}, {two}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { FeatureBank("x", {{"a", 3}}, {0, 1}, {two}); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { FeatureBank("x", {{"a", 2}}, {0, 5}, {two}, 3); }) == ErrorKind::LabelOutOfRange);
  CHECK(kind_of([&] { FeatureBank("x", {{"", 2}}, {0, 1}, {two}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("SURB round trip is exact, byte-stable and deterministic") {
  const auto dir = fixtures::temp_dir("surb");
  const auto bank = three_block_bank();
  const auto path = dir / "abc.surb";
  save_bank(bank, path);
  const auto loaded = load_bank(path);
  CHECK(loaded == bank);
  CHECK(loaded.num_extractors() == 3);

  const auto again = dir / "again.surb";
  save_bank(loaded, again);
  CHECK(encode_surb(loaded) == encode_surb(bank));
  std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
  const std::string bytes_a{std::istreambuf_iterator<char>(a), {}}, bytes_b{std::istreambuf_iterator<char>(b), {}};
  CHECK(bytes_a == bytes_b);
}

TEST_CASE("SURB header layout") {
  const auto bank = three_block_bank();
  const auto bytes = encode_surb(bank);
  REQUIRE(bytes.size() > 24);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SURB");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == bank.size());
  CHECK(bytes[16] == 3);                          // K
  CHECK(bytes[20] == bank.label_cardinality());   // C_total
  // First extractor record follows the labels: u16 name length then "A".
  const std::size_t rec = 24 + 4 * bank.size();
  CHECK(bytes[rec] == 1);
  CHECK(bytes[rec + 2] == 'A');
  CHECK(bytes[rec + 3] == 3);  // dim
  std::size_t expected = 24 + 4 * bank.size();
  for (const auto& e : bank.extractors()) expected += 2 + e.name.size() + 4 + 4 * bank.size() * e.dim;
  CHECK(bytes.size() == expected);
}

TEST_CASE("SURB decoding errors") {
  const auto bank = three_block_bank();
  const auto good = encode_surb(bank);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  bad_magic[1] = 'X';
  bad_magic[2] = 'X';
  bad_magic[3] = 'X';
  CHECK(kind_of([&] { decode_surb(bad_magic); }) == ErrorKind::BadMagic);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(kind_of([&] { decode_surb(bad_version); }) == ErrorKind::UnsupportedVersion);

  // Cut in the middle of the last feature matrix.
  std::vector<std::uint8_t> truncated(good.begin(), good.end() - 10);
  try {
    decode_surb(truncated);
    FAIL("expected TruncatedFile");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TruncatedFile);
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
  std::vector<std::uint8_t> header_only(good.begin(), good.begin() + 10);
  CHECK(kind_of([&] { decode_surb(header_only); }) == ErrorKind::TruncatedFile);

  auto bad_label = good;
  bad_label[24 + 4 * 2] = 200;  // label of record 2
  try {
    decode_surb(bad_label);
    FAIL("expected LabelOutOfRange");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LabelOutOfRange);
    CHECK(std::string(e.what()).find("record 2") != std::string::npos);
  }

  // Rename the second extractor "B" to "A".
  auto dup = good;
  const std::size_t second = 24 + 4 * bank.size() + 2 + 1 + 4 + 4 * bank.size() * 3;
  REQUIRE(dup[second + 2] == 'B');
  dup[second + 2] = 'A';
  CHECK(kind_of([&] { decode_surb(dup); }) == ErrorKind::DuplicateExtractorName);
}

TEST_CASE("save_bank rejects invalid banks before writing") {
  const auto dir = fixtures::temp_dir("reject");
  // Invalid banks cannot be constructed, so nothing reaches the writer.
  std::vector<float> two(4, 1.0f);
  CHECK(kind_of([&] { save_bank(FeatureBank("d", {{"a", 2}, {"a", 2}}, {0, 1}, {two, two}), dir / "d.surb"); }) ==
        ErrorKind::DuplicateExtractorName);
  CHECK(kind_of([&] { save_bank(FeatureBank("e", {{"a", 2}}, {}, {{}}), dir / "e.surb"); }) ==
        ErrorKind::InvalidArgument);
  CHECK_FALSE(std::filesystem::exists(dir / "d.surb"));
  CHECK_FALSE(std::filesystem::exists(dir / "e.surb"));
}

TEST_CASE("load_bank on missing files") {
  CHECK(kind_of([] { load_bank("/nonexistent/bank.surb"); }) == ErrorKind::IoError);
}

TEST_CASE("round trip property over random banks") {
  const auto dir = fixtures::temp_dir("prop");
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> k_dist(1, 4), d_dist(1, 6), c_dist(2, 5), n_dist(1, 4);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::size_t> dims(k_dist(rng));
    for (auto& d : dims) d = d_dist(rng);
    const auto bank = fixtures::random_bank(rng, dims, c_dist(rng), n_dist(rng), "trial" + std::to_string(trial));
    const auto surb = dir / ("t" + std::to_string(trial) + ".surb");
    const auto csv = dir / ("c" + std::to_string(trial) + ".csv");
    save_bank(bank, surb);
    save_bank(bank, csv);
    CHECK(load_bank(surb) == bank);
    CHECK(load_bank(csv) == bank);
  }
}

TEST_CASE("CSV bank format") {
  const auto dir = fixtures::temp_dir("csv");
  {
    std::ofstream out(dir / "tiny.csv");
    out << "label,img:0,img:1,txt:0\n0,1,0,0.5\n1,0,1,-0.5\n1,0.5,0.5,1\n";
  }
  const auto bank = load_bank(dir / "tiny.csv");
  CHECK(bank.dataset_name() == "tiny");
  CHECK(bank.num_extractors() == 2);
  CHECK(bank.extractor(0) == ExtractorMeta{"img", 2});
  CHECK(bank.extractor(1) == ExtractorMeta{"txt", 1});
  CHECK(bank.row(1, 1)[0] == -0.5f);

  {
    std::ofstream out(dir / "gap.csv");
    out << "label,img:0,img:2\n0,1,0\n1,0,1\n";
  }
  CHECK(kind_of([&] { load_bank(dir / "gap.csv"); }) == ErrorKind::MalformedCsv);
  {
    std::ofstream out(dir / "short.csv");
    out << "label,img:0,img:1\n0,1\n1,0,1\n";
  }
  CHECK(kind_of([&] { load_bank(dir / "short.csv"); }) == ErrorKind::MalformedCsv);
}

TEST_CASE("manifest sidecar carries dataset name and class names") {
  const auto dir = fixtures::temp_dir("manifest");
  const auto bank = three_block_bank();
  save_bank(bank, dir / "file.surb");
  CHECK(std::filesystem::exists(dir / "file.json"));
  const auto loaded = load_bank(dir / "file.surb");
  CHECK(loaded.dataset_name() == "abc");
  CHECK(loaded.class_names().at(2) == "two");
}

TEST_CASE("subset_extractors") {
  const auto bank = three_block_bank();
  const std::vector<std::string> b{"B"};
  const auto only_b = subset_extractors(bank, b);
  CHECK(only_b.num_extractors() == 1);
  CHECK(only_b.extractor(0).name == "B");
  CHECK(std::equal(only_b.block(0).begin(), only_b.block(0).end(), bank.block(1).begin()));
  CHECK(only_b.size() == bank.size());

  const std::vector<std::string> all{"A", "B", "C"};
  CHECK(subset_extractors(bank, all) == bank);

  const std::vector<std::string> reordered{"C", "A"};
  const auto ca = subset_extractors(bank, reordered);
  CHECK(ca.extractor(0).name == "C");
  CHECK(ca.extractor(1).name == "A");

  const std::vector<std::string> ab{"A", "B"}, a{"A"};
  CHECK(subset_extractors(subset_extractors(bank, ab), a) == subset_extractors(bank, a));

  const std::vector<std::string> z{"Z"};
  CHECK(kind_of([&] { subset_extractors(bank, z); }) == ErrorKind::UnknownExtractor);
}
