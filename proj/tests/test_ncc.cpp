#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sur/error.hpp"
#include "sur/ncc.hpp"

using namespace sur;

namespace {

// Random episode over every class of the bank with 1..max_shots support items
// per class; the remaining items become queries.
Episode random_episode(const FeatureBank& bank, std::mt19937_64& rng, std::size_t max_shots) {
  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < bank.size(); ++i) by_class[bank.label(i)].push_back(i);
  Episode ep;
  for (auto& [label, items] : by_class) {
    std::shuffle(items.begin(), items.end(), rng);
    const std::size_t shots = std::uniform_int_distribution<std::size_t>(1, std::min(max_shots, items.size() - 1))(rng);
    for (std::size_t i = 0; i < items.size(); ++i) {
      (i < shots ? ep.support : ep.query).push_back({items[i], label});
    }
  }
  return ep;
}

std::vector<double> random_lambda(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> l(k);
  for (double& x : l) x = u(rng);
  return l;
}

}  // namespace

TEST_CASE("select_features examples") {
  const std::vector<double> e1{1, 0}, e2{0, 1}, v{0.6, 0.8};
  const std::vector<std::span<const double>> blocks{e1, e2};
  CHECK(select_features(blocks, SelectionVector({1, 1})) == std::vector<double>{1, 0, 0, 1});
  CHECK(select_features(blocks, SelectionVector({0, 1})) == std::vector<double>{0, 0, 0, 1});
  const std::vector<std::span<const double>> one{v};
  const auto half = select_features(one, SelectionVector({0.5}));
  CHECK(half[0] == doctest::Approx(0.3));
  CHECK(half[1] == doctest::Approx(0.4));
  CHECK_THROWS_AS(select_features(blocks, SelectionVector({1})), Error);
}

TEST_CASE("SelectionVector range") {
  CHECK_THROWS_AS(SelectionVector({1.5}), Error);
  CHECK_THROWS_AS(SelectionVector({-0.1}), Error);
  CHECK_NOTHROW(SelectionVector({0.0, 1.0}));
}

TEST_CASE("compute_centroids examples") {
  SUBCASE("singleton mean") {
    const auto bank = fixtures::bank_from_rows({{{1, 0}}, {{0, 1}}}, {0, 1});
    const NormalizedView view(bank);
    const Episode ep{{{0, 0}, {1, 1}}, {}};
    const auto model = compute_centroids(view, ep, SelectionVector({1}));
    CHECK(model.class_ids == std::vector<std::uint32_t>{0, 1});
    CHECK(model.centroids[0] == std::vector<double>{1, 0});
  }
  SUBCASE("two-point mean and linearity") {
    const auto bank = fixtures::bank_from_rows({{{1, 0}}, {{0, 1}}, {{1, 1}}}, {0, 0, 1});
    const NormalizedView view(bank);
    const Episode ep{{{0, 0}, {1, 0}, {2, 1}}, {}};
    const auto full = compute_centroids(view, ep, SelectionVector({1}));
    CHECK(full.centroids[0][0] == doctest::Approx(0.5));
    CHECK(full.centroids[0][1] == doctest::Approx(0.5));
    const auto half = compute_centroids(view, ep, SelectionVector({0.5}));
    CHECK(half.centroids[0][0] == doctest::Approx(0.25));
    CHECK(half.centroids[0][1] == doctest::Approx(0.25));
  }
  SUBCASE("query class without support") {
    const auto bank = fixtures::bank_from_rows({{{1, 0}}, {{0, 1}}}, {0, 1});
    const NormalizedView view(bank);
    const Episode ep{{{0, 0}}, {{1, 1}}};
    try {
      compute_centroids(view, ep, SelectionVector({1}));
      FAIL("expected EmptyClass");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyClass);
    }
  }
}

TEST_CASE("centroids match recomputation and are linear in lambda") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto bank = fixtures::random_bank(rng, {3, 5, 2}, 3, 5);
    const NormalizedView view(bank);
    const auto ep = random_episode(bank, rng, 3);
    const auto lambda = random_lambda(3, rng);
    const auto model = compute_centroids(view, ep, SelectionVector(lambda));
    const auto ref = oracle::centroids(bank, ep, lambda);
    const auto unit = compute_centroids(view, ep, SelectionVector::ones(3));
    for (std::size_t j = 0; j < model.class_ids.size(); ++j) {
      const auto& expected = ref.at(model.class_ids[j]);
      std::size_t offset = 0;
      for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t d = 0; d < model.block_dims[k]; ++d, ++offset) {
          CHECK(std::abs(model.centroids[j][offset] - expected[offset]) <= 1e-12);
          CHECK(std::abs(model.centroids[j][offset] - lambda[k] * unit.centroids[j][offset]) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("cosine_similarity examples") {
  const std::vector<double> x{1, 0}, y{0, 1}, mx{-1, 0}, z{0, 0};
  CHECK(cosine_similarity(x, x) == doctest::Approx(1.0));
  CHECK(cosine_similarity(x, y) == doctest::Approx(0.0));
  CHECK(cosine_similarity(x, mx) == doctest::Approx(-1.0));
  CHECK(cosine_similarity(x, z) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(x, std::vector<double>{1, 2, 3}), Error);
}

TEST_CASE("cosine stays in [-1, 1]") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1e3);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> u(7), v(7);
    for (auto& x : u) x = n(rng);
    v = u;
    if (t % 2) for (auto& x : v) x *= -3.0;
    const double c = cosine_similarity(u, v);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("predict examples") {
  CentroidModel model{{3, 7}, {{1, 0}, {0, 1}}, {2}};
  CHECK(predict(std::vector<double>{0.8, 0.6}, model) == 3);
  CHECK(predict(std::vector<double>{0, 1}, model) == 7);
  CHECK(predict(std::vector<double>{1, 1}, model) == 3);  // tie -> smaller id
  CHECK(predict(std::vector<double>{0, 0}, model) == 3);  // degenerate query -> tie-break
}

TEST_CASE("accuracy examples") {
  // Orthogonal classes, queries identical to the sole support item.
  const auto bank = fixtures::bank_from_rows({{{1, 0, 0}}, {{0, 1, 0}}, {{0, 0, 1}}, {{1, 0, 0}}, {{0, 1, 0}}, {{0, 0, 1}}},
                                             {0, 1, 2, 0, 1, 2});
  const NormalizedView view(bank);
  Episode ep{{{0, 0}, {1, 1}, {2, 2}}, {{3, 0}, {4, 1}, {5, 2}}};
  CHECK(accuracy(view, ep, SelectionVector({1})) == 1.0);

  // Same items, true labels rotated so every prediction is wrong.
  Episode wrong{{{0, 0}, {1, 1}, {2, 2}}, {{3, 1}, {4, 2}, {5, 0}}};
  CHECK(accuracy(view, wrong, SelectionVector({1})) == 0.0);
}

TEST_CASE("accuracy matches the brute-force NCC") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto bank = fixtures::random_bank(rng, {4, 3}, 3, 6);
    const NormalizedView view(bank);
    const auto ep = random_episode(bank, rng, 3);
    const auto lambda = random_lambda(2, rng);
    CHECK(accuracy(view, ep, SelectionVector(lambda)) == oracle::accuracy(bank, ep, lambda));
    const auto preds = predict_queries(view, ep, SelectionVector(lambda));
    for (std::size_t q = 0; q < ep.query.size(); ++q) {
      CHECK(preds[q] == oracle::predict(bank, ep, lambda, ep.query[q].index));
    }
  }
}

TEST_CASE("prediction invariances") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 40; ++trial) {
    const auto bank = fixtures::random_bank(rng, {4, 2, 5}, 4, 5);
    const NormalizedView view(bank);
    const auto ep = random_episode(bank, rng, 3);
    const auto lambda = random_lambda(3, rng);
    const auto base = predict_queries(view, ep, SelectionVector(lambda));

    SUBCASE("global lambda scale") {
      for (double c : {1.0, 0.5, 0.1, 1e-3}) {
        std::vector<double> scaled(lambda);
        for (double& l : scaled) l *= c;
        CHECK(predict_queries(view, ep, SelectionVector(scaled)) == base);
      }
    }
    SUBCASE("block permutation") {
      const std::vector<std::string> order{"block2", "block0", "block1"};
      const auto permuted = subset_extractors(bank, order);
      const NormalizedView pview(permuted);
      const SelectionVector plambda({lambda[2], lambda[0], lambda[1]});
      CHECK(predict_queries(pview, ep, plambda) == base);
    }
    SUBCASE("raw feature scale") {
      std::uniform_real_distribution<double> scale(0.01, 100.0);
      std::vector<std::vector<float>> blocks;
      for (std::size_t k = 0; k < bank.num_extractors(); ++k) {
        std::vector<float> b(bank.block(k).begin(), bank.block(k).end());
        const std::size_t dim = bank.extractor(k).dim;
        for (std::size_t i = 0; i < bank.size(); ++i) {
          const auto c = static_cast<float>(scale(rng));
          for (std::size_t d = 0; d < dim; ++d) b[i * dim + d] *= c;
        }
        blocks.push_back(std::move(b));
      }
      const FeatureBank scaled(bank.dataset_name(), bank.extractors(), {bank.labels().begin(), bank.labels().end()},
                               std::move(blocks));
      const NormalizedView sview(scaled);
      CHECK(predict_queries(sview, ep, SelectionVector(lambda)) == base);
    }
  }
}

TEST_CASE("single block predictions do not depend on lambda") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto bank = fixtures::random_bank(rng, {6}, 4, 5);
    const NormalizedView view(bank);
    const auto ep = random_episode(bank, rng, 3);
    const auto base = predict_queries(view, ep, SelectionVector({1.0}));
    for (double l : {0.9, 0.5, 0.01}) CHECK(predict_queries(view, ep, SelectionVector({l})) == base);
  }
}
