#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "attloc/errors.hpp"
#include "attloc/metrics.hpp"
#include "oracles.hpp"

using namespace attloc;

TEST_CASE("eer hand cases") {
  CHECK(*eer({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(*eer({{0.9, 0}, {0.8, 1}, {0.2, 0}, {0.1, 1}}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("eer undefined for single-class sets") {
  CHECK(!eer({{0.9, 1}, {0.8, 1}}));
  CHECK(!eer({{0.9, 0}}));
  CHECK(!eer({}));
}

TEST_CASE("eer equals the brute-force oracle on random sets") {
  Rng rng(17);
  for (int it = 0; it < 100; ++it) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<std::pair<double, int>> items;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid keeps ties common.
      const double score = static_cast<double>(rng.below(20)) / 19.0;
      items.emplace_back(score, static_cast<int>(rng.below(2)));
    }
    const auto fast = eer(items);
    const auto brute = oracle::brute_eer(items);
    REQUIRE(fast.has_value() == brute.has_value());
    if (fast) {
      CHECK(*fast == doctest::Approx(*brute).epsilon(1e-9));
      CHECK(*fast >= 0.0);
      CHECK(*fast <= 1.0);
    }
  }
}

TEST_CASE("eer is invariant under strictly increasing transforms") {
  Rng rng(23);
  for (int it = 0; it < 50; ++it) {
    std::vector<std::pair<double, int>> items, squared;
    const std::size_t n = 4 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = rng.uniform();
      const int t = static_cast<int>(rng.below(2));
      items.emplace_back(s, t);
      squared.emplace_back(s * s, t);
    }
    const auto a = eer(items);
    const auto b = eer(squared);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(*a == doctest::Approx(*b).epsilon(1e-12));
  }
}

TEST_CASE("eer_average") {
  std::array<std::optional<double>, kNumTags> zeros;
  zeros.fill(0.0);
  CHECK(eer_average(zeros) == 0.0);

  // Per-tag rates in (b, c, f, m, o, p, v) order.
  std::array<std::optional<double>, kNumTags> rates = {0.10, 0.10, 0.16, 0.03, 0.11, 0.03, 0.22};
  CHECK(eer_average(rates) == doctest::Approx(0.75 / 7.0).epsilon(1e-12));
  CHECK(eer_average(rates) == doctest::Approx(0.107).epsilon(0.005));

  std::array<std::optional<double>, kNumTags> with_hole = rates;
  with_hole[3] = std::nullopt;
  CHECK(eer_average(with_hole) == doctest::Approx(0.72 / 6.0).epsilon(1e-12));

  std::array<std::optional<double>, kNumTags> undefined{};
  CHECK_THROWS_AS(eer_average(undefined), NumericError);
}

TEST_CASE("roc auc basics") {
  CHECK(*roc_auc({1, 1, 0, 0}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(*roc_auc({0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}) == doctest::Approx(0.5));
  CHECK(!roc_auc({0.3, 0.5}, {1, 1}));
}

TEST_CASE("roc auc equals the all-pairs oracle") {
  Rng rng(31);
  for (int it = 0; it < 50; ++it) {
    std::vector<double> scores(20);
    std::vector<int> truth(20);
    for (std::size_t i = 0; i < 20; ++i) {
      scores[i] = static_cast<double>(rng.below(8)) / 7.0;
      truth[i] = static_cast<int>(rng.below(2));
    }
    const auto fast = roc_auc(scores, truth);
    const auto brute = oracle::allpairs_auc(scores, truth);
    REQUIRE(fast.has_value() == brute.has_value());
    if (fast) {
      CHECK(*fast == doctest::Approx(*brute).epsilon(1e-12));
      CHECK(*fast >= 0.0);
      CHECK(*fast <= 1.0);
    }
  }
}

TEST_CASE("localization auc over truth intervals") {
  Matrix scores(10, kNumTags);
  // event 2 active in frames [3, 6), scored perfectly
  for (int t = 0; t < 10; ++t) scores(static_cast<std::size_t>(t), 2) = (t >= 3 && t < 6) ? 1.0 : 0.0;
  const std::vector<TruthInterval> truth = {{2, 3, 6}};
  const auto aucs = localization_auc(scores, truth);
  REQUIRE(aucs[2].has_value());
  CHECK(*aucs[2] == doctest::Approx(1.0));
  for (int e = 0; e < kNumTags; ++e) {
    if (e != 2) CHECK(!aucs[static_cast<std::size_t>(e)].has_value());
  }

  // constant scores give 0.5
  Matrix flat(10, kNumTags);
  for (std::size_t i = 0; i < flat.size(); ++i) flat.data()[i] = 0.25;
  const auto flat_aucs = localization_auc(flat, truth);
  CHECK(*flat_aucs[2] == doctest::Approx(0.5));
}
