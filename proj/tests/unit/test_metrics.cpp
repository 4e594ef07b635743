#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "synthkt/error.hpp"
#include "synthkt/metrics.hpp"
#include "synthkt/rng.hpp"

using namespace synthkt;

namespace {

std::vector<PredictionPair> random_pairs(Rng& rng, std::size_t n) {
  std::vector<PredictionPair> v(n);
  for (auto& p : v) {
    p.predicted = rng.uniform();
    p.actual = rng.uniform() < 0.1 ? 0.5 : rng.uniform();
  }
  return v;
}

}  // namespace

TEST_CASE("mae examples") {
  const std::vector<PredictionPair> same{{0.3, 0.3}, {0.9, 0.9}};
  CHECK(mae(same) == 0.0);
  const std::vector<PredictionPair> sym{{0.5, 1.0}, {0.5, 0.0}};
  CHECK(mae(sym) == 0.5);
  CHECK_THROWS_AS(mae(std::vector<PredictionPair>{}), DomainError);
}

TEST_CASE("accuracy examples") {
  std::vector<PredictionPair> v(100, PredictionPair{0.9, 0.8});
  CHECK(accuracy(v) == 1.0);
  for (std::size_t i = 0; i < 100; ++i) v[i] = {0.5, i < 91 ? 0.8 : 0.2};
  CHECK(accuracy(v) == doctest::Approx(0.09));
  for (auto& p : v) p.predicted = 0.9;
  CHECK(accuracy(v) == doctest::Approx(0.91));
  CHECK(mcc(v) == 0.0);
}

TEST_CASE("mcc examples") {
  const std::vector<PredictionPair> perfect{{0.9, 0.7}, {0.1, 0.2}, {0.8, 1.0}, {0.0, 0.5}};
  CHECK(mcc(perfect) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<PredictionPair> single{{0.9, 0.7}, {0.9, 0.2}, {0.6, 1.0}};
  CHECK(mcc(single) == 0.0);
  ConfusionCounts c{4, 3, 2, 1};
  CHECK(mcc(c) == doctest::Approx(10.0 / std::sqrt(600.0)).epsilon(1e-14));
  CHECK(binary_class(0.5) == 0);
  CHECK(binary_class(0.5000001) == 1);
}

TEST_CASE("metrics match brute-force recomputation on random pair lists") {
  Rng rng(2718);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto v = random_pairs(rng, 1 + rng.index(200));
    REQUIRE(std::fabs(mae(v) - oracle::brute_mae(v)) < 1e-12);
    REQUIRE(std::fabs(accuracy(v) - oracle::brute_accuracy(v)) < 1e-12);
    REQUIRE(std::fabs(mcc(v) - oracle::brute_mcc(v)) < 1e-12);
    const auto c = confusion(v);
    const auto o = oracle::brute_counts(v);
    REQUIRE(static_cast<long double>(c.tp) == o.tp);
    REQUIRE(static_cast<long double>(c.fn) == o.fn);

    const double m = mcc(v);
    REQUIRE(m >= -1.0);
    REQUIRE(m <= 1.0);
    REQUIRE(mae(v) <= 1.0);
    std::vector<PredictionPair> swapped;
    for (const auto& p : v) swapped.push_back({p.actual, p.predicted});
    REQUIRE(std::fabs(mcc(swapped) - m) < 1e-15);
  }
}

TEST_CASE("actuals hash depends only on actuals and their order") {
  const std::vector<PredictionPair> a{{0.1, 0.4}, {0.2, 0.9}};
  const std::vector<PredictionPair> b{{0.7, 0.4}, {0.8, 0.9}};
  const std::vector<PredictionPair> c{{0.7, 0.9}, {0.8, 0.4}};
  CHECK(actuals_hash(a) == actuals_hash(b));
  CHECK(actuals_hash(a) != actuals_hash(c));
}
