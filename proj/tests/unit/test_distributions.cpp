#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "../support/oracles.hpp"
#include "synthkt/distributions.hpp"
#include "synthkt/error.hpp"
#include "synthkt/rng.hpp"

using namespace synthkt;

namespace {

double sample_mean(const std::vector<double>& v) { return oracle::plain_stats(v).mean; }

// Support of a family for quadrature purposes.
std::pair<double, double> support(const FittedDistribution& d) {
  const auto& p = d.params;
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (d.family) {
    case FamilyKind::loggamma: return {-inf, inf};
    case FamilyKind::beta4: return {p[2], p[2] + p[3]};
    case FamilyKind::normal: return {-inf, inf};
    case FamilyKind::gamma3: return {p[1], inf};
    case FamilyKind::lognormal3: return {p[1], inf};
    case FamilyKind::uniform: return {p[0], p[1]};
    case FamilyKind::weibull3: return {p[1], inf};
  }
  return {0, 0};
}

FittedDistribution random_params(FamilyKind f, Rng& rng) {
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  switch (f) {
    case FamilyKind::loggamma: return make_distribution(f, {u(0.3, 4), u(40, 90), u(3, 15)});
    case FamilyKind::beta4: return make_distribution(f, {u(1.2, 5), u(1.2, 5), u(0, 20), u(50, 80)});
    case FamilyKind::normal: return make_distribution(f, {u(30, 70), u(5, 20)});
    case FamilyKind::gamma3: return make_distribution(f, {u(1.2, 8), u(0, 20), u(3, 10)});
    case FamilyKind::lognormal3: return make_distribution(f, {u(0.1, 0.8), u(0, 20), u(20, 50)});
    case FamilyKind::uniform: {
      const double lo = u(0, 40);
      return make_distribution(f, {lo, lo + u(10, 60)});
    }
    case FamilyKind::weibull3: return make_distribution(f, {u(1.2, 5), u(0, 20), u(20, 60)});
  }
  throw DomainError("unreachable");
}

}  // namespace

TEST_CASE("family names, arity and parameter validation") {
  for (FamilyKind f : kAllFamilies) {
    CHECK(parse_family(to_string(f)) == f);
    CHECK(param_names(f).size() == arity(f));
  }
  CHECK(arity(FamilyKind::beta4) == 4);
  CHECK_THROWS_AS(parse_family("cauchy"), DomainError);
  CHECK_THROWS_AS(make_distribution(FamilyKind::normal, {0.0}), DomainError);
  CHECK_THROWS_AS(make_distribution(FamilyKind::normal, {0.0, -1.0}), DomainError);
  CHECK_THROWS_AS(make_distribution(FamilyKind::loggamma, {0.0, 1.0, 1.0}), DomainError);
  CHECK(params_valid(FamilyKind::uniform, std::vector<double>{70, 70}));
  CHECK_FALSE(params_valid(FamilyKind::uniform, std::vector<double>{71, 70}));
}

TEST_CASE("pdf closed-form values") {
  CHECK(pdf(make_distribution(FamilyKind::loggamma, {1, 0, 1}), 0.0) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(pdf(make_distribution(FamilyKind::beta4, {1, 1, 0, 100}), 50.0) == doctest::Approx(0.01));
  CHECK(pdf(make_distribution(FamilyKind::normal, {0, 1}), 0.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
  CHECK(pdf(make_distribution(FamilyKind::uniform, {0, 4}), 5.0) == 0.0);
  CHECK(pdf(make_distribution(FamilyKind::gamma3, {2, 10, 1}), 9.0) == 0.0);
  CHECK_THROWS_AS(pdf(make_distribution(FamilyKind::uniform, {70, 70}), 70.0), DomainError);
  const auto ln = make_distribution(FamilyKind::lognormal3, {0.5, 2, 3});
  CHECK(std::log(pdf(ln, 7.0)) == doctest::Approx(log_pdf(ln, 7.0)).epsilon(1e-12));
}

TEST_CASE("reference loggamma integrates to one") {
  const auto d = make_distribution(FamilyKind::loggamma, {0.5, 89.02, 8.20});
  const double total = oracle::integrate([&](double x) { return pdf(d, x); },
                                         -std::numeric_limits<double>::infinity(), 89.02) +
                       oracle::integrate([&](double x) { return pdf(d, x); }, 89.02,
                                         std::numeric_limits<double>::infinity());
  CHECK(std::fabs(total - 1.0) < 1e-6);
}

TEST_CASE("densities integrate to one for random parameters") {
  Rng rng(12);
  for (FamilyKind f : kAllFamilies) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto d = random_params(f, rng);
      const auto [lo, hi] = support(d);
      const double total = oracle::integrate([&](double x) { return pdf(d, x); }, lo, hi);
      INFO(to_string(f), " trial ", trial);
      CHECK(std::fabs(total - 1.0) < 1e-4);
    }
  }
}

TEST_CASE("histogram is density-normalised") {
  Rng rng(5);
  std::vector<double> v(5000);
  for (double& x : v) x = rng.normal(50, 12);
  const Histogram h = make_histogram(v, 50);
  REQUIRE(h.bins() == 50);
  double mass = 0.0;
  for (std::size_t i = 0; i < h.bins(); ++i) {
    CHECK(h.densities[i] >= 0.0);
    mass += h.densities[i] * (h.bin_edges[i + 1] - h.bin_edges[i]);
  }
  CHECK(std::fabs(mass - 1.0) < 1e-9);
}

TEST_CASE("analytic moments") {
  const auto lg = analytic_moments(make_distribution(FamilyKind::loggamma, {0.5, 89.02, 8.20}));
  REQUIRE(lg);
  CHECK(lg->mean == doctest::Approx(72.92).epsilon(2e-4));
  CHECK(lg->std == doctest::Approx(18.22).epsilon(5e-4));
  const auto b = analytic_moments(make_distribution(FamilyKind::beta4, {2.46, 2.89, 4.38, 92.62}));
  REQUIRE(b);
  CHECK(b->mean == doctest::Approx(4.38 + 92.62 * 2.46 / 5.35).epsilon(1e-12));
  const auto n = analytic_moments(make_distribution(FamilyKind::normal, {50, 10}));
  REQUIRE(n);
  CHECK(n->mean == 50);
  CHECK(n->std == 10);
}

TEST_CASE("sampling is deterministic and matches analytic moments") {
  Rng a(77), b(77);
  const auto lg = make_distribution(FamilyKind::loggamma, {0.5, 89.02, 8.20});
  CHECK(sample(lg, 1000, a) == sample(lg, 1000, b));

  Rng rng(2024);
  const auto big = sample(lg, 100000, rng);
  CHECK(std::fabs(sample_mean(big) - 72.92) < 0.3);

  const auto flat = sample(make_distribution(FamilyKind::beta4, {1, 1, 0, 100}), 20000, rng);
  CHECK(std::fabs(sample_mean(flat) - 50.0) < 3.0 * 100.0 / std::sqrt(12.0 * 20000.0));

  for (FamilyKind f : kAllFamilies) {
    for (int trial = 0; trial < 3; ++trial) {
      const auto d = random_params(f, rng);
      const auto m = analytic_moments(d);
      REQUIRE(m);
      const auto s = sample(d, 100000, rng);
      const auto st = oracle::plain_stats(s);
      INFO(to_string(f), " trial ", trial);
      CHECK(std::fabs(st.mean - m->mean) < 4.0 * m->std / std::sqrt(100000.0));
      CHECK(std::fabs(st.std - m->std) < 0.02 * m->std);
    }
  }

  const auto point = sample(make_distribution(FamilyKind::uniform, {70, 70}), 10, rng);
  for (double x : point) CHECK(x == 70.0);
}

TEST_CASE("normal MLE recovers its parameters") {
  Rng rng(1);
  const auto data = sample(make_distribution(FamilyKind::normal, {50, 10}), 200000, rng);
  const auto out = mle_fit(FamilyKind::normal, data);
  REQUIRE(out.ok());
  CHECK(out.fit->params[0] == doctest::Approx(50).epsilon(0.01));
  CHECK(out.fit->params[1] == doctest::Approx(10).epsilon(0.01));
}

TEST_CASE("MLE self-consistency across families") {
  Rng rng(31);
  const std::vector<FittedDistribution> truths = {
      make_distribution(FamilyKind::beta4, {2.46, 2.89, 4.38, 92.62}),
      make_distribution(FamilyKind::gamma3, {4.0, 10.0, 8.0}),
      make_distribution(FamilyKind::weibull3, {2.5, 5.0, 50.0}),
      make_distribution(FamilyKind::lognormal3, {0.4, 10.0, 40.0}),
  };
  for (const auto& truth : truths) {
    const auto data = sample(truth, 50000, rng);
    const auto out = mle_fit(truth.family, data);
    INFO(to_string(truth.family));
    REQUIRE(out.ok());
    // Location/scale pairs trade off against shapes, so compare the implied
    // moments and the likelihood rather than raw parameters.
    const auto mt = analytic_moments(truth);
    const auto mf = analytic_moments(*out.fit);
    REQUIRE(mf);
    CHECK(mf->mean == doctest::Approx(mt->mean).epsilon(0.01));
    CHECK(mf->std == doctest::Approx(mt->std).epsilon(0.02));
    CHECK(out.fit->log_likelihood >= log_likelihood(truth, data) - 1e-6);
  }
}

TEST_CASE("degenerate and undersized samples") {
  const std::vector<double> constant(200, 70.0);
  for (FamilyKind f : kAllFamilies) {
    const auto out = mle_fit(f, constant);
    CHECK_FALSE(out.ok());
    CHECK_FALSE(out.failure.empty());
  }
  CHECK_THROWS_AS(mle_fit(FamilyKind::normal, std::vector<double>(10, 1.0)), DomainError);
  CHECK_THROWS_AS(select_best_fit(constant, kAllFamilies), FitError);
}

TEST_CASE("uniform data ranks uniform ahead of normal") {
  Rng rng(8);
  std::vector<double> data(20000);
  for (double& x : data) x = 100.0 * rng.uniform();
  const std::vector<FamilyKind> fams{FamilyKind::normal, FamilyKind::uniform};
  const auto r = select_best_fit(data, fams, 50);
  REQUIRE(r.ranked.size() == 2);
  CHECK(r.ranked[0].family == FamilyKind::uniform);

  // Recompute both scores from scratch.
  const double lo = *std::min_element(data.begin(), data.end());
  const double hi = *std::max_element(data.begin(), data.end());
  std::vector<double> counts(50, 0.0);
  const double w = (hi - lo) / 50.0;
  for (double x : data) counts[std::min<std::size_t>(49, static_cast<std::size_t>((x - lo) / w))] += 1;
  auto rss = [&](const FittedDistribution& f) {
    double total = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
      const double c = lo + (static_cast<double>(i) + 0.5) * w;
      const double diff = counts[i] / (static_cast<double>(data.size()) * w) - pdf(f, c);
      total += diff * diff;
    }
    return total;
  };
  for (const auto& f : r.ranked) CHECK(rss(f) == doctest::Approx(f.rss_score).epsilon(1e-9));
  CHECK(rss(r.ranked[0]) < rss(r.ranked[1]));
}

TEST_CASE("select_best_fit drops boundary grades and is deterministic") {
  Rng rng(4);
  auto data = sample(make_distribution(FamilyKind::normal, {60, 12}), 3000, rng);
  data.insert(data.end(), {0.0, 100.0, 100.0});
  const std::vector<FamilyKind> fams{FamilyKind::normal, FamilyKind::loggamma};
  const auto a = select_best_fit(data, fams);
  const auto b = select_best_fit(data, fams);
  CHECK(a.n_excluded == 3);
  CHECK(a.n_used == 3000);
  REQUIRE(a.ranked.size() == b.ranked.size());
  for (std::size_t i = 0; i < a.ranked.size(); ++i) {
    CHECK(a.ranked[i].params == b.ranked[i].params);
    CHECK(a.ranked[i].rss_score == b.ranked[i].rss_score);
  }
  CHECK(std::is_sorted(a.ranked.begin(), a.ranked.end(),
                       [](const auto& x, const auto& y) { return x.rss_score < y.rss_score; }));
}

TEST_CASE("generating family has the highest likelihood") {
  Rng rng(17);
  const std::vector<FamilyKind> fams(kAllFamilies.begin(), kAllFamilies.end());
  const std::vector<FittedDistribution> truths = {
      make_distribution(FamilyKind::loggamma, {0.5, 89.02, 8.20}),
      make_distribution(FamilyKind::beta4, {2.0, 5.0, 0.0, 100.0}),
      make_distribution(FamilyKind::uniform, {20.0, 80.0}),
  };
  for (const auto& truth : truths) {
    const auto data = sample(truth, 20000, rng);
    const auto own = mle_fit(truth.family, data);
    REQUIRE(own.ok());
    for (FamilyKind f : fams) {
      if (f == truth.family) continue;
      const auto other = mle_fit(f, data);
      if (!other.ok()) continue;
      INFO(to_string(truth.family), " vs ", to_string(f));
      CHECK(own.fit->log_likelihood >= other.fit->log_likelihood);
    }
  }
}
