#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthkt/rng.hpp"

namespace synthkt {

// Parameter order per family:
//   loggamma   (c, loc, scale)
//   beta4      (a, b, loc, scale)
//   normal     (mu, sigma)
//   gamma3     (k, loc, scale)
//   lognormal3 (s, loc, scale)
//   uniform    (lo, hi)
//   weibull3   (k, loc, scale)
enum class FamilyKind { loggamma, beta4, normal, gamma3, lognormal3, uniform, weibull3 };

inline constexpr std::array<FamilyKind, 7> kAllFamilies = {
    FamilyKind::loggamma, FamilyKind::beta4,   FamilyKind::normal,  FamilyKind::gamma3,
    FamilyKind::lognormal3, FamilyKind::uniform, FamilyKind::weibull3};

std::string_view to_string(FamilyKind family);
FamilyKind parse_family(std::string_view text);
std::size_t arity(FamilyKind family);
std::span<const std::string_view> param_names(FamilyKind family);

struct FittedDistribution {
  FamilyKind family = FamilyKind::normal;
  std::vector<double> params;
  double rss_score = 0.0;
  double log_likelihood = 0.0;
};

// Builds a distribution from explicit parameters (scores left at zero).
// Throws DomainError on wrong arity or invalid values.
FittedDistribution make_distribution(FamilyKind family, std::vector<double> params);

// True when params have the right arity and satisfy the family constraints.
// A uniform with lo == hi is accepted as a point mass.
bool params_valid(FamilyKind family, std::span<const double> params);

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<double> densities;

  std::size_t bins() const noexcept { return densities.size(); }
  double center(std::size_t i) const { return 0.5 * (bin_edges[i] + bin_edges[i + 1]); }
};

// Equal-width bins over [min, max] of the sample, density-normalised.
Histogram make_histogram(std::span<const double> sample, std::size_t n_bins);

// Density at x; zero outside the support. Throws DomainError on invalid params
// (including a point-mass uniform, which has no density).
double pdf(const FittedDistribution& fit, double x);
double log_pdf(const FittedDistribution& fit, double x);
double log_likelihood(const FittedDistribution& fit, std::span<const double> sample);

// Sum over bins of (empirical density - pdf(bin center))^2.
double histogram_rss(const FittedDistribution& fit, const Histogram& hist);

struct FitFailure {
  FamilyKind family = FamilyKind::normal;
  std::string reason;
};

struct FitOutcome {
  FamilyKind family = FamilyKind::normal;
  std::optional<FittedDistribution> fit;
  std::string failure;  // set when fit is empty

  bool ok() const noexcept { return fit.has_value(); }
};

inline constexpr std::size_t kMinFitSample = 50;

// Maximum-likelihood fit via Nelder-Mead from a method-of-moments start
// plus jittered restarts. Deterministic in the sample. Degenerate inputs and
// non-convergence come back as a failed outcome rather than an exception.
// Throws DomainError when the sample is smaller than kMinFitSample or has
// non-finite values.
FitOutcome mle_fit(FamilyKind family, std::span<const double> sample);

struct BestFitResult {
  std::vector<FittedDistribution> ranked;  // ascending rss_score
  std::vector<FitFailure> failures;
  std::size_t n_used = 0;                  // sample size after boundary exclusion
  std::size_t n_excluded = 0;              // values equal to 0 or 100
  Histogram histogram;
};

// Removes grades exactly 0 and 100, fits every family and ranks by
// histogram RSS. Throws FitError when every family fails.
BestFitResult select_best_fit(std::span<const double> sample, std::span<const FamilyKind> families,
                              std::size_t n_bins = 50);

std::vector<double> sample(const FittedDistribution& fit, std::size_t n, Rng& rng);
double sample_one(const FittedDistribution& fit, Rng& rng);

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

// Closed-form mean and standard deviation; nullopt when they are not finite.
std::optional<Moments> analytic_moments(const FittedDistribution& fit);

}  // namespace synthkt
