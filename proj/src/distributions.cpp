#include "synthkt/distributions.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "synthkt/error.hpp"
#include "synthkt/optimize.hpp"

namespace synthkt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

constexpr std::array<std::string_view, 3> kLogGammaNames = {"c", "loc", "scale"};
constexpr std::array<std::string_view, 4> kBetaNames = {"a", "b", "loc", "scale"};
constexpr std::array<std::string_view, 2> kNormalNames = {"mu", "sigma"};
constexpr std::array<std::string_view, 3> kGammaNames = {"k", "loc", "scale"};
constexpr std::array<std::string_view, 3> kLogNormalNames = {"s", "loc", "scale"};
constexpr std::array<std::string_view, 2> kUniformNames = {"lo", "hi"};
constexpr std::array<std::string_view, 3> kWeibullNames = {"k", "loc", "scale"};

double lbeta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// log of y^(p-1) handling y == 0.
double log_power_term(double y, double p) {
  if (y > 0.0) return (p - 1.0) * std::log(y);
  if (p == 1.0) return 0.0;
  return p < 1.0 ? kInf : -kInf;
}

// Sum of log densities over xs. params already validated.
double sum_log_pdf(FamilyKind family, std::span<const double> p, std::span<const double> xs) {
  const auto n = static_cast<double>(xs.size());
  double acc = 0.0;
  switch (family) {
    case FamilyKind::loggamma: {
      const double c = p[0], loc = p[1], scale = p[2];
      for (double x : xs) {
        const double z = (x - loc) / scale;
        acc += c * z - std::exp(z);
      }
      return acc - n * (std::lgamma(c) + std::log(scale));
    }
    case FamilyKind::beta4: {
      const double a = p[0], b = p[1], loc = p[2], scale = p[3];
      for (double x : xs) {
        const double y = (x - loc) / scale;
        if (y < 0.0 || y > 1.0) return -kInf;
        acc += log_power_term(y, a) + log_power_term(1.0 - y, b);
      }
      return acc - n * (lbeta(a, b) + std::log(scale));
    }
    case FamilyKind::normal: {
      const double mu = p[0], sigma = p[1];
      for (double x : xs) {
        const double z = (x - mu) / sigma;
        acc += z * z;
      }
      return -0.5 * acc - n * (kLogSqrt2Pi + std::log(sigma));
    }
    case FamilyKind::gamma3: {
      const double k = p[0], loc = p[1], scale = p[2];
      for (double x : xs) {
        const double y = (x - loc) / scale;
        if (y < 0.0) return -kInf;
        acc += log_power_term(y, k) - y;
      }
      return acc - n * (std::lgamma(k) + std::log(scale));
    }
    case FamilyKind::lognormal3: {
      const double s = p[0], loc = p[1], scale = p[2];
      for (double x : xs) {
        const double y = (x - loc) / scale;
        if (y <= 0.0) return -kInf;
        const double ly = std::log(y);
        acc += -ly - 0.5 * ly * ly / (s * s);
      }
      return acc - n * (std::log(s) + kLogSqrt2Pi + std::log(scale));
    }
    case FamilyKind::uniform: {
      const double lo = p[0], hi = p[1];
      for (double x : xs) {
        if (x < lo || x > hi) return -kInf;
      }
      return -n * std::log(hi - lo);
    }
    case FamilyKind::weibull3: {
      const double k = p[0], loc = p[1], scale = p[2];
      for (double x : xs) {
        const double y = (x - loc) / scale;
        if (y < 0.0) return -kInf;
        if (y > 0.0) {
          const double ly = std::log(y);
          acc += (k - 1.0) * ly - std::exp(k * ly);
        } else {
          acc += log_power_term(y, k);
        }
      }
      return acc + n * (std::log(k) - std::log(scale));
    }
  }
  return -kInf;
}

void require_valid(const FittedDistribution& fit) {
  if (!params_valid(fit.family, fit.params)) {
    throw DomainError("invalid parameters for family " + std::string(to_string(fit.family)));
  }
}

struct SampleSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double skew = 0.0;
  double min = 0.0;
  double max = 0.0;
};

SampleSummary summarize(std::span<const double> xs) {
  SampleSummary s;
  s.n = xs.size();
  const auto n = static_cast<double>(xs.size());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : xs) {
    const double d = x - s.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  s.sd = std::sqrt(m2);
  s.skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

// Bisection for a monotone function f on [lo, hi] hitting target.
template <typename F>
double solve_monotone(F f, double lo, double hi, double target) {
  const bool increasing = f(hi) > f(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((f(mid) < target) == increasing) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double loggamma_skew(double c) {
  return boost::math::polygamma(2, c) / std::pow(boost::math::trigamma(c), 1.5);
}

double weibull_skew(double k) {
  const double g1 = std::tgamma(1.0 + 1.0 / k);
  const double g2 = std::tgamma(1.0 + 2.0 / k);
  const double g3 = std::tgamma(1.0 + 3.0 / k);
  return (g3 - 3.0 * g1 * g2 + 2.0 * g1 * g1 * g1) / std::pow(g2 - g1 * g1, 1.5);
}

double lognormal_skew(double s) {
  const double w = std::exp(s * s);
  return (w + 2.0) * std::sqrt(w - 1.0);
}

// Method-of-moments starting point, nudged into the feasible region.
std::vector<double> moment_start(FamilyKind family, const SampleSummary& s, double margin) {
  switch (family) {
    case FamilyKind::loggamma: {
      double c = 1e3;
      if (s.skew < loggamma_skew(1e3)) {
        const double target = std::max(s.skew, loggamma_skew(1e-3) * 0.999);
        c = std::exp(solve_monotone([](double lc) { return loggamma_skew(std::exp(lc)); },
                                    std::log(1e-3), std::log(1e3), target));
      }
      const double scale = s.sd / std::sqrt(boost::math::trigamma(c));
      return {c, s.mean - scale * boost::math::digamma(c), scale};
    }
    case FamilyKind::beta4: {
      const double pad = 0.05 * (s.max - s.min) + margin;
      const double loc = s.min - pad;
      const double scale = s.max - s.min + 2.0 * pad;
      const double m = (s.mean - loc) / scale;
      const double v = (s.sd / scale) * (s.sd / scale);
      const double common = m * (1.0 - m) / v - 1.0;
      if (common > 0.0) return {m * common, (1.0 - m) * common, loc, scale};
      return {1.0, 1.0, loc, scale};
    }
    case FamilyKind::normal:
      return {s.mean, s.sd};
    case FamilyKind::gamma3: {
      const double k = s.skew > 0.063 ? 4.0 / (s.skew * s.skew) : 1e3;
      const double scale = s.sd / std::sqrt(k);
      const double loc = std::min(s.mean - k * scale, s.min - margin - 0.1 * s.sd);
      return {k, loc, scale};
    }
    case FamilyKind::lognormal3: {
      double sigma = 0.05;
      if (s.skew > lognormal_skew(0.05)) {
        sigma = solve_monotone(lognormal_skew, 0.05, 3.0, std::min(s.skew, lognormal_skew(3.0)));
      }
      const double w = std::exp(sigma * sigma);
      const double scale = s.sd / std::sqrt(w * (w - 1.0));
      const double loc = std::min(s.mean - scale * std::sqrt(w), s.min - margin - 0.1 * s.sd);
      return {sigma, loc, scale};
    }
    case FamilyKind::uniform:
      return {s.min, s.max};
    case FamilyKind::weibull3: {
      const double lo_k = 0.3, hi_k = 50.0;
      const double target = std::clamp(s.skew, weibull_skew(hi_k), weibull_skew(lo_k));
      const double k = solve_monotone(weibull_skew, lo_k, hi_k, target);
      const double g1 = std::tgamma(1.0 + 1.0 / k);
      const double g2 = std::tgamma(1.0 + 2.0 / k);
      const double scale = s.sd / std::sqrt(g2 - g1 * g1);
      double loc = s.mean - scale * g1;
      if (loc > s.min - margin) loc = s.min - margin - 0.1 * s.sd;
      return {k, loc, scale};
    }
  }
  return {};
}

// Coordinates for the unconstrained search: positive parameters on a log
// scale, locations standardised by the sample spread.
enum class Coord { positive, location };

std::vector<Coord> coords(FamilyKind family) {
  using enum Coord;
  switch (family) {
    case FamilyKind::loggamma: return {positive, location, positive};
    case FamilyKind::beta4: return {positive, positive, location, positive};
    case FamilyKind::normal: return {location, positive};
    case FamilyKind::gamma3:
    case FamilyKind::lognormal3:
    case FamilyKind::weibull3: return {positive, location, positive};
    case FamilyKind::uniform: return {location, location};
  }
  return {};
}

// Support must cover the sample with a margin of one average spacing; this
// keeps the likelihood bounded for shifted families with shape < 1.
bool support_feasible(FamilyKind family, std::span<const double> p, const SampleSummary& s,
                      double margin) {
  // Shape parameters are capped so searches toward a limiting family
  // (e.g. gamma -> normal as k grows) terminate.
  constexpr double kMaxShape = 1e4;
  if (family != FamilyKind::normal && family != FamilyKind::uniform && p[0] > kMaxShape) {
    return false;
  }
  if (family == FamilyKind::beta4 && p[1] > kMaxShape) return false;
  switch (family) {
    case FamilyKind::beta4: return p[2] <= s.min - margin && p[2] + p[3] >= s.max + margin;
    case FamilyKind::gamma3:
    case FamilyKind::lognormal3:
    case FamilyKind::weibull3: return p[1] <= s.min - margin;
    default: return true;
  }
}

}  // namespace

std::string_view to_string(FamilyKind family) {
  switch (family) {
    case FamilyKind::loggamma: return "loggamma";
    case FamilyKind::beta4: return "beta4";
    case FamilyKind::normal: return "normal";
    case FamilyKind::gamma3: return "gamma3";
    case FamilyKind::lognormal3: return "lognormal3";
    case FamilyKind::uniform: return "uniform";
    case FamilyKind::weibull3: return "weibull3";
  }
  return "?";
}

FamilyKind parse_family(std::string_view text) {
  for (FamilyKind f : kAllFamilies) {
    if (to_string(f) == text) return f;
  }
  throw DomainError("unknown distribution family '" + std::string(text) + "'");
}

std::span<const std::string_view> param_names(FamilyKind family) {
  switch (family) {
    case FamilyKind::loggamma: return kLogGammaNames;
    case FamilyKind::beta4: return kBetaNames;
    case FamilyKind::normal: return kNormalNames;
    case FamilyKind::gamma3: return kGammaNames;
    case FamilyKind::lognormal3: return kLogNormalNames;
    case FamilyKind::uniform: return kUniformNames;
    case FamilyKind::weibull3: return kWeibullNames;
  }
  return {};
}

std::size_t arity(FamilyKind family) { return param_names(family).size(); }

bool params_valid(FamilyKind family, std::span<const double> p) {
  if (p.size() != arity(family)) return false;
  for (double v : p) {
    if (!std::isfinite(v)) return false;
  }
  switch (family) {
    case FamilyKind::loggamma:
    case FamilyKind::gamma3:
    case FamilyKind::lognormal3:
    case FamilyKind::weibull3: return p[0] > 0.0 && p[2] > 0.0;
    case FamilyKind::beta4: return p[0] > 0.0 && p[1] > 0.0 && p[3] > 0.0;
    case FamilyKind::normal: return p[1] > 0.0;
    case FamilyKind::uniform: return p[1] >= p[0];
  }
  return false;
}

FittedDistribution make_distribution(FamilyKind family, std::vector<double> params) {
  FittedDistribution fit{family, std::move(params), 0.0, 0.0};
  require_valid(fit);
  return fit;
}

Histogram make_histogram(std::span<const double> sample, std::size_t n_bins) {
  if (sample.empty() || n_bins == 0) throw DomainError("histogram needs data and bins");
  auto [lo_it, hi_it] = std::minmax_element(sample.begin(), sample.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw DomainError("histogram of a sample with zero range");
  const double width = (hi - lo) / static_cast<double>(n_bins);

  Histogram h;
  h.bin_edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) h.bin_edges[i] = lo + width * static_cast<double>(i);
  h.bin_edges.back() = hi;
  std::vector<std::size_t> counts(n_bins, 0);
  for (double x : sample) {
    auto b = static_cast<std::size_t>((x - lo) / width);
    counts[std::min(b, n_bins - 1)]++;
  }
  h.densities.resize(n_bins);
  const auto n = static_cast<double>(sample.size());
  for (std::size_t i = 0; i < n_bins; ++i) {
    h.densities[i] = static_cast<double>(counts[i]) / (n * (h.bin_edges[i + 1] - h.bin_edges[i]));
  }
  return h;
}

double log_pdf(const FittedDistribution& fit, double x) {
  require_valid(fit);
  if (fit.family == FamilyKind::uniform && fit.params[1] == fit.params[0]) {
    throw DomainError("point-mass uniform has no density");
  }
  const double xs[1] = {x};
  return sum_log_pdf(fit.family, fit.params, xs);
}

double pdf(const FittedDistribution& fit, double x) { return std::exp(log_pdf(fit, x)); }

double log_likelihood(const FittedDistribution& fit, std::span<const double> sample) {
  require_valid(fit);
  return sum_log_pdf(fit.family, fit.params, sample);
}

double histogram_rss(const FittedDistribution& fit, const Histogram& hist) {
  double rss = 0.0;
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    const double r = hist.densities[i] - pdf(fit, hist.center(i));
    rss += r * r;
  }
  return rss;
}

FitOutcome mle_fit(FamilyKind family, std::span<const double> sample) {
  if (sample.size() < kMinFitSample) {
    throw DomainError("mle_fit needs at least " + std::to_string(kMinFitSample) + " values");
  }
  for (double x : sample) {
    if (!std::isfinite(x)) throw DomainError("mle_fit sample contains non-finite values");
  }
  FitOutcome out;
  out.family = family;
  const SampleSummary s = summarize(sample);
  if (!(s.max > s.min) || !(s.sd > 0.0)) {
    out.failure = "degenerate sample: zero spread leaves no positive scale";
    return out;
  }
  const double margin = (s.max - s.min) / static_cast<double>(s.n);
  const auto n = static_cast<double>(s.n);

  auto finish = [&](std::vector<double> params) {
    FittedDistribution fit{family, std::move(params), 0.0, 0.0};
    if (!params_valid(family, fit.params)) {
      out.failure = "fit produced invalid parameters";
      return;
    }
    fit.log_likelihood = sum_log_pdf(family, fit.params, sample);
    if (!std::isfinite(fit.log_likelihood)) {
      out.failure = "fit has non-finite log-likelihood";
      return;
    }
    out.fit = std::move(fit);
  };

  if (family == FamilyKind::uniform) {
    // Closed-form maximiser.
    finish({s.min, s.max});
    return out;
  }

  const std::vector<Coord> kinds = coords(family);
  const std::size_t d = kinds.size();
  auto decode = [&](const std::vector<double>& u) {
    std::vector<double> p(d);
    for (std::size_t i = 0; i < d; ++i) {
      p[i] = kinds[i] == Coord::positive ? std::exp(u[i]) : s.mean + s.sd * u[i];
    }
    return p;
  };
  auto encode = [&](const std::vector<double>& p) {
    std::vector<double> u(d);
    for (std::size_t i = 0; i < d; ++i) {
      u[i] = kinds[i] == Coord::positive ? std::log(p[i]) : (p[i] - s.mean) / s.sd;
    }
    return u;
  };
  auto objective = [&](const std::vector<double>& u) {
    const std::vector<double> p = decode(u);
    if (!params_valid(family, p) || !support_feasible(family, p, s, margin)) return kInf;
    return -sum_log_pdf(family, p, sample) / n;
  };

  std::vector<double> start = moment_start(family, s, margin);
  if (!params_valid(family, start)) {
    out.failure = "no valid moment-based starting point";
    return out;
  }
  NelderMeadOptions opts;
  opts.max_evaluations = 2000;
  opts.f_tolerance = 1e-9;
  opts.x_tolerance = 1e-4;

  std::vector<double> u0 = encode(start);
  // Coarse pass on a strided subsample of large inputs; the full-sample
  // searches below start from its optimum.
  constexpr std::size_t kCoarse = 20000;
  if (s.n > 4 * kCoarse) {
    std::vector<double> coarse;
    coarse.reserve(kCoarse + 1);
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t stride = s.n / kCoarse;
    for (std::size_t i = stride / 2; i < s.n; i += stride) coarse.push_back(sorted[i]);
    const auto nc = static_cast<double>(coarse.size());
    auto coarse_objective = [&](const std::vector<double>& u) {
      const std::vector<double> p = decode(u);
      if (!params_valid(family, p) || !support_feasible(family, p, s, margin)) return kInf;
      return -sum_log_pdf(family, p, coarse) / nc;
    };
    NelderMeadResult c = nelder_mead(coarse_objective, u0, std::vector<double>(d, 0.25), opts);
    if (std::isfinite(objective(c.x))) u0 = c.x;
  }

  NelderMeadResult best = nelder_mead(objective, u0, std::vector<double>(d, 0.1), opts);
  bool converged = best.converged && std::isfinite(best.value);

  Rng jitter(mix_seed(0x6d6c655f666974ULL, static_cast<std::uint64_t>(family)));
  constexpr int kRestarts = 3;
  NelderMeadOptions restart_opts = opts;
  restart_opts.max_evaluations = 600;
  for (int r = 0; r < kRestarts; ++r) {
    std::vector<double> u = best.x;
    for (double& v : u) v += 0.02 * jitter.normal();
    if (!std::isfinite(objective(u))) u = best.x;
    NelderMeadResult next = nelder_mead(objective, u, std::vector<double>(d, 0.02), restart_opts);
    if (next.value < best.value) best = next;
    converged = converged || (next.converged && std::isfinite(next.value));
  }
  if (!std::isfinite(best.value)) {
    out.failure = "no feasible parameters found";
    return out;
  }
  if (!converged) {
    out.failure = "optimizer did not converge after " + std::to_string(kRestarts) + " restarts";
    return out;
  }
  finish(decode(best.x));
  return out;
}

BestFitResult select_best_fit(std::span<const double> raw, std::span<const FamilyKind> families,
                              std::size_t n_bins) {
  if (families.empty()) throw DomainError("select_best_fit needs at least one family");
  if (n_bins == 0) throw DomainError("n_bins must be positive");
  BestFitResult result;
  std::vector<double> kept;
  kept.reserve(raw.size());
  for (double x : raw) {
    if (x == 0.0 || x == 100.0) {
      ++result.n_excluded;
    } else {
      kept.push_back(x);
    }
  }
  result.n_used = kept.size();
  if (kept.size() < kMinFitSample) {
    throw DomainError("select_best_fit needs at least " + std::to_string(kMinFitSample) +
                      " values after boundary exclusion");
  }
  const auto [lo, hi] = std::minmax_element(kept.begin(), kept.end());
  const bool degenerate = !(*hi > *lo);
  if (!degenerate) result.histogram = make_histogram(kept, n_bins);

  for (FamilyKind family : families) {
    FitOutcome outcome = mle_fit(family, kept);
    if (!outcome.ok()) {
      result.failures.push_back({family, outcome.failure});
      continue;
    }
    FittedDistribution fit = std::move(*outcome.fit);
    fit.rss_score = histogram_rss(fit, result.histogram);
    if (!std::isfinite(fit.rss_score)) {
      result.failures.push_back({family, "non-finite histogram residual"});
      continue;
    }
    result.ranked.push_back(std::move(fit));
  }
  if (result.ranked.empty()) {
    std::ostringstream msg;
    msg << "all distribution fits failed:";
    for (const auto& f : result.failures) msg << "\n  " << to_string(f.family) << ": " << f.reason;
    throw FitError(msg.str());
  }
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const FittedDistribution& a, const FittedDistribution& b) {
                     return a.rss_score < b.rss_score;
                   });
  return result;
}

double sample_one(const FittedDistribution& fit, Rng& rng) {
  const auto& p = fit.params;
  switch (fit.family) {
    case FamilyKind::loggamma: return p[1] + p[2] * rng.log_gamma_variate(p[0]);
    case FamilyKind::beta4: {
      const double g1 = rng.gamma(p[0]);
      const double g2 = rng.gamma(p[1]);
      return p[2] + p[3] * (g1 / (g1 + g2));
    }
    case FamilyKind::normal: return rng.normal(p[0], p[1]);
    case FamilyKind::gamma3: return p[1] + p[2] * rng.gamma(p[0]);
    case FamilyKind::lognormal3: return p[1] + p[2] * std::exp(p[0] * rng.normal());
    case FamilyKind::uniform: return p[0] + (p[1] - p[0]) * rng.uniform();
    case FamilyKind::weibull3:
      return p[1] + p[2] * std::pow(-std::log(rng.uniform_open()), 1.0 / p[0]);
  }
  return 0.0;
}

std::vector<double> sample(const FittedDistribution& fit, std::size_t n, Rng& rng) {
  require_valid(fit);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(fit, rng));
  return out;
}

std::optional<Moments> analytic_moments(const FittedDistribution& fit) {
  require_valid(fit);
  const auto& p = fit.params;
  Moments m;
  switch (fit.family) {
    case FamilyKind::loggamma:
      m.mean = p[1] + p[2] * boost::math::digamma(p[0]);
      m.std = p[2] * std::sqrt(boost::math::trigamma(p[0]));
      break;
    case FamilyKind::beta4: {
      const double a = p[0], b = p[1], ab = a + b;
      m.mean = p[2] + p[3] * a / ab;
      m.std = p[3] * std::sqrt(a * b / (ab * ab * (ab + 1.0)));
      break;
    }
    case FamilyKind::normal:
      m = {p[0], p[1]};
      break;
    case FamilyKind::gamma3:
      m.mean = p[1] + p[0] * p[2];
      m.std = std::sqrt(p[0]) * p[2];
      break;
    case FamilyKind::lognormal3: {
      const double w = std::exp(p[0] * p[0]);
      m.mean = p[1] + p[2] * std::sqrt(w);
      m.std = p[2] * std::sqrt(w * (w - 1.0));
      break;
    }
    case FamilyKind::uniform:
      m.mean = 0.5 * (p[0] + p[1]);
      m.std = (p[1] - p[0]) / std::sqrt(12.0);
      break;
    case FamilyKind::weibull3: {
      const double g1 = std::tgamma(1.0 + 1.0 / p[0]);
      const double g2 = std::tgamma(1.0 + 2.0 / p[0]);
      m.mean = p[1] + p[2] * g1;
      m.std = p[2] * std::sqrt(std::max(0.0, g2 - g1 * g1));
      break;
    }
  }
  if (!std::isfinite(m.mean) || !std::isfinite(m.std)) return std::nullopt;
  return m;
}

}  // namespace synthkt
