#include "synthkt/metrics.hpp"

#include <bit>
#include <cmath>

#include "synthkt/error.hpp"
#include "synthkt/rng.hpp"

namespace synthkt {

namespace {
void require_pairs(std::span<const PredictionPair> pairs, const char* what) {
  if (pairs.empty()) throw DomainError(std::string(what) + " of an empty pair list");
}
}  // namespace

ConfusionCounts confusion(std::span<const PredictionPair> pairs, double threshold) {
  ConfusionCounts c;
  for (const auto& p : pairs) {
    const int pred = binary_class(p.predicted, threshold);
    const int act = binary_class(p.actual, threshold);
    if (pred == 1 && act == 1) ++c.tp;
    else if (pred == 0 && act == 0) ++c.tn;
    else if (pred == 1) ++c.fp;
    else ++c.fn;
  }
  return c;
}

double mae(std::span<const PredictionPair> pairs) {
  require_pairs(pairs, "mae");
  double sum = 0.0;
  for (const auto& p : pairs) sum += std::abs(p.predicted - p.actual);
  return sum / static_cast<double>(pairs.size());
}

double accuracy(std::span<const PredictionPair> pairs, double threshold) {
  require_pairs(pairs, "accuracy");
  const ConfusionCounts c = confusion(pairs, threshold);
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(pairs.size());
}

double mcc(const ConfusionCounts& c) {
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double d1 = tp + fp, d2 = tp + fn, d3 = tn + fp, d4 = tn + fn;
  if (d1 == 0.0 || d2 == 0.0 || d3 == 0.0 || d4 == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(d1 * d2 * d3 * d4);
}

double mcc(std::span<const PredictionPair> pairs, double threshold) {
  require_pairs(pairs, "mcc");
  return mcc(confusion(pairs, threshold));
}

std::uint64_t actuals_hash(std::span<const PredictionPair> pairs) {
  std::uint64_t h = pairs.size();
  for (const auto& p : pairs) h = mix_seed(h, std::bit_cast<std::uint64_t>(p.actual));
  return h;
}

}  // namespace synthkt
