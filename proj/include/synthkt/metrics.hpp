#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace synthkt {

// A model prediction and the observed normalised grade, both in [0, 1].
struct PredictionPair {
  double predicted = 0.0;
  double actual = 0.0;
};

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// Binary class of a normalised score: 1 iff strictly above threshold.
inline int binary_class(double score, double threshold = 0.5) { return score > threshold ? 1 : 0; }

ConfusionCounts confusion(std::span<const PredictionPair> pairs, double threshold = 0.5);

// All three throw DomainError on an empty list.
double mae(std::span<const PredictionPair> pairs);
double accuracy(std::span<const PredictionPair> pairs, double threshold = 0.5);
// Zero whenever a marginal of the confusion matrix is empty.
double mcc(std::span<const PredictionPair> pairs, double threshold = 0.5);
double mcc(const ConfusionCounts& counts);

// Order-sensitive digest of the actual values, used to show that every grid
// cell was scored on the same test pairs.
std::uint64_t actuals_hash(std::span<const PredictionPair> pairs);

}  // namespace synthkt
