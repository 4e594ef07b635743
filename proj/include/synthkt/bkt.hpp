#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "synthkt/dataset.hpp"
#include "synthkt/metrics.hpp"

namespace synthkt {

// Two-state (unknown=0, known=1) knowledge model with forgetting.
struct BktParams {
  double prior = 0.4;   // P(known) before the first attempt
  double learn = 0.2;   // unknown -> known
  double forget = 0.1;  // known -> unknown
  double guess = 0.2;   // P(correct | unknown)
  double slip = 0.1;    // P(incorrect | known)

  friend bool operator==(const BktParams&, const BktParams&) = default;
};

bool params_valid(const BktParams& p);

// 1 iff grade/100 is strictly above 0.5.
int binarize(double grade);

struct ForwardBackwardResult {
  double log_likelihood = 0.0;
  std::vector<double> posterior_known;  // P(known at t | whole sequence)
};

// Scaled forward-backward recursions. Throws DomainError for params outside
// [0, 1] or an empty sequence. A zero-probability sequence yields -inf.
ForwardBackwardResult forward_backward(const BktParams& params, std::span<const int> obs);

struct SkillModel {
  std::string skill_id;
  BktParams params;
  std::size_t n_train_sequences = 0;
  double log_likelihood = 0.0;            // after the guess/slip clamp
  double unclamped_log_likelihood = 0.0;  // at EM convergence
  std::vector<double> ll_history;         // one entry per E-step
  std::size_t iterations = 0;
  bool converged = false;
};

// Baum-Welch on every sequence jointly. Stops once the total log-likelihood
// improves by less than `tol` or after max_iters updates, then clamps guess
// and slip to at most 0.5 and re-evaluates the likelihood. Throws EmError if
// an update turns NaN.
SkillModel em_fit(std::span<const std::vector<int>> sequences, const BktParams& init,
                  std::size_t max_iters, double tol);

// Online filtering: prediction[t] = P(correct at t | obs[0..t-1]).
std::vector<double> predict_sequence(const BktParams& params, std::span<const int> obs);

struct BktFitOptions {
  BktParams init;
  std::size_t max_iters = 200;
  double tol = 1e-6;
  std::size_t restarts = 3;
  std::uint64_t seed = 0;
};

// em_fit from options.init plus `restarts` jittered starts; keeps the best
// final likelihood.
SkillModel fit_skill(std::span<const std::vector<int>> sequences, const BktFitOptions& options);

// One skill model per skill id; interactions without a skill share the
// empty-string skill.
struct BktModel {
  std::map<std::string, SkillModel> skills;
  BktParams fallback;  // used for skills unseen during fitting
};

BktModel fit_bkt(const Dataset& train_data, const BktFitOptions& options = {});

// Pairs for every step t >= 1 of every path (the same positions DKT
// predicts): P(correct) against the continuous grade/100.
std::vector<PredictionPair> predict_dataset(const BktModel& model, const Dataset& test_data);

}  // namespace synthkt
