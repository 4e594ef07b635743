#include "synthkt/bkt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "synthkt/error.hpp"
#include "synthkt/rng.hpp"

namespace synthkt {

namespace {

using Pair = std::array<double, 2>;

bool prob(double p) { return p >= 0.0 && p <= 1.0; }

// Emission probability of obs in each state.
Pair emission(const BktParams& p, int o) {
  return o ? Pair{p.guess, 1.0 - p.slip} : Pair{1.0 - p.guess, p.slip};
}

// Row-stochastic transition: A[from][to].
std::array<Pair, 2> transition(const BktParams& p) {
  return {Pair{1.0 - p.learn, p.learn}, Pair{p.forget, 1.0 - p.forget}};
}

struct Accumulators {
  double first_known = 0.0;
  double n_sequences = 0.0;
  double from_unknown = 0.0, unknown_to_known = 0.0;
  double from_known = 0.0, known_to_unknown = 0.0;
  double in_unknown = 0.0, unknown_correct = 0.0;
  double in_known = 0.0, known_incorrect = 0.0;
};

// E-step for one sequence; returns its log-likelihood.
double expect(const BktParams& p, std::span<const int> obs, std::vector<Pair>& alpha,
              std::vector<double>& scale, std::vector<Pair>& beta, Accumulators* acc,
              std::vector<double>* posterior) {
  const std::size_t T = obs.size();
  const auto A = transition(p);
  alpha.resize(T);
  scale.resize(T);
  beta.resize(T);

  double ll = 0.0;
  Pair prev{1.0 - p.prior, p.prior};
  for (std::size_t t = 0; t < T; ++t) {
    Pair pred = prev;
    if (t > 0) {
      pred = {prev[0] * A[0][0] + prev[1] * A[1][0], prev[0] * A[0][1] + prev[1] * A[1][1]};
    }
    const Pair e = emission(p, obs[t]);
    Pair a{pred[0] * e[0], pred[1] * e[1]};
    double c = a[0] + a[1];
    if (c > 0.0) {
      ll += std::log(c);
      a = {a[0] / c, a[1] / c};
    } else {
      ll = -std::numeric_limits<double>::infinity();
      a = pred;
      c = 1.0;
    }
    alpha[t] = a;
    scale[t] = c;
    prev = a;
  }

  beta[T - 1] = {1.0, 1.0};
  for (std::size_t t = T - 1; t-- > 0;) {
    const Pair e = emission(p, obs[t + 1]);
    const Pair& bn = beta[t + 1];
    for (int s = 0; s < 2; ++s) {
      beta[t][s] = (A[s][0] * e[0] * bn[0] + A[s][1] * e[1] * bn[1]) / scale[t + 1];
    }
  }

  if (posterior != nullptr) posterior->resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    double g0 = alpha[t][0] * beta[t][0];
    double g1 = alpha[t][1] * beta[t][1];
    const double z = g0 + g1;
    if (z > 0.0) {
      g0 /= z;
      g1 /= z;
    }
    if (posterior != nullptr) (*posterior)[t] = std::clamp(g1, 0.0, 1.0);
    if (acc == nullptr) continue;
    if (t == 0) {
      acc->first_known += g1;
      acc->n_sequences += 1.0;
    }
    acc->in_unknown += g0;
    acc->in_known += g1;
    if (obs[t]) {
      acc->unknown_correct += g0;
    } else {
      acc->known_incorrect += g1;
    }
    if (t + 1 < T) {
      acc->from_unknown += g0;
      acc->from_known += g1;
      const Pair e = emission(p, obs[t + 1]);
      const Pair& bn = beta[t + 1];
      const double c = scale[t + 1];
      acc->unknown_to_known += alpha[t][0] * A[0][1] * e[1] * bn[1] / c;
      acc->known_to_unknown += alpha[t][1] * A[1][0] * e[0] * bn[0] / c;
    }
  }
  return ll;
}

double total_expect(const BktParams& p, std::span<const std::vector<int>> sequences,
                    Accumulators* acc) {
  std::vector<Pair> alpha, beta;
  std::vector<double> scale;
  if (acc != nullptr) *acc = {};
  double ll = 0.0;
  for (const auto& seq : sequences) {
    if (seq.empty()) continue;
    ll += expect(p, seq, alpha, scale, beta, acc, nullptr);
  }
  return ll;
}

double ratio_or(double num, double den, double fallback) {
  return den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : fallback;
}

BktParams maximize(const Accumulators& a, const BktParams& old) {
  BktParams p;
  p.prior = ratio_or(a.first_known, a.n_sequences, old.prior);
  p.learn = ratio_or(a.unknown_to_known, a.from_unknown, old.learn);
  p.forget = ratio_or(a.known_to_unknown, a.from_known, old.forget);
  p.guess = ratio_or(a.unknown_correct, a.in_unknown, old.guess);
  p.slip = ratio_or(a.known_incorrect, a.in_known, old.slip);
  return p;
}

bool has_nan(const BktParams& p) {
  return std::isnan(p.prior) || std::isnan(p.learn) || std::isnan(p.forget) ||
         std::isnan(p.guess) || std::isnan(p.slip);
}

}  // namespace

bool params_valid(const BktParams& p) {
  return prob(p.prior) && prob(p.learn) && prob(p.forget) && prob(p.guess) && prob(p.slip);
}

int binarize(double grade) { return grade / 100.0 > 0.5 ? 1 : 0; }

ForwardBackwardResult forward_backward(const BktParams& params, std::span<const int> obs) {
  if (!params_valid(params)) throw DomainError("BKT parameters must lie in [0, 1]");
  if (obs.empty()) throw DomainError("forward_backward needs at least one observation");
  std::vector<Pair> alpha, beta;
  std::vector<double> scale;
  ForwardBackwardResult r;
  r.log_likelihood = expect(params, obs, alpha, scale, beta, nullptr, &r.posterior_known);
  return r;
}

SkillModel em_fit(std::span<const std::vector<int>> sequences, const BktParams& init,
                  std::size_t max_iters, double tol) {
  if (!params_valid(init)) throw DomainError("BKT initial parameters must lie in [0, 1]");
  SkillModel model;
  for (const auto& s : sequences) {
    if (!s.empty()) ++model.n_train_sequences;
  }
  if (model.n_train_sequences == 0) throw DomainError("em_fit needs a non-empty sequence");

  Accumulators acc;
  BktParams params = init;
  double ll = total_expect(params, sequences, &acc);
  model.ll_history.push_back(ll);
  for (std::size_t it = 0; it < max_iters; ++it) {
    const BktParams next = maximize(acc, params);
    if (has_nan(next)) {
      throw EmError(it + 1, "EM update produced NaN at iteration " + std::to_string(it + 1));
    }
    const double next_ll = total_expect(next, sequences, &acc);
    model.ll_history.push_back(next_ll);
    params = next;
    model.iterations = it + 1;
    if (next_ll - ll < tol) {
      model.converged = true;
      ll = next_ll;
      break;
    }
    ll = next_ll;
  }
  model.unclamped_log_likelihood = ll;
  if (params.guess > 0.5 || params.slip > 0.5) {
    params.guess = std::min(params.guess, 0.5);
    params.slip = std::min(params.slip, 0.5);
    ll = total_expect(params, sequences, nullptr);
  }
  model.params = params;
  model.log_likelihood = ll;
  return model;
}

std::vector<double> predict_sequence(const BktParams& params, std::span<const int> obs) {
  if (!params_valid(params)) throw DomainError("BKT parameters must lie in [0, 1]");
  std::vector<double> out;
  out.reserve(obs.size());
  double known = params.prior;
  for (int o : obs) {
    out.push_back(known * (1.0 - params.slip) + (1.0 - known) * params.guess);
    const Pair e = emission(params, o);
    const double z = known * e[1] + (1.0 - known) * e[0];
    const double post = z > 0.0 ? known * e[1] / z : known;
    known = std::clamp(post * (1.0 - params.forget) + (1.0 - post) * params.learn, 0.0, 1.0);
  }
  return out;
}

SkillModel fit_skill(std::span<const std::vector<int>> sequences, const BktFitOptions& options) {
  SkillModel best = em_fit(sequences, options.init, options.max_iters, options.tol);
  Rng rng(options.seed);
  auto jitter = [&rng](double v, double hi) {
    return std::clamp(v + 0.2 * (rng.uniform() - 0.5), 0.01, hi);
  };
  for (std::size_t r = 0; r < options.restarts; ++r) {
    BktParams init = options.init;
    init.prior = jitter(init.prior, 0.99);
    init.learn = jitter(init.learn, 0.99);
    init.forget = jitter(init.forget, 0.99);
    init.guess = jitter(init.guess, 0.45);
    init.slip = jitter(init.slip, 0.45);
    SkillModel candidate = em_fit(sequences, init, options.max_iters, options.tol);
    if (candidate.log_likelihood > best.log_likelihood) best = std::move(candidate);
  }
  return best;
}

BktModel fit_bkt(const Dataset& train_data, const BktFitOptions& options) {
  std::map<std::string, std::vector<std::vector<int>>> by_skill;
  for (const auto& path : train_data.paths()) {
    std::map<std::string, std::vector<int>> local;
    for (const auto& step : path.steps) local[step.skill_id].push_back(binarize(step.grade));
    for (auto& [skill, seq] : local) by_skill[skill].push_back(std::move(seq));
  }
  if (by_skill.empty()) throw DomainError("fit_bkt on an empty dataset");
  BktModel model;
  model.fallback = options.init;
  std::uint64_t stream = 0;
  for (const auto& [skill, seqs] : by_skill) {
    BktFitOptions opts = options;
    opts.seed = mix_seed(options.seed, stream++);
    SkillModel sm = fit_skill(seqs, opts);
    sm.skill_id = skill;
    model.skills.emplace(skill, std::move(sm));
  }
  return model;
}

std::vector<PredictionPair> predict_dataset(const BktModel& model, const Dataset& test_data) {
  if (test_data.empty()) throw DomainError("predict_dataset on an empty test set");
  std::vector<PredictionPair> out;
  for (const auto& path : test_data.paths()) {
    std::map<std::string, double> known;
    for (std::size_t t = 0; t < path.steps.size(); ++t) {
      const auto& step = path.steps[t];
      auto it = model.skills.find(step.skill_id);
      const BktParams& p = it != model.skills.end() ? it->second.params : model.fallback;
      auto k = known.try_emplace(step.skill_id, p.prior).first;
      const double pk = k->second;
      if (t > 0) out.push_back({pk * (1.0 - p.slip) + (1.0 - pk) * p.guess, step.grade / 100.0});
      const Pair e = emission(p, binarize(step.grade));
      const double z = pk * e[1] + (1.0 - pk) * e[0];
      const double post = z > 0.0 ? pk * e[1] / z : pk;
      k->second = std::clamp(post * (1.0 - p.forget) + (1.0 - post) * p.learn, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace synthkt
