#include "synthkt/generators.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "synthkt/error.hpp"
#include "synthkt/rng.hpp"

namespace synthkt {

std::string_view to_string(GeneratorMethod method) {
  switch (method) {
    case GeneratorMethod::gen1: return "gen1";
    case GeneratorMethod::gen2: return "gen2";
    case GeneratorMethod::gen3: return "gen3";
  }
  return "?";
}

GeneratorMethod parse_generator(std::string_view text) {
  if (text == "gen1") return GeneratorMethod::gen1;
  if (text == "gen2") return GeneratorMethod::gen2;
  if (text == "gen3") return GeneratorMethod::gen3;
  throw DomainError("unknown generator method '" + std::string(text) + "'");
}

Provenance provenance_of(GeneratorMethod method) {
  switch (method) {
    case GeneratorMethod::gen1: return Provenance::gen1;
    case GeneratorMethod::gen2: return Provenance::gen2;
    case GeneratorMethod::gen3: return Provenance::gen3;
  }
  return Provenance::real;
}

StepPool::StepPool(const Dataset& real) {
  for (const auto& path : real.paths()) {
    if (path.steps.size() > pools_.size()) pools_.resize(path.steps.size());
    for (std::size_t t = 0; t < path.steps.size(); ++t) pools_[t].push_back(path.steps[t].grade);
  }
}

const std::vector<double>& StepPool::at(std::size_t step) const {
  if (step >= pools_.size() || pools_[step].empty()) {
    throw std::logic_error("step pool empty at step " + std::to_string(step));
  }
  return pools_[step];
}

namespace {

void check_inputs(const Dataset& real, const GeneratorConfig& config) {
  if (real.empty()) throw DomainError("generator template dataset is empty");
  if (config.n_paths == 0) throw DomainError("n_paths must be at least 1");
  if (!(config.noise_sigma >= 0.0)) throw DomainError("noise_sigma must be non-negative");
}

// Sequential ids with a provenance prefix; the prefix is extended until no
// id collides with the template.
std::vector<std::string> fresh_ids(const Dataset& real, GeneratorMethod method, std::size_t n) {
  std::set<std::string> taken;
  for (const auto& p : real.paths()) taken.insert(p.student_id);
  std::string prefix = std::string(to_string(method)) + "-";
  for (;;) {
    std::vector<std::string> ids;
    ids.reserve(n);
    bool clash = false;
    for (std::size_t i = 0; i < n && !clash; ++i) {
      ids.push_back(prefix + std::to_string(i));
      clash = taken.count(ids.back()) > 0;
    }
    if (!clash) return ids;
    prefix = "syn" + prefix;
  }
}

double finish_grade(double g, const GeneratorConfig& config) {
  return config.clamp ? std::clamp(g, 0.0, 100.0) : g;
}

// Per-path generation with an rng stream derived from (seed, path index).
template <typename Fill>
Dataset build(const Dataset& real, const GeneratorConfig& config, Fill fill) {
  const auto ids = fresh_ids(real, config.method, config.n_paths);
  std::vector<LearningPath> out;
  out.reserve(config.n_paths);
  for (std::size_t i = 0; i < config.n_paths; ++i) {
    Rng rng(mix_seed(config.seed, i));
    const LearningPath& source = real.paths()[rng.index(real.n_students())];
    LearningPath path;
    path.student_id = ids[i];
    path.steps = source.steps;
    fill(path, rng);
    out.push_back(std::move(path));
  }
  return Dataset(std::move(out), provenance_of(config.method));
}

}  // namespace

Dataset generate_gen1(const FittedDistribution& fit, const Dataset& templ,
                      const GeneratorConfig& config) {
  check_inputs(templ, config);
  if (!params_valid(fit.family, fit.params)) throw DomainError("invalid fitted distribution");
  GeneratorConfig c = config;
  c.method = GeneratorMethod::gen1;
  return build(templ, c, [&](LearningPath& path, Rng& rng) {
    for (auto& step : path.steps) step.grade = finish_grade(sample_one(fit, rng), c);
  });
}

Dataset generate_gen2(const Dataset& real, const GeneratorConfig& config) {
  check_inputs(real, config);
  GeneratorConfig c = config;
  c.method = GeneratorMethod::gen2;
  const StepPool pool(real);
  return build(real, c, [&](LearningPath& path, Rng& rng) {
    for (std::size_t t = 0; t < path.steps.size(); ++t) {
      const auto& grades = pool.at(t);
      const double g = grades[rng.index(grades.size())];
      path.steps[t].grade = finish_grade(g + rng.normal(c.noise_mu, c.noise_sigma), c);
    }
  });
}

Dataset generate_gen3(const Dataset& real, const GeneratorConfig& config) {
  check_inputs(real, config);
  GeneratorConfig c = config;
  c.method = GeneratorMethod::gen3;
  return build(real, c, [&](LearningPath& path, Rng& rng) {
    for (auto& step : path.steps) {
      step.grade = finish_grade(step.grade + rng.normal(c.noise_mu, c.noise_sigma), c);
    }
  });
}

Dataset generate(const Dataset& real, const GeneratorConfig& config,
                 const FittedDistribution* fit) {
  switch (config.method) {
    case GeneratorMethod::gen1:
      if (fit == nullptr) throw DomainError("gen1 requires a fitted distribution");
      return generate_gen1(*fit, real, config);
    case GeneratorMethod::gen2: return generate_gen2(real, config);
    case GeneratorMethod::gen3: return generate_gen3(real, config);
  }
  throw DomainError("unknown generator method");
}

}  // namespace synthkt
