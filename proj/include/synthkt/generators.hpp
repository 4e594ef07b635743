#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "synthkt/dataset.hpp"
#include "synthkt/distributions.hpp"

namespace synthkt {

enum class GeneratorMethod { gen1, gen2, gen3 };

std::string_view to_string(GeneratorMethod method);
GeneratorMethod parse_generator(std::string_view text);
Provenance provenance_of(GeneratorMethod method);

struct GeneratorConfig {
  GeneratorMethod method = GeneratorMethod::gen3;
  std::size_t n_paths = 1;
  double noise_mu = 0.0;
  double noise_sigma = 3.0;
  bool clamp = true;
  std::uint64_t seed = 0;
};

// Grades observed at each step position across all paths.
class StepPool {
 public:
  explicit StepPool(const Dataset& real);

  std::size_t max_steps() const noexcept { return pools_.size(); }
  const std::vector<double>& at(std::size_t step) const;

 private:
  std::vector<std::vector<double>> pools_;
};

// Skeletons of uniformly drawn template paths with every grade replaced by an
// independent draw from `fit`.
Dataset generate_gen1(const FittedDistribution& fit, const Dataset& templ,
                      const GeneratorConfig& config);

// Skeletons of uniformly drawn real paths; the grade at step t is resampled
// from the step-t pool of all real students, then perturbed with Gaussian
// noise.
Dataset generate_gen2(const Dataset& real, const GeneratorConfig& config);

// Whole real paths replicated under fresh ids with Gaussian noise on every
// grade.
Dataset generate_gen3(const Dataset& real, const GeneratorConfig& config);

// Dispatches on config.method. gen1 needs `fit`.
Dataset generate(const Dataset& real, const GeneratorConfig& config,
                 const FittedDistribution* fit = nullptr);

}  // namespace synthkt
