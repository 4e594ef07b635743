#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace synthkt {

struct NelderMeadOptions {
  std::size_t max_evaluations = 4000;
  double f_tolerance = 1e-10;  // absolute spread of simplex values
  double x_tolerance = 1e-6;   // simplex diameter (max-norm)
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

// Derivative-free simplex minimisation. Non-finite objective values are
// treated as +infinity, so infeasible regions may be signalled that way.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                             std::vector<double> start, const std::vector<double>& steps,
                             const NelderMeadOptions& options = {});

}  // namespace synthkt
