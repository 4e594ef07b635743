#include "synthkt/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "synthkt/error.hpp"

namespace synthkt {

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                             std::vector<double> start, const std::vector<double>& steps,
                             const NelderMeadOptions& options) {
  const std::size_t d = start.size();
  if (d == 0 || steps.size() != d) throw DomainError("nelder_mead: dimension mismatch");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  NelderMeadResult result;
  auto eval = [&](const std::vector<double>& x) {
    ++result.evaluations;
    const double v = objective(x);
    return std::isfinite(v) ? v : kInf;
  };

  std::vector<std::vector<double>> simplex(d + 1, start);
  std::vector<double> values(d + 1);
  for (std::size_t i = 0; i < d; ++i) simplex[i + 1][i] += steps[i];
  for (std::size_t i = 0; i <= d; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(d + 1);
  std::vector<double> centroid(d), trial(d), trial2(d);
  auto point = [&](double t, std::vector<double>& out) {
    // centroid + t * (centroid - worst)
    const auto& worst = simplex[order[d]];
    for (std::size_t j = 0; j < d; ++j) out[j] = centroid[j] + t * (centroid[j] - worst[j]);
  };

  while (result.evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const double best = values[order[0]];
    const double worst = values[order[d]];

    double diameter = 0.0;
    for (std::size_t i = 1; i <= d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        diameter = std::max(diameter, std::abs(simplex[order[i]][j] - simplex[order[0]][j]));
      }
    }
    if (std::isfinite(worst) && worst - best <= options.f_tolerance &&
        diameter <= options.x_tolerance) {
      result.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) centroid[j] += simplex[order[i]][j];
    }
    for (double& c : centroid) c /= static_cast<double>(d);

    point(1.0, trial);
    const double fr = eval(trial);
    const double second_worst = values[order[d - 1]];
    if (fr < best) {
      point(2.0, trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        simplex[order[d]] = trial2;
        values[order[d]] = fe;
      } else {
        simplex[order[d]] = trial;
        values[order[d]] = fr;
      }
      continue;
    }
    if (fr < second_worst) {
      simplex[order[d]] = trial;
      values[order[d]] = fr;
      continue;
    }
    // Contraction: outside if the reflection improved on the worst point.
    const bool outside = fr < worst;
    point(outside ? 0.5 : -0.5, trial2);
    const double fc = eval(trial2);
    if (fc < (outside ? fr : worst)) {
      simplex[order[d]] = trial2;
      values[order[d]] = fc;
      continue;
    }
    const auto& anchor = simplex[order[0]];
    for (std::size_t i = 1; i <= d; ++i) {
      auto& p = simplex[order[i]];
      for (std::size_t j = 0; j < d; ++j) p[j] = anchor[j] + 0.5 * (p[j] - anchor[j]);
      values[order[i]] = eval(p);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  result.x = simplex[static_cast<std::size_t>(best_it - values.begin())];
  result.value = *best_it;
  return result;
}

}  // namespace synthkt
