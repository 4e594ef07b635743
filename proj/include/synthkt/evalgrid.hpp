#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "synthkt/bkt.hpp"
#include "synthkt/dataset.hpp"
#include "synthkt/distributions.hpp"
#include "synthkt/dkt.hpp"
#include "synthkt/generators.hpp"

namespace synthkt {

enum class ModelKind { dkt, bkt };

std::string_view to_string(ModelKind model);
ModelKind parse_model(std::string_view text);

// Takes whole paths of real_train totalling ~real_ratio of its interactions
// and whole synthetic paths totalling ~synth_ratio of the same count. Sizes
// stop at the path boundary nearest the target; real_ratio >= 1 keeps all of
// real_train in its original order. Throws DomainError when both ratios are 0
// or negative.
Dataset mix_training_data(const Dataset& real_train, const Dataset& synth, double real_ratio,
                          double synth_ratio, std::uint64_t seed);

struct GridSpec {
  std::vector<double> real_ratios{0.0, 0.5, 1.0};
  std::vector<double> synth_ratios{0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 3.0};
  std::vector<GeneratorMethod> generators{GeneratorMethod::gen1, GeneratorMethod::gen2,
                                          GeneratorMethod::gen3};
  std::vector<ModelKind> models{ModelKind::dkt};
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  double noise_mu = 0.0;
  double noise_sigma = 3.0;
  bool clamp = true;
  std::vector<FamilyKind> gen1_families{kAllFamilies.begin(), kAllFamilies.end()};
  std::size_t gen1_bins = 50;

  DktConfig dkt;
  BktFitOptions bkt;
  std::size_t jobs = 1;
};

void validate(const GridSpec& spec);

struct GridCellResult {
  std::optional<GeneratorMethod> generator;  // empty for real-only baselines
  ModelKind model = ModelKind::dkt;
  double real_ratio = 0.0;
  double synth_ratio = 0.0;
  double mae = 0.0;
  double acc = 0.0;
  double mcc = 0.0;
  std::size_t train_interactions = 0;
  std::size_t test_pairs = 0;
  std::uint64_t test_hash = 0;
  double wall_seconds = 0.0;
  std::string error;  // empty on success

  bool ok() const noexcept { return error.empty(); }
};

std::string generator_label(const GridCellResult& cell);

struct GridRun {
  std::vector<GridCellResult> cells;  // sorted by (generator, model, real, synth)
  std::size_t train_paths = 0;
  std::size_t test_paths = 0;
  std::size_t train_interactions = 0;
  std::size_t test_interactions = 0;
  std::optional<FittedDistribution> gen1_fit;
  std::vector<std::string> notes;  // non-fatal problems (e.g. failed gen1 fit)
};

// Number of cells run_grid produces: synth-free baselines once per model
// (real > 0), plus |real_ratios| x |synth > 0| cells per generator and model.
std::size_t expected_cell_count(const GridSpec& spec);

// One shared test split, synthetic pools generated once per generator from
// the training side, then one train/evaluate per cell. Cell failures are
// recorded in the cell and do not stop the run.
GridRun run_grid(const Dataset& real, const GridSpec& spec);

// Writes results.csv, timings.csv, tables/<model>_<metric>_<gen>.md and
// plots/<model>_<metric>.svg below out_dir. Everything except timings.csv is
// a pure function of `cells`.
void emit_report(const std::vector<GridCellResult>& cells, const std::filesystem::path& out_dir);

}  // namespace synthkt
