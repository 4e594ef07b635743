#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "synthkt/error.hpp"
#include "synthkt/evalgrid.hpp"

using namespace synthkt;
namespace fs = std::filesystem;

namespace {

const Dataset& small_fixture() {
  static const Dataset ds = make_fixture(FixtureConfig{.n_students = 120, .max_length = 30});
  return ds;
}

GridSpec quick_spec() {
  GridSpec spec;
  spec.seed = 5;
  spec.dkt.hidden_size = 8;
  spec.dkt.input_buckets = 32;
  spec.dkt.epochs = 2;
  spec.gen1_families = {FamilyKind::normal, FamilyKind::loggamma};
  return spec;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("synthkt_evalgrid_" + name);
  fs::remove_all(dir);
  return dir;
}

GridCellResult cell(std::optional<GeneratorMethod> g, double r, double s, double mae) {
  GridCellResult c;
  c.generator = g;
  c.real_ratio = r;
  c.synth_ratio = s;
  c.mae = mae;
  c.acc = 1.0 - mae;
  c.mcc = 0.1;
  c.test_pairs = 10;
  return c;
}

}  // namespace

TEST_CASE("model names") {
  CHECK(parse_model("bkt") == ModelKind::bkt);
  CHECK_THROWS_AS(parse_model("lstm"), DomainError);
}

TEST_CASE("mixing identity, sizes and determinism") {
  const Dataset& real = small_fixture();
  const Dataset synth = generate_gen3(real, GeneratorConfig{.n_paths = 500, .seed = 3});

  const Dataset same = mix_training_data(real, synth, 1.0, 0.0, 1);
  CHECK(same.content_hash() == Dataset(real.paths(), real.provenance()).content_hash());

  std::size_t longest = 0;
  for (const auto& p : synth.paths()) longest = std::max(longest, p.size());
  for (const auto& p : real.paths()) longest = std::max(longest, p.size());
  const double base = static_cast<double>(real.n_interactions());
  for (double r : {0.0, 0.5, 1.0}) {
    for (double s : {0.0, 0.25, 1.0, 3.0}) {
      if (r == 0.0 && s == 0.0) continue;
      const Dataset mixed = mix_training_data(real, synth, r, s, 9);
      INFO("r=", r, " s=", s);
      CHECK(std::fabs(static_cast<double>(mixed.n_interactions()) - (r + s) * base) <=
            static_cast<double>(longest));
    }
  }
  const Dataset a = mix_training_data(real, synth, 0.5, 0.0, 4);
  const Dataset b = mix_training_data(real, synth, 0.5, 0.0, 4);
  CHECK(a.content_hash() == b.content_hash());
  CHECK_THROWS_AS(mix_training_data(real, synth, 0.0, 0.0, 1), DomainError);
  CHECK_THROWS_AS(mix_training_data(real, synth, -1.0, 1.0, 1), DomainError);
}

TEST_CASE("cell count formula") {
  GridSpec spec;
  spec.generators = {GeneratorMethod::gen2};
  CHECK(expected_cell_count(spec) == 20);
  spec.generators = {GeneratorMethod::gen1, GeneratorMethod::gen2, GeneratorMethod::gen3};
  CHECK(expected_cell_count(spec) == 56);
  spec.models = {ModelKind::dkt, ModelKind::bkt};
  CHECK(expected_cell_count(spec) == 112);
  spec.real_ratios = {1.0};
  spec.synth_ratios = {0.0};
  CHECK(expected_cell_count(spec) == 2);
}

TEST_CASE("GridSpec validation") {
  GridSpec spec;
  spec.real_ratios = {};
  CHECK_THROWS_AS(validate(spec), DomainError);
  spec = GridSpec{};
  spec.synth_ratios = {-1.0};
  CHECK_THROWS_AS(validate(spec), DomainError);
  spec = GridSpec{};
  spec.test_fraction = 1.0;
  CHECK_THROWS_AS(validate(spec), DomainError);
}

TEST_CASE("single baseline grid") {
  GridSpec spec = quick_spec();
  spec.real_ratios = {1.0};
  spec.synth_ratios = {0.0};
  const GridRun run = run_grid(small_fixture(), spec);
  REQUIRE(run.cells.size() == 1);
  CHECK(run.cells[0].ok());
  CHECK_FALSE(run.cells[0].generator.has_value());
  CHECK(run.train_paths + run.test_paths == small_fixture().n_students());
  CHECK_FALSE(run.gen1_fit.has_value());
}

TEST_CASE("one generator grid shape, shared test set and job independence") {
  GridSpec spec = quick_spec();
  spec.generators = {GeneratorMethod::gen3};
  spec.models = {ModelKind::bkt};
  const GridRun run = run_grid(small_fixture(), spec);
  REQUIRE(run.cells.size() == 20);
  std::set<std::uint64_t> hashes;
  std::set<std::size_t> counts;
  for (const auto& c : run.cells) {
    INFO(c.error);
    CHECK(c.ok());
    hashes.insert(c.test_hash);
    counts.insert(c.test_pairs);
    CHECK(c.acc >= 0.0);
    CHECK(c.acc <= 1.0);
    CHECK(c.mcc >= -1.0);
    CHECK(c.mcc <= 1.0);
  }
  CHECK(hashes.size() == 1);
  CHECK(counts.size() == 1);
  CHECK_FALSE(run.cells.front().generator.has_value());

  spec.jobs = 3;
  const GridRun parallel = run_grid(small_fixture(), spec);
  REQUIRE(parallel.cells.size() == run.cells.size());
  for (std::size_t i = 0; i < run.cells.size(); ++i) {
    CHECK(parallel.cells[i].mae == run.cells[i].mae);
    CHECK(parallel.cells[i].real_ratio == run.cells[i].real_ratio);
    CHECK(parallel.cells[i].synth_ratio == run.cells[i].synth_ratio);
  }
}

TEST_CASE("gen1 grid fits a distribution on the training grades") {
  GridSpec spec = quick_spec();
  spec.generators = {GeneratorMethod::gen1};
  spec.real_ratios = {0.0};
  spec.synth_ratios = {1.0};
  const GridRun run = run_grid(small_fixture(), spec);
  REQUIRE(run.cells.size() == 1);
  CHECK(run.cells[0].ok());
  REQUIRE(run.gen1_fit.has_value());
}

TEST_CASE("report files") {
  std::vector<GridCellResult> cells{cell(std::nullopt, 0.5, 0, 0.2), cell(std::nullopt, 1, 0, 0.15)};
  for (double r : {0.0, 0.5, 1.0}) {
    for (double s : {0.25, 0.5, 0.75, 1.0, 2.0, 3.0}) {
      cells.push_back(cell(GeneratorMethod::gen2, r, s, 0.1 + 0.01 * s + 0.001 * r));
    }
  }
  REQUIRE(cells.size() == 20);
  cells[5].error = "boom";

  const fs::path a = scratch("a"), b = scratch("b");
  emit_report(cells, a);
  emit_report(cells, b);

  const std::string results = slurp(a / "results.csv");
  CHECK(std::count(results.begin(), results.end(), '\n') == 21);
  CHECK(results.find("error: boom") != std::string::npos);
  CHECK(results.find("wall") == std::string::npos);
  for (const char* f : {"results.csv", "tables/dkt_mae_gen2.md", "tables/dkt_mcc_gen2.md",
                        "plots/dkt_mae.svg", "plots/dkt_acc.svg"}) {
    INFO(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(fs::exists(a / "timings.csv"));

  // 3 x 7 pivot with an empty (0, 0) cell and one bold entry per row.
  const std::string table = slurp(a / "tables/dkt_mae_gen2.md");
  std::vector<std::string> rows;
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("| ", 0) == 0 && line.find("real \\ synth") == std::string::npos) rows.push_back(line);
  }
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("| 0 | |", 0) == 0);
  for (const auto& r : rows) {
    CHECK(std::count(r.begin(), r.end(), '|') == 9);
    CHECK(r.find("**") != std::string::npos);
  }
  CHECK(rows[1].find("**0.103**") != std::string::npos);

  const std::string svg = slurp(a / "plots/dkt_mae.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);

  CHECK_THROWS_AS(emit_report({}, a), DomainError);
  const fs::path blocker = scratch("file");
  std::ofstream(blocker.string()) << "x";
  CHECK_THROWS_AS(emit_report(cells, blocker / "sub"), IoError);
}
