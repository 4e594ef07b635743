// Command-line front end: stats, fit, generate, train, grid and fixture.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "synthkt/bkt.hpp"
#include "synthkt/dataset.hpp"
#include "synthkt/distributions.hpp"
#include "synthkt/dkt.hpp"
#include "synthkt/error.hpp"
#include "synthkt/evalgrid.hpp"
#include "synthkt/generators.hpp"
#include "synthkt/metrics.hpp"
#include "synthkt/serialize.hpp"
#include "synthkt/version.hpp"

namespace fs = std::filesystem;
using namespace synthkt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitFit = 3;
constexpr int kExitGrid = 4;
constexpr std::uint64_t kDefaultSeed = 20240501;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InputOptions {
  std::string input;
  std::string schema = "generic";
  std::string schema_file;
};

struct Common {
  std::vector<std::string> argv;
  std::string out;
  std::uint64_t seed = kDefaultSeed;
};

fs::path output_dir(const Common& common, const std::string& command) {
  if (!common.out.empty()) return common.out;
  const char* root = std::getenv("SYNTHKT_OUT_ROOT");
  return fs::path(root != nullptr && *root != '\0' ? root : "synthkt_runs") / command;
}

void make_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

SchemaMap resolve_schema(const InputOptions& in) {
  if (!in.schema_file.empty()) return schema_from_json(read_json_file(in.schema_file));
  return schema_preset(in.schema);
}

Dataset load_input(const InputOptions& in) {
  if (in.input.empty()) throw UsageError("--input is required");
  IngestResult result = ingest_file(in.input, resolve_schema(in));
  if (!result.rejected.empty()) {
    std::cerr << "warning: " << result.rejected.size() << " row(s) rejected";
    const auto& first = result.rejected.front();
    std::cerr << " (first: row " << first.row << ": " << first.message << ")\n";
  }
  return std::move(result.dataset);
}

Json metadata(const Common& common, const std::string& command, Json options) {
  return Json{{"tool", "synthkt"},
              {"version", kVersion},
              {"command", command},
              {"seed", common.seed},
              {"argv", common.argv},
              {"options", std::move(options)}};
}

Json input_json(const InputOptions& in, const Dataset& ds) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(ds.content_hash()));
  Json j{{"path", in.input}, {"content_hash", hash}};
  if (in.schema_file.empty()) {
    j["schema"] = in.schema;
  } else {
    j["schema_file"] = in.schema_file;
  }
  return j;
}

Json counts_json(const Dataset& ds) {
  return Json{{"students", ds.n_students()},
              {"exercises", ds.n_exercises()},
              {"skills", ds.skill_index().size()},
              {"interactions", ds.n_interactions()}};
}

void print_stats(const char* label, const StatsSummary& s) {
  std::printf("%-10s n=%zu mean=%.2f median=%.2f std=%.2f q1=%.2f q3=%.2f min=%.2f max=%.2f\n",
              label, s.count, s.mean, s.median, s.std, s.q1, s.q3, s.min, s.max);
}

// ---------------------------------------------------------------------------

int cmd_stats(const Common& common, const InputOptions& in) {
  const Dataset ds = load_input(in);
  const auto grades = ds.all_grades();
  const StatsSummary s = descriptive_stats(grades);
  std::printf("students=%zu exercises=%zu skills=%zu interactions=%zu\n", ds.n_students(),
              ds.n_exercises(), ds.skill_index().size(), ds.n_interactions());
  print_stats("grades", s);

  const fs::path dir = output_dir(common, "stats");
  make_output_dir(dir);
  write_json_file(dir / "stats.json", Json{{"counts", counts_json(ds)}, {"grades", to_json(s)}});
  write_json_file(dir / "metadata.json",
                  metadata(common, "stats", Json{{"input", input_json(in, ds)}}));
  return kExitOk;
}

int cmd_fit(const Common& common, const InputOptions& in, const std::vector<std::string>& family_names,
            std::size_t bins) {
  std::vector<FamilyKind> families;
  for (const auto& name : family_names) families.push_back(parse_family(name));
  if (families.empty()) families.assign(kAllFamilies.begin(), kAllFamilies.end());
  if (bins == 0) throw UsageError("--bins must be positive");

  const Dataset ds = load_input(in);
  const auto grades = ds.all_grades();
  const BestFitResult result = select_best_fit(grades, families, bins);

  std::printf("used %zu grades (%zu boundary values excluded)\n", result.n_used, result.n_excluded);
  for (const auto& fit : result.ranked) {
    std::printf("%-11s rss=%.6g  ", std::string(to_string(fit.family)).c_str(), fit.rss_score);
    const auto names = param_names(fit.family);
    for (std::size_t i = 0; i < fit.params.size(); ++i) {
      std::printf(" %s=%.4f", std::string(names[i]).c_str(), fit.params[i]);
    }
    std::printf("\n");
  }
  for (const auto& f : result.failures) {
    std::printf("%-11s failed: %s\n", std::string(to_string(f.family)).c_str(), f.reason.c_str());
  }

  const fs::path dir = output_dir(common, "fit");
  make_output_dir(dir);
  write_json_file(dir / "fits.json", fit_document(result));
  write_json_file(dir / "metadata.json",
                  metadata(common, "fit",
                           Json{{"input", input_json(in, ds)}, {"families", family_names},
                                {"bins", bins}}));
  return kExitOk;
}

struct GenerateOptions {
  std::string method;
  std::optional<std::size_t> n_paths;
  double ratio = 1.0;
  double mu = 0.0;
  double sigma = 3.0;
  bool no_clamp = false;
  std::string fits;
};

int cmd_generate(const Common& common, const InputOptions& in, const GenerateOptions& opt) {
  GeneratorConfig cfg;
  cfg.method = parse_generator(opt.method);
  cfg.noise_mu = opt.mu;
  cfg.noise_sigma = opt.sigma;
  cfg.clamp = !opt.no_clamp;
  cfg.seed = common.seed;
  if (!(opt.ratio > 0.0)) throw UsageError("--ratio must be positive");

  const Dataset real = load_input(in);
  cfg.n_paths = opt.n_paths.value_or(static_cast<std::size_t>(
      std::max(1.0, std::round(opt.ratio * static_cast<double>(real.n_students())))));

  std::optional<FittedDistribution> fit;
  if (cfg.method == GeneratorMethod::gen1) {
    if (!opt.fits.empty()) {
      fit = read_fit_document(read_json_file(opt.fits)).front();
    } else {
      const auto grades = real.all_grades();
      fit = select_best_fit(grades, kAllFamilies).ranked.front();
    }
    std::printf("gen1 distribution: %s\n", to_json(*fit).dump().c_str());
  }
  const Dataset synth = generate(real, cfg, fit ? &*fit : nullptr);

  const auto real_grades = real.all_grades();
  const auto synth_grades = synth.all_grades();
  const StatsSummary rs = descriptive_stats(real_grades);
  const StatsSummary ss = descriptive_stats(synth_grades);
  std::printf("generated %zu paths, %zu interactions\n", synth.n_students(), synth.n_interactions());
  print_stats("real", rs);
  print_stats("synthetic", ss);
  std::printf("delta      mean=%+.3f median=%+.3f std=%+.3f\n", ss.mean - rs.mean, ss.median - rs.median,
              ss.std - rs.std);

  const fs::path dir = output_dir(common, "generate");
  make_output_dir(dir);
  write_dataset_file((dir / "synthetic.csv").string(), synth);
  Json fidelity{{"real", to_json(rs)},
                {"synthetic", to_json(ss)},
                {"delta", {{"mean", ss.mean - rs.mean}, {"median", ss.median - rs.median}, {"std", ss.std - rs.std}}},
                {"counts", counts_json(synth)}};
  write_json_file(dir / "fidelity.json", fidelity);
  Json options{{"input", input_json(in, real)},
               {"method", opt.method},
               {"n_paths", cfg.n_paths},
               {"noise_mu", cfg.noise_mu},
               {"noise_sigma", cfg.noise_sigma},
               {"clamp", cfg.clamp}};
  if (fit) options["distribution"] = to_json(*fit);
  write_json_file(dir / "metadata.json", metadata(common, "generate", options));
  return kExitOk;
}

struct TrainOptions {
  std::string model = "dkt";
  double test_fraction = 0.2;
  DktConfig dkt;
  BktFitOptions bkt;
};

int cmd_train(const Common& common, const InputOptions& in, TrainOptions opt) {
  const ModelKind kind = parse_model(opt.model);
  opt.dkt.seed = common.seed;
  opt.bkt.seed = common.seed;
  if (kind == ModelKind::dkt) validate(opt.dkt);

  const Dataset ds = load_input(in);
  if (ds.n_students() < 2) throw UsageError("training needs at least two learning paths");
  const SplitResult split = split_dataset(ds, opt.test_fraction, common.seed);

  const fs::path dir = output_dir(common, "train");
  std::vector<PredictionPair> pairs;
  Json options{{"input", input_json(in, ds)}, {"model", opt.model}, {"test_fraction", opt.test_fraction}};
  Json extra = Json::object();
  if (kind == ModelKind::dkt) {
    TrainResult trained = train(DktModel::initialized(opt.dkt), split.train, opt.dkt);
    for (std::size_t e = 0; e < trained.report.epoch_losses.size(); ++e) {
      std::printf("epoch %zu loss %.6f\n", e + 1, trained.report.epoch_losses[e]);
    }
    pairs = predict_dataset(trained.model, split.test);
    make_output_dir(dir);
    save_model_file((dir / "dkt_model.bin").string(), trained.model);
    options["dkt"] = to_json(opt.dkt);
    extra["epoch_losses"] = trained.report.epoch_losses;
  } else {
    const BktModel model = fit_bkt(split.train, opt.bkt);
    std::printf("fitted %zu skill model(s)\n", model.skills.size());
    pairs = predict_dataset(model, split.test);
    make_output_dir(dir);
    write_json_file(dir / "bkt_params.json", to_json(model));
    options["bkt"] = Json{{"max_iters", opt.bkt.max_iters}, {"tol", opt.bkt.tol},
                          {"restarts", opt.bkt.restarts}};
  }
  if (pairs.empty()) throw DomainError("test split has no predictable steps");
  const double m_mae = mae(pairs), m_acc = accuracy(pairs), m_mcc = mcc(pairs);
  std::printf("test pairs=%zu mae=%.4f acc=%.4f mcc=%.4f\n", pairs.size(), m_mae, m_acc, m_mcc);
  Json metrics{{"test_pairs", pairs.size()}, {"mae", m_mae}, {"acc", m_acc}, {"mcc", m_mcc}};
  for (auto& [k, v] : extra.items()) metrics[k] = v;
  write_json_file(dir / "metrics.json", metrics);
  write_json_file(dir / "metadata.json", metadata(common, "train", options));
  return kExitOk;
}

struct GridOptions {
  std::string config;
  std::string model;
  std::string method;
  std::optional<double> sigma;
  std::optional<std::size_t> epochs;
  std::size_t jobs = 1;
  bool seed_given = false;
};

int cmd_grid(Common common, const InputOptions& in, const GridOptions& opt) {
  GridSpec spec;
  spec.seed = common.seed;
  if (!opt.config.empty()) {
    spec = grid_spec_from_json(read_json_file(opt.config), spec);
    if (opt.seed_given) {
      spec.seed = common.seed;
    } else {
      common.seed = spec.seed;
    }
  }
  if (!opt.model.empty()) spec.models = {parse_model(opt.model)};
  if (!opt.method.empty()) spec.generators = {parse_generator(opt.method)};
  if (opt.sigma) spec.noise_sigma = *opt.sigma;
  if (opt.epochs) spec.dkt.epochs = *opt.epochs;
  spec.jobs = opt.jobs;
  validate(spec);

  const Dataset real = load_input(in);
  std::printf("running %zu cells\n", expected_cell_count(spec));
  const GridRun run = run_grid(real, spec);
  for (const auto& note : run.notes) std::fprintf(stderr, "note: %s\n", note.c_str());

  const fs::path dir = output_dir(common, "grid");
  make_output_dir(dir);
  emit_report(run.cells, dir);
  Json meta = metadata(common, "grid", Json{{"input", input_json(in, real)}, {"spec", to_json(spec)}});
  meta["split"] = Json{{"train_paths", run.train_paths},
                       {"test_paths", run.test_paths},
                       {"train_interactions", run.train_interactions},
                       {"test_interactions", run.test_interactions}};
  if (run.gen1_fit) meta["gen1_distribution"] = to_json(*run.gen1_fit);
  write_json_file(dir / "metadata.json", meta);

  std::size_t ok = 0;
  for (const auto& c : run.cells) {
    if (c.ok()) {
      ++ok;
    } else {
      std::fprintf(stderr, "cell %s/%s real=%g synth=%g failed: %s\n", generator_label(c).c_str(),
                   std::string(to_string(c.model)).c_str(), c.real_ratio, c.synth_ratio, c.error.c_str());
    }
  }
  std::printf("%zu of %zu cells succeeded; results in %s\n", ok, run.cells.size(), dir.string().c_str());
  return ok > 0 ? kExitOk : kExitGrid;
}

int cmd_fixture(const Common& common, FixtureConfig cfg) {
  cfg.seed = common.seed;
  const Dataset ds = make_fixture(cfg);
  const fs::path dir = output_dir(common, "fixture");
  make_output_dir(dir);
  write_dataset_file((dir / "fixture.csv").string(), ds);
  Json options{{"n_students", cfg.n_students},
               {"min_length", cfg.min_length},
               {"max_length", cfg.max_length},
               {"n_skills", cfg.n_skills},
               {"exercises_per_skill", cfg.exercises_per_skill},
               {"mastery_gain", cfg.mastery_gain},
               {"known_mean", cfg.base_known_mean},
               {"unknown_mean", cfg.base_unknown_mean},
               {"noise", cfg.observation_noise_std}};
  write_json_file(dir / "metadata.json", metadata(common, "fixture", options));
  std::printf("wrote %zu paths, %zu interactions to %s\n", ds.n_students(), ds.n_interactions(),
              (dir / "fixture.csv").string().c_str());
  return kExitOk;
}

void add_input_options(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--input", in.input, "Interaction table (CSV)")->required();
  cmd->add_option("--schema", in.schema, "Column preset")
      ->check(CLI::IsMember({"oulad", "slp", "generic"}))
      ->capture_default_str();
  cmd->add_option("--schema-file", in.schema_file, "JSON column mapping (overrides --schema)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic learning-path generation and knowledge-tracing benchmarks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  common.argv.assign(argv, argv + argc);
  InputOptions in;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", common.seed, "Global random seed")->capture_default_str();
    cmd->add_option("--out", common.out,
                    "Output directory (default: $SYNTHKT_OUT_ROOT/<command>, else synthkt_runs/<command>)");
  };

  auto* stats = app.add_subcommand("stats", "Dataset counts and grade statistics");
  add_input_options(stats, in);
  add_common(stats);

  std::vector<std::string> families;
  std::size_t bins = 50;
  auto* fit = app.add_subcommand("fit", "Rank parametric grade distributions");
  add_input_options(fit, in);
  add_common(fit);
  fit->add_option("--families", families, "Families to try (default: all)")->delimiter(',');
  fit->add_option("--bins", bins, "Histogram bins for ranking")->capture_default_str();

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
  add_input_options(generate, in);
  add_common(generate);
  generate->add_option("--method", gen.method, "gen1, gen2 or gen3")->required();
  auto* n_paths_opt = generate->add_option_function<std::size_t>(
      "--n-paths", [&](std::size_t n) { gen.n_paths = n; }, "Number of synthetic paths");
  generate->add_option("--ratio", gen.ratio, "Synthetic paths per real path")
      ->capture_default_str()
      ->excludes(n_paths_opt);
  generate->add_option("--mu", gen.mu, "Noise mean (gen2, gen3)")->capture_default_str();
  generate->add_option("--sigma", gen.sigma, "Noise standard deviation (gen2, gen3)")->capture_default_str();
  generate->add_flag("--no-clamp", gen.no_clamp, "Keep noisy grades outside [0, 100]");
  generate->add_option("--fits", gen.fits, "Fit document for gen1 (default: fit the input)");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train and evaluate one model on a split");
  add_input_options(train_cmd, in);
  add_common(train_cmd);
  train_cmd->add_option("--model", tr.model, "dkt or bkt")->capture_default_str();
  train_cmd->add_option("--test-fraction", tr.test_fraction)->capture_default_str();
  train_cmd->add_option("--epochs", tr.dkt.epochs)->capture_default_str();
  train_cmd->add_option("--hidden", tr.dkt.hidden_size)->capture_default_str();
  train_cmd->add_option("--buckets", tr.dkt.input_buckets)->capture_default_str();
  train_cmd->add_option("--lr", tr.dkt.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch", tr.dkt.batch_size)->capture_default_str();
  train_cmd->add_option("--bptt", tr.dkt.bptt_limit)->capture_default_str();
  train_cmd->add_option("--em-iters", tr.bkt.max_iters)->capture_default_str();

  GridOptions grid_opt;
  auto* grid = app.add_subcommand("grid", "Run the real/synthetic ratio grid");
  add_input_options(grid, in);
  add_common(grid);
  grid->add_option("--config", grid_opt.config, "Grid config (JSON)");
  grid->add_option("--model", grid_opt.model, "Restrict to one model (dkt or bkt)");
  grid->add_option("--method", grid_opt.method, "Restrict to one generator");
  grid->add_option_function<double>("--sigma", [&](double s) { grid_opt.sigma = s; }, "Noise sigma");
  grid->add_option_function<std::size_t>("--epochs", [&](std::size_t e) { grid_opt.epochs = e; },
                                         "DKT epochs");
  grid->add_option("--jobs", grid_opt.jobs, "Concurrent cells")->capture_default_str()->check(
      CLI::PositiveNumber);

  FixtureConfig fx;
  auto* fixture = app.add_subcommand("fixture", "Write the planted two-state fixture dataset");
  add_common(fixture);
  fixture->add_option("--students", fx.n_students)->capture_default_str();
  fixture->add_option("--min-length", fx.min_length)->capture_default_str();
  fixture->add_option("--max-length", fx.max_length)->capture_default_str();
  fixture->add_option("--skills", fx.n_skills)->capture_default_str();
  fixture->add_option("--mastery-gain", fx.mastery_gain)->capture_default_str();
  fixture->add_option("--known-mean", fx.base_known_mean)->capture_default_str();
  fixture->add_option("--unknown-mean", fx.base_unknown_mean)->capture_default_str();
  fixture->add_option("--noise", fx.observation_noise_std)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*stats) return cmd_stats(common, in);
    if (*fit) return cmd_fit(common, in, families, bins);
    if (*generate) return cmd_generate(common, in, gen);
    if (*train_cmd) return cmd_train(common, in, tr);
    if (*grid) {
      grid_opt.seed_given = grid->count("--seed") > 0;
      return cmd_grid(common, in, grid_opt);
    }
    if (*fixture) return cmd_fixture(common, fx);
  } catch (const FitError& e) {
    std::cerr << "fit failed: " << e.what() << '\n';
    return kExitFit;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const EmptyDatasetError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
