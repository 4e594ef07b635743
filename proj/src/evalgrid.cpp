#include "synthkt/evalgrid.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "synthkt/error.hpp"
#include "synthkt/metrics.hpp"
#include "synthkt/rng.hpp"

namespace synthkt {

std::string_view to_string(ModelKind model) { return model == ModelKind::dkt ? "dkt" : "bkt"; }

ModelKind parse_model(std::string_view text) {
  if (text == "dkt") return ModelKind::dkt;
  if (text == "bkt") return ModelKind::bkt;
  throw DomainError("unknown model '" + std::string(text) + "'");
}

std::string generator_label(const GridCellResult& cell) {
  return cell.generator ? std::string(to_string(*cell.generator)) : "none";
}

namespace {

// Shuffled prefix of paths whose interaction total is nearest to target.
std::vector<std::size_t> pick_paths(const Dataset& ds, double target, Rng& rng) {
  std::vector<std::size_t> order(ds.n_students());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  std::vector<std::size_t> chosen;
  double total = 0.0;
  for (std::size_t idx : order) {
    const auto len = static_cast<double>(ds.paths()[idx].size());
    if (std::abs(total + len - target) >= std::abs(total - target)) break;
    total += len;
    chosen.push_back(idx);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

Dataset mix_training_data(const Dataset& real_train, const Dataset& synth, double real_ratio,
                          double synth_ratio, std::uint64_t seed) {
  if (!(real_ratio >= 0.0) || !(synth_ratio >= 0.0)) {
    throw DomainError("mixing ratios must be non-negative");
  }
  if (real_ratio == 0.0 && synth_ratio == 0.0) {
    throw DomainError("empty training set: both real and synthetic ratios are 0");
  }
  const auto base = static_cast<double>(real_train.n_interactions());
  std::vector<LearningPath> paths;
  if (real_ratio >= 1.0) {
    paths = real_train.paths();
  } else if (real_ratio > 0.0) {
    Rng rng(mix_seed(seed, 1));
    for (std::size_t i : pick_paths(real_train, real_ratio * base, rng)) {
      paths.push_back(real_train.paths()[i]);
    }
  }
  const std::size_t n_real = paths.size();
  if (synth_ratio > 0.0 && !synth.empty()) {
    Rng rng(mix_seed(seed, 2));
    for (std::size_t i : pick_paths(synth, synth_ratio * base, rng)) paths.push_back(synth.paths()[i]);
  }
  if (paths.empty()) throw DomainError("mixing selected no learning paths");
  const Provenance tag = paths.size() > n_real ? synth.provenance() : real_train.provenance();
  return Dataset(std::move(paths), tag);
}

void validate(const GridSpec& spec) {
  auto non_negative = [](const std::vector<double>& v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](double r) { return r >= 0.0 && std::isfinite(r); });
  };
  if (!non_negative(spec.real_ratios) || !non_negative(spec.synth_ratios)) {
    throw DomainError("grid ratios must be non-empty lists of non-negative values");
  }
  if (spec.models.empty()) throw DomainError("grid needs at least one model");
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw DomainError("test_fraction must lie in (0, 1)");
  }
  if (!(spec.noise_sigma >= 0.0)) throw DomainError("noise_sigma must be non-negative");
  validate(spec.dkt);
}

std::size_t expected_cell_count(const GridSpec& spec) {
  const auto real_pos = static_cast<std::size_t>(
      std::count_if(spec.real_ratios.begin(), spec.real_ratios.end(), [](double r) { return r > 0.0; }));
  const auto synth_zero = static_cast<std::size_t>(
      std::count(spec.synth_ratios.begin(), spec.synth_ratios.end(), 0.0));
  const std::size_t synth_pos = spec.synth_ratios.size() - synth_zero;
  const std::size_t per_model =
      real_pos * synth_zero + spec.generators.size() * spec.real_ratios.size() * synth_pos;
  return per_model * spec.models.size();
}

namespace {

struct CellTask {
  GridCellResult cell;
  const Dataset* synth = nullptr;
};

std::uint64_t cell_seed(std::uint64_t run_seed, const GridCellResult& c) {
  char key[128];
  std::snprintf(key, sizeof key, "%s|%s|%.17g|%.17g", generator_label(c).c_str(),
                std::string(to_string(c.model)).c_str(), c.real_ratio, c.synth_ratio);
  return mix_seed(run_seed, stable_hash(key));
}

void run_cell(CellTask& task, const Dataset& train, const Dataset& test, const GridSpec& spec) {
  GridCellResult& cell = task.cell;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    static const Dataset kNoSynth;
    const Dataset& synth = task.synth != nullptr ? *task.synth : kNoSynth;
    const std::uint64_t seed = cell_seed(spec.seed, cell);
    const Dataset mixed = mix_training_data(train, synth, cell.real_ratio, cell.synth_ratio, seed);
    cell.train_interactions = mixed.n_interactions();
    std::vector<PredictionPair> pairs;
    if (cell.model == ModelKind::dkt) {
      DktConfig cfg = spec.dkt;
      cfg.seed = seed;
      TrainResult trained = synthkt::train(DktModel::initialized(cfg), mixed, cfg);
      pairs = predict_dataset(trained.model, test);
    } else {
      BktFitOptions opts = spec.bkt;
      opts.seed = seed;
      pairs = predict_dataset(fit_bkt(mixed, opts), test);
    }
    if (pairs.empty()) throw DomainError("test set has no predictable steps");
    cell.mae = mae(pairs);
    cell.acc = accuracy(pairs);
    cell.mcc = mcc(pairs);
    cell.test_pairs = pairs.size();
    cell.test_hash = actuals_hash(pairs);
  } catch (const std::exception& e) {
    cell.error = e.what();
    if (cell.error.empty()) cell.error = "unknown failure";
  }
  cell.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Dataset make_pool(const Dataset& train, GeneratorMethod method, const GridSpec& spec,
                  const FittedDistribution* fit, double needed) {
  GeneratorConfig cfg;
  cfg.method = method;
  cfg.noise_mu = spec.noise_mu;
  cfg.noise_sigma = spec.noise_sigma;
  cfg.clamp = spec.clamp;
  cfg.seed = mix_seed(spec.seed, 0x706f6f6c00ULL + static_cast<std::uint64_t>(method));
  const double mean_len =
      static_cast<double>(train.n_interactions()) / static_cast<double>(train.n_students());
  cfg.n_paths = static_cast<std::size_t>(std::ceil(1.1 * needed / mean_len)) + 1;
  for (;;) {
    Dataset pool = generate(train, cfg, fit);
    if (static_cast<double>(pool.n_interactions()) >= needed) return pool;
    cfg.n_paths += cfg.n_paths / 2 + 1;
  }
}

}  // namespace

GridRun run_grid(const Dataset& real, const GridSpec& spec) {
  validate(spec);
  if (real.empty()) throw DomainError("run_grid on an empty dataset");
  GridRun run;
  const SplitResult split = split_dataset(real, spec.test_fraction, spec.seed);
  run.train_paths = split.train.n_students();
  run.test_paths = split.test.n_students();
  run.train_interactions = split.train.n_interactions();
  run.test_interactions = split.test.n_interactions();

  const double max_synth = *std::max_element(spec.synth_ratios.begin(), spec.synth_ratios.end());
  const double needed = max_synth * static_cast<double>(split.train.n_interactions());

  std::map<GeneratorMethod, Dataset> pools;
  std::map<GeneratorMethod, std::string> pool_errors;
  if (max_synth > 0.0) {
    for (GeneratorMethod g : spec.generators) {
      try {
        if (g == GeneratorMethod::gen1 && !run.gen1_fit) {
          const auto grades = split.train.all_grades();
          run.gen1_fit = select_best_fit(grades, spec.gen1_families, spec.gen1_bins).ranked.front();
        }
        pools.emplace(g, make_pool(split.train, g, spec,
                                   g == GeneratorMethod::gen1 ? &*run.gen1_fit : nullptr, needed));
      } catch (const std::exception& e) {
        pool_errors[g] = e.what();
        run.notes.push_back(std::string(to_string(g)) + ": " + e.what());
      }
    }
  }

  std::vector<CellTask> tasks;
  for (ModelKind m : spec.models) {
    for (double r : spec.real_ratios) {
      for (double s : spec.synth_ratios) {
        if (s != 0.0 || r == 0.0) continue;
        CellTask t;
        t.cell.model = m;
        t.cell.real_ratio = r;
        t.cell.synth_ratio = 0.0;
        tasks.push_back(t);
      }
    }
    for (GeneratorMethod g : spec.generators) {
      for (double r : spec.real_ratios) {
        for (double s : spec.synth_ratios) {
          if (s == 0.0) continue;
          CellTask t;
          t.cell.generator = g;
          t.cell.model = m;
          t.cell.real_ratio = r;
          t.cell.synth_ratio = s;
          if (auto it = pools.find(g); it != pools.end()) {
            t.synth = &it->second;
          } else {
            t.cell.error = "synthetic pool unavailable: " + pool_errors[g];
          }
          tasks.push_back(t);
        }
      }
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      if (tasks[i].cell.ok()) run_cell(tasks[i], split.train, split.test, spec);
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(spec.jobs, 1, std::max<std::size_t>(1, tasks.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
  }

  run.cells.reserve(tasks.size());
  for (auto& t : tasks) run.cells.push_back(std::move(t.cell));
  std::stable_sort(run.cells.begin(), run.cells.end(),
                   [](const GridCellResult& a, const GridCellResult& b) {
                     auto key = [](const GridCellResult& c) {
                       const int g = c.generator ? static_cast<int>(*c.generator) + 1 : 0;
                       return std::tuple(g, static_cast<int>(c.model), c.real_ratio, c.synth_ratio);
                     };
                     return key(a) < key(b);
                   });
  return run;
}

// ---------------------------------------------------------------------------
// Report emission

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  return out;
}

enum class Metric { mae, acc, mcc };
constexpr std::array<Metric, 3> kMetrics = {Metric::mae, Metric::acc, Metric::mcc};

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::mae: return "mae";
    case Metric::acc: return "acc";
    case Metric::mcc: return "mcc";
  }
  return "?";
}

double metric_value(const GridCellResult& c, Metric m) {
  switch (m) {
    case Metric::mae: return c.mae;
    case Metric::acc: return c.acc;
    case Metric::mcc: return c.mcc;
  }
  return 0.0;
}

bool better(Metric m, double a, double b) { return m == Metric::mae ? a < b : a > b; }

// value lookup for one (model, generator) block, baselines included.
struct Block {
  std::vector<double> reals;
  std::vector<double> synths;
  std::map<std::pair<double, double>, const GridCellResult*> at;
};

Block make_block(const std::vector<GridCellResult>& cells, ModelKind model,
                 const std::optional<GeneratorMethod>& gen) {
  Block b;
  std::set<double> reals, synths;
  for (const auto& c : cells) {
    if (c.model != model) continue;
    const bool baseline = !c.generator.has_value();
    if (!baseline && c.generator != gen) continue;
    reals.insert(c.real_ratio);
    synths.insert(c.synth_ratio);
    b.at[{c.real_ratio, c.synth_ratio}] = &c;
  }
  b.reals.assign(reals.begin(), reals.end());
  b.synths.assign(synths.begin(), synths.end());
  return b;
}

void write_table(const std::filesystem::path& p, const Block& b, Metric metric,
                 const std::string& title) {
  auto out = open_out(p);
  out << "# " << title << "\n\n";
  out << "Rows: real data ratio. Columns: synthetic data ratio. Best value per row in bold.\n\n";
  out << "| real \\ synth |";
  for (double s : b.synths) out << ' ' << fmt("%g", s) << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < b.synths.size(); ++i) out << "---|";
  out << '\n';
  for (double r : b.reals) {
    std::optional<double> best;
    for (double s : b.synths) {
      auto it = b.at.find({r, s});
      if (it == b.at.end() || !it->second->ok()) continue;
      const double v = metric_value(*it->second, metric);
      if (!best || better(metric, v, *best)) best = v;
    }
    out << "| " << fmt("%g", r) << " |";
    for (double s : b.synths) {
      auto it = b.at.find({r, s});
      if (it == b.at.end()) {
        out << " |";
      } else if (!it->second->ok()) {
        out << " failed |";
      } else {
        const double v = metric_value(*it->second, metric);
        const std::string text = fmt("%.3f", v);
        out << ' ' << (best && v == *best ? "**" + text + "**" : text) << " |";
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + p.string() + "'");
}

constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                                 "#9467bd", "#ff7f0e", "#8c564b"};

void write_plot(const std::filesystem::path& p, const std::vector<GridCellResult>& cells,
                ModelKind model, Metric metric, const std::vector<GeneratorMethod>& gens) {
  constexpr double kPanelW = 300, kPanelH = 220, kMarginL = 55, kMarginT = 40, kGap = 30;
  const double width = kMarginL + static_cast<double>(gens.size()) * (kPanelW + kGap) + 110;
  const double height = kMarginT + kPanelH + 60;

  std::vector<Block> blocks;
  double lo = 1e300, hi = -1e300, xmax = 0.0;
  std::set<double> reals;
  for (GeneratorMethod g : gens) {
    blocks.push_back(make_block(cells, model, g));
    for (const auto& [key, c] : blocks.back().at) {
      if (!c->ok()) continue;
      lo = std::min(lo, metric_value(*c, metric));
      hi = std::max(hi, metric_value(*c, metric));
      xmax = std::max(xmax, key.second);
      reals.insert(key.first);
    }
  }
  if (lo > hi) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-9) lo -= 0.05, hi += 0.05;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  if (xmax <= 0.0) xmax = 1.0;

  auto out = open_out(p);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", width)
      << "\" height=\"" << fmt("%.0f", height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt("%.0f", width / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
      << to_string(model) << ": " << metric_name(metric) << " vs synthetic data ratio</text>\n";
  for (std::size_t gi = 0; gi < gens.size(); ++gi) {
    const double x0 = kMarginL + static_cast<double>(gi) * (kPanelW + kGap);
    const double y0 = kMarginT;
    auto px = [&](double s) { return x0 + s / xmax * kPanelW; };
    auto py = [&](double v) { return y0 + kPanelH - (v - lo) / (hi - lo) * kPanelH; };
    out << "<g>\n<rect x=\"" << fmt("%.1f", x0) << "\" y=\"" << fmt("%.1f", y0) << "\" width=\""
        << fmt("%.0f", kPanelW) << "\" height=\"" << fmt("%.0f", kPanelH)
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << fmt("%.1f", x0 + kPanelW / 2) << "\" y=\"" << fmt("%.1f", y0 - 6)
        << "\" text-anchor=\"middle\">" << to_string(gens[gi]) << "</text>\n";
    for (double s : blocks[gi].synths) {
      out << "<text x=\"" << fmt("%.1f", px(s)) << "\" y=\"" << fmt("%.1f", y0 + kPanelH + 14)
          << "\" text-anchor=\"middle\">" << fmt("%g", s) << "</text>\n";
    }
    for (int k = 0; k <= 4; ++k) {
      const double v = lo + (hi - lo) * k / 4.0;
      out << "<text x=\"" << fmt("%.1f", x0 - 4) << "\" y=\"" << fmt("%.1f", py(v) + 4)
          << "\" text-anchor=\"end\">" << fmt("%.3f", v) << "</text>\n";
    }
    std::size_t ri = 0;
    for (double r : reals) {
      std::string points;
      for (double s : blocks[gi].synths) {
        auto it = blocks[gi].at.find({r, s});
        if (it == blocks[gi].at.end() || !it->second->ok()) continue;
        points += fmt("%.2f", px(s)) + "," + fmt("%.2f", py(metric_value(*it->second, metric))) + " ";
      }
      if (!points.empty()) {
        points.pop_back();
        out << "<polyline fill=\"none\" stroke-width=\"1.8\" stroke=\"" << kPalette[ri % kPalette.size()]
            << "\" points=\"" << points << "\"/>\n";
      }
      ++ri;
    }
    out << "</g>\n";
  }
  std::size_t ri = 0;
  const double lx = width - 100;
  for (double r : reals) {
    const double ly = kMarginT + 14.0 * static_cast<double>(ri);
    out << "<line x1=\"" << fmt("%.0f", lx) << "\" y1=\"" << fmt("%.0f", ly) << "\" x2=\""
        << fmt("%.0f", lx + 18) << "\" y2=\"" << fmt("%.0f", ly) << "\" stroke-width=\"2\" stroke=\""
        << kPalette[ri % kPalette.size()] << "\"/>\n";
    out << "<text x=\"" << fmt("%.0f", lx + 22) << "\" y=\"" << fmt("%.0f", ly + 4) << "\">real "
        << fmt("%g", r) << "</text>\n";
    ++ri;
  }
  out << "<text x=\"" << fmt("%.0f", kMarginL + (width - kMarginL - 110) / 2) << "\" y=\""
      << fmt("%.0f", height - 12) << "\" text-anchor=\"middle\">synthetic data ratio</text>\n";
  out << "</svg>\n";
  if (!out) throw IoError("failed writing '" + p.string() + "'");
}

}  // namespace

void emit_report(const std::vector<GridCellResult>& cells, const std::filesystem::path& out_dir) {
  if (cells.empty()) throw DomainError("emit_report needs at least one result");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "tables", ec);
  if (!ec) fs::create_directories(out_dir / "plots", ec);
  if (ec) throw IoError("cannot create report directory '" + out_dir.string() + "': " + ec.message());

  {
    auto out = open_out(out_dir / "results.csv");
    out << "generator,model,real_ratio,synth_ratio,mae,acc,mcc,train_interactions,test_pairs,"
           "test_hash,status\n";
    for (const auto& c : cells) {
      out << generator_label(c) << ',' << to_string(c.model) << ',' << fmt("%g", c.real_ratio) << ','
          << fmt("%g", c.synth_ratio) << ',';
      if (c.ok()) {
        out << fmt("%.10g", c.mae) << ',' << fmt("%.10g", c.acc) << ',' << fmt("%.10g", c.mcc);
      } else {
        out << ",,";
      }
      char hash[32];
      std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(c.test_hash));
      out << ',' << c.train_interactions << ',' << c.test_pairs << ',' << hash << ','
          << csv::escape_field(c.ok() ? "ok" : "error: " + c.error, ',') << '\n';
    }
    if (!out) throw IoError("failed writing results.csv");
  }
  {
    auto out = open_out(out_dir / "timings.csv");
    out << "generator,model,real_ratio,synth_ratio,wall_seconds\n";
    for (const auto& c : cells) {
      out << generator_label(c) << ',' << to_string(c.model) << ',' << fmt("%g", c.real_ratio) << ','
          << fmt("%g", c.synth_ratio) << ',' << fmt("%.3f", c.wall_seconds) << '\n';
    }
  }

  std::set<ModelKind> models;
  std::set<GeneratorMethod> gen_set;
  for (const auto& c : cells) {
    models.insert(c.model);
    if (c.generator) gen_set.insert(*c.generator);
  }
  const std::vector<GeneratorMethod> gens(gen_set.begin(), gen_set.end());
  for (ModelKind m : models) {
    for (Metric metric : kMetrics) {
      if (gens.empty()) {
        const Block b = make_block(cells, m, std::nullopt);
        write_table(out_dir / "tables" /
                        (std::string(to_string(m)) + "_" + metric_name(metric) + "_none.md"),
                    b, metric, std::string(to_string(m)) + " " + metric_name(metric) + " (real only)");
        continue;
      }
      for (GeneratorMethod g : gens) {
        const Block b = make_block(cells, m, g);
        const std::string stem =
            std::string(to_string(m)) + "_" + metric_name(metric) + "_" + std::string(to_string(g));
        write_table(out_dir / "tables" / (stem + ".md"), b, metric,
                    std::string(to_string(m)) + " " + metric_name(metric) + ", " +
                        std::string(to_string(g)));
      }
      write_plot(out_dir / "plots" / (std::string(to_string(m)) + "_" + metric_name(metric) + ".svg"),
                 cells, m, metric, gens);
    }
  }
}

}  // namespace synthkt
