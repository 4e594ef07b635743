// Acceptance checks 1-8. Prints one PASS/FAIL line per criterion with the
// measured values and exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "synthkt/bkt.hpp"
#include "synthkt/distributions.hpp"
#include "synthkt/dkt.hpp"
#include "synthkt/evalgrid.hpp"
#include "synthkt/generators.hpp"
#include "synthkt/metrics.hpp"
#include "synthkt/rng.hpp"

using namespace synthkt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "[x] ") + what;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

int failures = 0;

void run(int id, const char* title, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.require(secs < budget_seconds, fmt("runtime %.1fs (budget %.0fs)", secs, budget_seconds));
  if (!out.pass) ++failures;
  std::printf("%s criterion %d: %s | %s\n", out.pass ? "PASS" : "FAIL", id, title, out.detail.c_str());
  std::fflush(stdout);
}

const Dataset& fixture() {
  static const Dataset ds = make_fixture(FixtureConfig{});
  return ds;
}

BktParams random_bkt(Rng& rng) {
  auto u = [&] { return 0.02 + 0.96 * rng.uniform(); };
  return {u(), u(), u(), u(), u()};
}

std::vector<std::vector<int>> simulate_bkt(const BktParams& p, std::size_t n, std::size_t len, Rng& rng) {
  std::vector<std::vector<int>> out(n);
  for (auto& seq : out) {
    int known = rng.uniform() < p.prior ? 1 : 0;
    for (std::size_t t = 0; t < len; ++t) {
      seq.push_back(rng.uniform() < (known ? 1.0 - p.slip : p.guess) ? 1 : 0);
      known = known ? (rng.uniform() < p.forget ? 0 : 1) : (rng.uniform() < p.learn ? 1 : 0);
    }
  }
  return out;
}

LearningPath random_path(Rng& rng, std::size_t length, const std::string& id) {
  LearningPath p{id, {}};
  for (std::size_t t = 0; t < length; ++t) {
    p.steps.push_back({"ex" + std::to_string(rng.index(6)), "", 100.0 * rng.uniform()});
  }
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion1() {
  Outcome o;
  Rng rng(101);
  const auto truth = make_distribution(FamilyKind::loggamma, {0.5, 89.02, 8.20});
  const auto data = sample(truth, 200000, rng);
  const auto r = select_best_fit(data, kAllFamilies, 50);
  const auto& best = r.ranked.front();
  o.require(best.family == FamilyKind::loggamma, "top family " + std::string(to_string(best.family)));
  if (best.family == FamilyKind::loggamma) {
    o.require(std::fabs(best.params[0] - 0.5) <= 0.05, fmt("c=%.4f", best.params[0]));
    o.require(std::fabs(best.params[1] - 89.02) <= 1.0, fmt("loc=%.3f", best.params[1]));
    o.require(std::fabs(best.params[2] - 8.20) <= 0.5, fmt("scale=%.3f", best.params[2]));
  }
  return o;
}

Outcome criterion2() {
  Outcome o;
  const auto fit = make_distribution(FamilyKind::loggamma, {0.5, 89.02, 8.20});
  GeneratorConfig cfg;
  cfg.method = GeneratorMethod::gen1;
  cfg.seed = 202;
  cfg.n_paths = 1;
  std::vector<double> grades;
  // Enough fixture skeletons for 10^5 grades.
  cfg.n_paths = 100000 / 30 + 200;
  const Dataset out = generate_gen1(fit, fixture(), cfg);
  grades = out.all_grades();
  if (grades.size() < 100000) throw std::runtime_error("too few generated grades");
  grades.resize(100000);
  const auto s = oracle::plain_stats(grades);
  o.require(std::fabs(s.mean - 73.14) <= 1.0, fmt("mean=%.3f", s.mean));
  o.require(std::fabs(s.std - 17.67) <= 1.5, fmt("std=%.3f", s.std));
  return o;
}

Outcome criterion3() {
  Outcome o;
  const auto real = oracle::plain_stats(fixture().all_grades());
  for (auto m : {GeneratorMethod::gen2, GeneratorMethod::gen3}) {
    GeneratorConfig cfg;
    cfg.method = m;
    cfg.n_paths = fixture().n_students();
    cfg.seed = 303;
    const auto s = oracle::plain_stats(generate(fixture(), cfg).all_grades());
    const std::string name(to_string(m));
    o.require(std::fabs(s.mean - real.mean) < 2.0, name + fmt(" dmean=%+.3f", s.mean - real.mean));
    o.require(std::fabs(s.std - real.std) < 2.0, name + fmt(" dstd=%+.3f", s.std - real.std));
  }
  GeneratorConfig cfg;
  cfg.method = GeneratorMethod::gen3;
  cfg.noise_sigma = 0.0;
  cfg.n_paths = 1000;
  cfg.seed = 304;
  std::set<std::vector<double>> sources;
  for (const auto& p : fixture().paths()) sources.insert(p.grades());
  std::size_t exact = 0;
  const Dataset copy = generate_gen3(fixture(), cfg);
  for (const auto& p : copy.paths()) exact += sources.contains(p.grades()) ? 1 : 0;
  o.require(exact == copy.n_students(), fmt("gen3 sigma=0 exact copies %.0f/%.0f", static_cast<double>(exact),
                                            static_cast<double>(copy.n_students())));
  return o;
}

Outcome criterion4() {
  Outcome o;
  Rng rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const BktParams p = random_bkt(rng);
    std::vector<int> obs(1 + rng.index(8));
    for (int& x : obs) x = rng.uniform() < 0.5 ? 1 : 0;
    worst = std::max(worst, std::fabs(forward_backward(p, obs).log_likelihood -
                                      oracle::enumerate_log_likelihood(p, obs)));
  }
  o.require(worst < 1e-9, fmt("enumeration max diff %.2e", worst));

  double worst_drop = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto seqs = simulate_bkt(random_bkt(rng), 40, 2 + rng.index(12), rng);
    const SkillModel m = em_fit(seqs, random_bkt(rng), 100, 0.0);
    for (std::size_t i = 1; i < m.ll_history.size(); ++i) {
      worst_drop = std::max(worst_drop, m.ll_history[i - 1] - m.ll_history[i]);
    }
  }
  o.require(worst_drop <= 1e-10, fmt("EM max decrease %.2e", worst_drop));

  const BktParams truth{0.2, 0.15, 0.05, 0.2, 0.1};
  const auto seqs = simulate_bkt(truth, 5000, 20, rng);
  BktFitOptions opts;
  opts.max_iters = 1000;
  opts.tol = 1e-8;
  opts.seed = 405;
  const BktParams got = fit_skill(seqs, opts).params;
  const double dev = std::max({std::fabs(got.prior - truth.prior), std::fabs(got.learn - truth.learn),
                               std::fabs(got.forget - truth.forget), std::fabs(got.guess - truth.guess),
                               std::fabs(got.slip - truth.slip)});
  o.require(dev <= 0.05, fmt("planted recovery max abs error %.4f", dev));
  return o;
}

Outcome criterion5() {
  Outcome o;
  Rng rng(505);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    DktModel m(8, 6);
    for (double& w : m.parameters()) w = 0.5 * (2.0 * rng.uniform() - 1.0);
    const std::vector<LearningPath> batch{random_path(rng, 5, "p")};
    worst = std::max(worst, gradient_check(m, batch, 1e-5));
  }
  o.require(worst < 1e-4, fmt("gradient max rel error %.2e", worst));

  std::vector<LearningPath> paths;
  for (int i = 0; i < 4; ++i) paths.push_back(random_path(rng, 6, "m" + std::to_string(i)));
  const Dataset ds(paths, Provenance::real);
  DktConfig cfg;
  cfg.hidden_size = 16;
  cfg.input_buckets = 8;
  cfg.epochs = 500;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-2;
  cfg.seed = 506;
  const DktModel init = DktModel::initialized(cfg);
  const double before = batch_loss(init, ds.paths(), cfg.bptt_limit);
  const double after = batch_loss(train(init, ds, cfg).model, ds.paths(), cfg.bptt_limit);
  o.require(after < 0.1 * before, fmt("memorisation loss %.5f -> %.5f", before, after));
  return o;
}

Outcome criterion6() {
  Outcome o;
  Rng rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<PredictionPair> v(1 + rng.index(300));
    for (auto& p : v) p = {rng.uniform(), rng.uniform()};
    worst = std::max({worst, std::fabs(mae(v) - oracle::brute_mae(v)),
                      std::fabs(accuracy(v) - oracle::brute_accuracy(v)),
                      std::fabs(mcc(v) - oracle::brute_mcc(v))});
  }
  o.require(worst < 1e-12, fmt("max oracle diff %.2e", worst));
  std::vector<PredictionPair> single, perfect;
  for (int i = 0; i < 50; ++i) {
    single.push_back({0.7, rng.uniform()});
    const double a = rng.uniform();
    perfect.push_back({a > 0.5 ? 0.9 : 0.1, a});
  }
  o.require(mcc(single) == 0.0, fmt("single-class mcc %.3g", mcc(single)));
  o.require(std::fabs(mcc(perfect) - 1.0) < 1e-12, fmt("perfect mcc %.15g", mcc(perfect)));
  return o;
}

Outcome criterion7() {
  Outcome o;
  GridSpec spec;
  spec.seed = 707;
  spec.dkt.epochs = 3;
  const GridRun first = run_grid(fixture(), spec);
  std::size_t baselines = 0, failed = 0;
  std::map<std::string, std::size_t> per_gen;
  std::set<std::uint64_t> hashes;
  for (const auto& c : first.cells) {
    if (!c.generator) ++baselines;
    else ++per_gen[generator_label(c)];
    if (!c.ok()) ++failed;
    hashes.insert(c.test_hash);
  }
  o.require(baselines == 2, fmt("baselines=%.0f", static_cast<double>(baselines)));
  bool shape = per_gen.size() == 3;
  for (const auto& [g, n] : per_gen) shape = shape && n == 18;
  o.require(shape, fmt("cells=%.0f (3 x 18 + 2 expected)", static_cast<double>(first.cells.size())));
  o.require(failed == 0, fmt("failed cells=%.0f", static_cast<double>(failed)));
  o.require(hashes.size() == 1, fmt("distinct test hashes=%.0f", static_cast<double>(hashes.size())));

  const GridRun second = run_grid(fixture(), spec);
  const fs::path a = fs::temp_directory_path() / "synthkt_acceptance_grid_a";
  const fs::path b = fs::temp_directory_path() / "synthkt_acceptance_grid_b";
  fs::remove_all(a);
  fs::remove_all(b);
  emit_report(first.cells, a);
  emit_report(second.cells, b);
  const std::string ra = slurp(a / "results.csv");
  o.require(!ra.empty() && ra == slurp(b / "results.csv"), "rerun results.csv byte-identical");
  return o;
}

Outcome criterion8() {
  Outcome o;
  GridSpec spec;
  spec.seed = 808;
  spec.generators = {GeneratorMethod::gen3};
  spec.real_ratios = {0.0, 1.0};
  spec.synth_ratios = {0.0, 3.0};
  const GridRun run = run_grid(fixture(), spec);
  const GridCellResult* real_only = nullptr;
  const GridCellResult* synth_only = nullptr;
  for (const auto& c : run.cells) {
    if (!c.generator && c.real_ratio == 1.0) real_only = &c;
    if (c.generator && c.real_ratio == 0.0 && c.synth_ratio == 3.0) synth_only = &c;
  }
  o.require(real_only && synth_only && real_only->ok() && synth_only->ok(), "dkt cells ran");
  if (real_only && synth_only) {
    o.require(std::fabs(synth_only->mae - real_only->mae) <= 0.05,
              fmt("dkt mae real=%.4f gen3-only=%.4f", real_only->mae, synth_only->mae));
  }

  // Skewed fixture: roughly 90% of grades above the threshold.
  FixtureConfig skew;
  skew.base_unknown_mean = 72.0;
  skew.base_known_mean = 80.0;
  skew.observation_noise_std = 19.0;
  skew.seed = 809;
  const Dataset skewed = make_fixture(skew);
  const SplitResult split = split_dataset(skewed, 0.2, 810);
  BktFitOptions opts;
  opts.seed = 811;
  const auto pairs = predict_dataset(fit_bkt(split.train, opts), split.test);
  double positives = 0.0;
  for (const auto& p : pairs) positives += binary_class(p.actual);
  const double rate = positives / static_cast<double>(pairs.size());
  const double majority = std::max(rate, 1.0 - rate);
  const double acc = accuracy(pairs), m = mcc(pairs);
  o.require(std::fabs(rate - 0.9) < 0.03, fmt("positive rate %.4f", rate));
  o.require(std::fabs(acc - majority) <= 0.02, fmt("bkt acc=%.4f majority=%.4f", acc, majority));
  o.require(std::fabs(m) < 0.05, fmt("bkt mcc=%.4f", m));
  return o;
}

}  // namespace

int main() {
  run(1, "distribution fitting recovery", 60, criterion1);
  run(2, "generator 1 moment anchor", 5, criterion2);
  run(3, "generator 2/3 fidelity", 10, criterion3);
  run(4, "HMM correctness", 60, criterion4);
  run(5, "DKT gradient check and memorisation", 120, criterion5);
  run(6, "metric oracles", 5, criterion6);
  run(7, "grid protocol shape", 600, criterion7);
  run(8, "qualitative claim reproduction", 300, criterion8);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
