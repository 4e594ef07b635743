#include "synthkt/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

#include "csv.hpp"
#include "synthkt/error.hpp"
#include "synthkt/rng.hpp"

namespace synthkt {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::real: return "real";
    case Provenance::gen1: return "gen1";
    case Provenance::gen2: return "gen2";
    case Provenance::gen3: return "gen3";
    case Provenance::fixture: return "fixture";
  }
  return "real";
}

Provenance parse_provenance(std::string_view text) {
  if (text == "real") return Provenance::real;
  if (text == "gen1") return Provenance::gen1;
  if (text == "gen2") return Provenance::gen2;
  if (text == "gen3") return Provenance::gen3;
  if (text == "fixture") return Provenance::fixture;
  throw DomainError("unknown provenance tag '" + std::string(text) + "'");
}

std::vector<double> LearningPath::grades() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.grade);
  return out;
}

Dataset::Dataset(std::vector<LearningPath> paths, Provenance provenance)
    : paths_(std::move(paths)), provenance_(provenance) {
  std::set<std::string> seen;
  for (const auto& path : paths_) {
    if (path.steps.empty()) {
      throw DomainError("learning path of student '" + path.student_id + "' is empty");
    }
    if (!seen.insert(path.student_id).second) {
      throw DomainError("duplicate student id '" + path.student_id + "'");
    }
    for (const auto& step : path.steps) {
      exercise_index_.try_emplace(step.exercise_id, exercise_index_.size());
      skill_index_.try_emplace(step.skill_id, skill_index_.size());
      if (!std::isfinite(step.grade)) {
        throw DomainError("non-finite grade for student '" + path.student_id + "'");
      }
    }
    n_interactions_ += path.steps.size();
  }
}

std::vector<double> Dataset::all_grades() const {
  std::vector<double> out;
  out.reserve(n_interactions_);
  for (const auto& path : paths_) {
    for (const auto& s : path.steps) out.push_back(s.grade);
  }
  return out;
}

std::vector<Interaction> Dataset::interactions() const {
  std::vector<Interaction> out;
  out.reserve(n_interactions_);
  for (const auto& path : paths_) {
    for (std::size_t t = 0; t < path.steps.size(); ++t) {
      const auto& s = path.steps[t];
      Interaction it;
      it.student_id = path.student_id;
      it.exercise_id = s.exercise_id;
      if (!s.skill_id.empty()) it.skill_id = s.skill_id;
      it.step_index = t;
      it.raw_grade = s.grade;
      it.max_grade = 100.0;
      it.grade = s.grade;
      out.push_back(std::move(it));
    }
  }
  return out;
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = stable_hash(to_string(provenance_));
  auto feed = [&h](std::string_view text) {
    h = mix_seed(h, stable_hash(text));
  };
  for (const auto& path : paths_) {
    feed(path.student_id);
    for (const auto& s : path.steps) {
      feed(s.exercise_id);
      feed(s.skill_id);
      h = mix_seed(h, std::bit_cast<std::uint64_t>(s.grade));
    }
  }
  return h;
}

double normalize_grade(double raw_grade, double max_grade) {
  if (!(max_grade > 0.0)) throw DomainError("max_grade must be positive");
  // Already a percentage: keep the value bit-exact.
  const double pct = max_grade == 100.0 ? raw_grade : 100.0 * raw_grade / max_grade;
  return std::clamp(pct, 0.0, 100.0);
}

SchemaMap schema_preset(std::string_view name) {
  SchemaMap m;
  if (name == "oulad") {
    m.student_col = "id_student";
    m.exercise_col = "id_assessment";
    m.grade_col = "score";
    m.constant_max_grade = 100.0;
    m.order_col = "date_submitted";
  } else if (name == "slp") {
    m.student_col = "student_id";
    m.exercise_col = "question_id";
    m.skill_col = "concept";
    m.grade_col = "score";
    m.max_grade_col = "full_score";
    m.order_col = "time_access";
  } else if (name == "generic") {
    m.student_col = "student_id";
    m.exercise_col = "exercise_id";
    m.skill_col = "skill_id";
    m.grade_col = "grade";
    m.max_grade_col = "max_grade";
    m.order_col = "step_index";
    m.provenance_col = "provenance";
  } else {
    throw DomainError("unknown schema preset '" + std::string(name) + "'");
  }
  return m;
}

namespace {

struct PendingRow {
  std::size_t row;
  std::string student;
  std::string exercise;
  std::string skill;
  std::string order_key;
  double order_value;
  double grade;
};

std::size_t require_column(const std::unordered_map<std::string, std::size_t>& header,
                           const std::string& name, const char* role) {
  auto it = header.find(name);
  if (it == header.end()) {
    throw SchemaError(name, std::string("missing ") + role + " column '" + name + "'");
  }
  return it->second;
}

}  // namespace

IngestResult ingest_interactions(std::istream& source, const SchemaMap& schema,
                                 Provenance provenance) {
  std::string line;
  if (!std::getline(source, line)) throw EmptyDatasetError("input has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::unordered_map<std::string, std::size_t> header;
  {
    auto names = csv::split_record(csv::trim(line), schema.delimiter);
    for (std::size_t i = 0; i < names.size(); ++i) {
      header.emplace(std::string(csv::trim(names[i])), i);
    }
  }
  const std::size_t student_i = require_column(header, schema.student_col, "student id");
  const std::size_t exercise_i = require_column(header, schema.exercise_col, "exercise id");
  const std::size_t grade_i = require_column(header, schema.grade_col, "grade");
  const std::size_t order_i = require_column(header, schema.order_col, "ordering");
  std::optional<std::size_t> skill_i;
  if (!schema.skill_col.empty()) skill_i = require_column(header, schema.skill_col, "skill id");
  std::optional<std::size_t> max_i;
  if (!schema.max_grade_col.empty()) {
    max_i = require_column(header, schema.max_grade_col, "max grade");
  } else if (!(schema.constant_max_grade > 0.0)) {
    throw DomainError("constant max grade must be positive");
  }
  std::optional<std::size_t> prov_i;
  if (!schema.provenance_col.empty()) {
    if (auto it = header.find(schema.provenance_col); it != header.end()) prov_i = it->second;
  }
  std::size_t needed = std::max({student_i, exercise_i, grade_i, order_i});
  if (skill_i) needed = std::max(needed, *skill_i);
  if (max_i) needed = std::max(needed, *max_i);

  IngestResult result;
  std::vector<PendingRow> rows;
  bool numeric_order = true;
  std::optional<Provenance> tagged;
  std::size_t row_no = 0;
  while (std::getline(source, line)) {
    ++row_no;
    if (csv::trim(line).empty()) {
      --row_no;
      continue;
    }
    auto fields = csv::split_record(csv::trim(line), schema.delimiter);
    if (fields.size() <= needed) {
      result.rejected.push_back({row_no, "expected at least " + std::to_string(needed + 1) +
                                             " fields, found " + std::to_string(fields.size())});
      continue;
    }
    PendingRow r;
    r.row = row_no;
    r.student = std::string(csv::trim(fields[student_i]));
    r.exercise = std::string(csv::trim(fields[exercise_i]));
    if (skill_i) r.skill = std::string(csv::trim(fields[*skill_i]));
    r.order_key = std::string(csv::trim(fields[order_i]));
    if (r.student.empty() || r.exercise.empty()) {
      result.rejected.push_back({row_no, "empty student or exercise id"});
      continue;
    }
    double raw = 0.0;
    if (!csv::parse_double(fields[grade_i], raw)) {
      result.rejected.push_back({row_no, "non-numeric grade '" + fields[grade_i] + "'"});
      continue;
    }
    double max_grade = schema.constant_max_grade;
    if (max_i && !csv::parse_double(fields[*max_i], max_grade)) {
      result.rejected.push_back({row_no, "non-numeric max grade '" + fields[*max_i] + "'"});
      continue;
    }
    if (!(max_grade > 0.0)) {
      result.rejected.push_back({row_no, "max grade must be positive"});
      continue;
    }
    r.grade = normalize_grade(raw, max_grade);
    if (!csv::parse_double(r.order_key, r.order_value)) numeric_order = false;
    if (prov_i && !tagged && *prov_i < fields.size()) {
      tagged = parse_provenance(csv::trim(fields[*prov_i]));
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw EmptyDatasetError("no valid interaction rows in input");
  result.accepted_rows = rows.size();

  // Group by student in order of first appearance.
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(rows[i].student, members.size());
    if (inserted) members.emplace_back();
    members[it->second].push_back(i);
  }

  std::vector<LearningPath> paths;
  paths.reserve(members.size());
  for (auto& idx : members) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (numeric_order) return rows[a].order_value < rows[b].order_value;
      return rows[a].order_key < rows[b].order_key;
    });
    LearningPath path;
    path.student_id = rows[idx.front()].student;
    path.steps.reserve(idx.size());
    for (std::size_t i : idx) {
      path.steps.push_back({rows[i].exercise, rows[i].skill, rows[i].grade});
    }
    paths.push_back(std::move(path));
  }
  result.dataset = Dataset(std::move(paths), tagged.value_or(provenance));
  return result;
}

IngestResult ingest_file(const std::string& path, const SchemaMap& schema, Provenance provenance) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return ingest_interactions(in, schema, provenance);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  constexpr char d = ',';
  out << "student_id,exercise_id,skill_id,step_index,grade,max_grade,provenance\n";
  char buf[64];
  for (const auto& path : ds.paths()) {
    for (std::size_t t = 0; t < path.steps.size(); ++t) {
      const auto& s = path.steps[t];
      std::snprintf(buf, sizeof buf, "%.17g", s.grade);
      out << csv::escape_field(path.student_id, d) << d << csv::escape_field(s.exercise_id, d)
          << d << csv::escape_field(s.skill_id, d) << d << t << d << buf << d << "100" << d
          << to_string(ds.provenance()) << '\n';
    }
  }
}

void write_dataset_file(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dataset(out, ds);
  if (!out) throw IoError("failed writing '" + path + "'");
}

SplitResult split_dataset(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DomainError("test_fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.n_students();
  if (n < 2) throw DomainError("split_dataset needs at least two learning paths");
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);

  std::vector<char> in_test(n, 0);
  for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = 1;
  std::vector<LearningPath> train, test;
  for (std::size_t i = 0; i < n; ++i) {
    (in_test[i] ? test : train).push_back(ds.paths()[i]);
  }
  return {Dataset(std::move(train), ds.provenance()), Dataset(std::move(test), ds.provenance())};
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DomainError("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

StatsSummary descriptive_stats(std::span<const double> grades) {
  if (grades.empty()) throw DomainError("descriptive_stats of an empty list");
  std::vector<double> sorted(grades.begin(), grades.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());

  StatsSummary s;
  s.count = sorted.size();
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : sorted) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / n);
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

Dataset make_fixture(const FixtureConfig& c) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  auto pct = [](double p) { return p >= 0.0 && p <= 100.0; };
  if (c.n_students == 0 || c.min_length == 0 || c.min_length > c.max_length ||
      c.n_skills == 0 || c.exercises_per_skill == 0 || !prob(c.mastery_gain) ||
      !pct(c.base_known_mean) || !pct(c.base_unknown_mean) ||
      !(c.observation_noise_std >= 0.0)) {
    throw DomainError("invalid fixture configuration");
  }
  std::vector<LearningPath> paths;
  paths.reserve(c.n_students);
  const std::size_t span = c.max_length - c.min_length + 1;
  for (std::size_t i = 0; i < c.n_students; ++i) {
    Rng rng(mix_seed(c.seed, i));
    LearningPath path;
    path.student_id = "stu" + std::to_string(i);
    const std::size_t length = c.min_length + rng.index(span);
    std::vector<char> known(c.n_skills, 0);
    path.steps.reserve(length);
    for (std::size_t t = 0; t < length; ++t) {
      const std::size_t k = rng.index(c.n_skills);
      const std::size_t e = rng.index(c.exercises_per_skill);
      const double mean = known[k] ? c.base_known_mean : c.base_unknown_mean;
      const double g = std::clamp(rng.normal(mean, c.observation_noise_std), 0.0, 100.0);
      path.steps.push_back({"sk" + std::to_string(k) + "-ex" + std::to_string(e),
                            "sk" + std::to_string(k), g});
      if (!known[k] && rng.uniform() < c.mastery_gain) known[k] = 1;
    }
    paths.push_back(std::move(path));
  }
  return Dataset(std::move(paths), Provenance::fixture);
}

}  // namespace synthkt
