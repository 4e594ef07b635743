#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synthkt {

enum class Provenance { real, gen1, gen2, gen3, fixture };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view text);

// One student-exercise event as read from a source table.
struct Interaction {
  std::string student_id;
  std::string exercise_id;
  std::optional<std::string> skill_id;
  std::size_t step_index = 0;
  double raw_grade = 0.0;
  double max_grade = 100.0;
  double grade = 0.0;  // percentage in [0, 100]
};

struct Step {
  std::string exercise_id;
  std::string skill_id;  // empty when the source had no skill column
  double grade = 0.0;
};

struct LearningPath {
  std::string student_id;
  std::vector<Step> steps;

  std::size_t size() const noexcept { return steps.size(); }
  std::vector<double> grades() const;
};

// Immutable collection of learning paths with dense exercise/skill indices.
class Dataset {
 public:
  Dataset() = default;
  // Validates unique student ids, non-empty paths and finite grades; builds
  // indices in order of first appearance. Grades are expected in [0, 100]
  // but only unclamped generator output may leave that range.
  Dataset(std::vector<LearningPath> paths, Provenance provenance);

  const std::vector<LearningPath>& paths() const noexcept { return paths_; }
  const std::map<std::string, std::size_t>& exercise_index() const noexcept {
    return exercise_index_;
  }
  const std::map<std::string, std::size_t>& skill_index() const noexcept {
    return skill_index_;
  }
  Provenance provenance() const noexcept { return provenance_; }

  bool empty() const noexcept { return paths_.empty(); }
  std::size_t n_students() const noexcept { return paths_.size(); }
  std::size_t n_exercises() const noexcept { return exercise_index_.size(); }
  std::size_t n_interactions() const noexcept { return n_interactions_; }

  std::vector<double> all_grades() const;
  std::vector<Interaction> interactions() const;

  // FNV-based content digest over ids, grades (bit patterns) and provenance.
  std::uint64_t content_hash() const;

 private:
  std::vector<LearningPath> paths_;
  std::map<std::string, std::size_t> exercise_index_;
  std::map<std::string, std::size_t> skill_index_;
  Provenance provenance_ = Provenance::real;
  std::size_t n_interactions_ = 0;
};

// 100 * raw / max, clamped into [0, 100]. Throws DomainError if max <= 0.
double normalize_grade(double raw_grade, double max_grade);

// Column mapping for delimiter-separated interaction tables.
struct SchemaMap {
  std::string student_col;
  std::string exercise_col;
  std::string skill_col;       // optional; empty = no skill column
  std::string grade_col;
  std::string max_grade_col;   // empty = use constant_max_grade
  double constant_max_grade = 100.0;
  std::string order_col;       // timestamp or explicit step index
  std::string provenance_col;  // optional; first row's value tags the dataset
  char delimiter = ',';
};

// Built-in presets: "oulad" (studentAssessment table), "slp" (unit records),
// "generic" (the format written by write_dataset).
SchemaMap schema_preset(std::string_view name);

struct RowIssue {
  std::size_t row = 0;  // 1-based data row number (header excluded)
  std::string message;
};

struct IngestResult {
  Dataset dataset;
  std::vector<RowIssue> rejected;
  std::size_t accepted_rows = 0;
};

// Reads a header row plus one interaction per line. Invalid rows are dropped
// and reported; a missing mapped column raises SchemaError; a stream with no
// valid rows raises EmptyDatasetError. Ties on the ordering column keep input
// row order.
IngestResult ingest_interactions(std::istream& source, const SchemaMap& schema,
                                 Provenance provenance = Provenance::real);
IngestResult ingest_file(const std::string& path, const SchemaMap& schema,
                         Provenance provenance = Provenance::real);

// Writes the "generic" tabular layout (round-trippable through ingest with
// schema_preset("generic")), including a provenance column.
void write_dataset(std::ostream& out, const Dataset& ds);
void write_dataset_file(const std::string& path, const Dataset& ds);

struct SplitResult {
  Dataset train;
  Dataset test;
};

// Student-granular split; the test side receives round(test_fraction * n)
// paths, kept within [1, n-1].
SplitResult split_dataset(const Dataset& ds, double test_fraction, std::uint64_t seed);

struct StatsSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

StatsSummary descriptive_stats(std::span<const double> grades);

// Linear-interpolation quantile of sorted data, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

struct FixtureConfig {
  std::size_t n_students = 500;
  std::size_t min_length = 10;
  std::size_t max_length = 50;
  std::size_t n_skills = 5;
  std::size_t exercises_per_skill = 8;
  double mastery_gain = 0.15;
  double base_known_mean = 85.0;
  double base_unknown_mean = 55.0;
  double observation_noise_std = 10.0;
  std::uint64_t seed = 20240501;
};

// Planted two-state learner: per skill, every student starts unknown and
// becomes known with probability mastery_gain after each attempt on it.
Dataset make_fixture(const FixtureConfig& config);

}  // namespace synthkt
