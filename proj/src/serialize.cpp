#include "synthkt/serialize.hpp"

#include <fstream>
#include <set>

#include "synthkt/error.hpp"

namespace synthkt {

namespace {

template <typename T>
T get_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw DomainError(std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DomainError(std::string("field '") + key + "' has the wrong type");
  }
}

void check_format(const Json& j, const char* expected) {
  const auto format = get_field<std::string>(j, "format");
  if (format != expected) {
    throw DomainError("unsupported document format '" + format + "', expected '" + expected + "'");
  }
}

}  // namespace

Json to_json(const FittedDistribution& fit) {
  Json params = Json::object();
  const auto names = param_names(fit.family);
  for (std::size_t i = 0; i < fit.params.size(); ++i) params[std::string(names[i])] = fit.params[i];
  return Json{{"family", std::string(to_string(fit.family))},
              {"params", params},
              {"rss", fit.rss_score},
              {"log_likelihood", fit.log_likelihood}};
}

FittedDistribution fitted_from_json(const Json& j) {
  const FamilyKind family = parse_family(get_field<std::string>(j, "family"));
  const Json& params = j.at("params");
  std::vector<double> values;
  if (params.is_array()) {
    values = params.get<std::vector<double>>();
  } else if (params.is_object()) {
    for (std::string_view name : param_names(family)) {
      values.push_back(get_field<double>(params, std::string(name).c_str()));
    }
  } else {
    throw DomainError("field 'params' must be an object or array");
  }
  FittedDistribution fit = make_distribution(family, std::move(values));
  if (j.contains("rss")) fit.rss_score = get_field<double>(j, "rss");
  if (j.contains("log_likelihood")) fit.log_likelihood = get_field<double>(j, "log_likelihood");
  return fit;
}

Json fit_document(const BestFitResult& result) {
  Json ranked = Json::array();
  for (const auto& fit : result.ranked) ranked.push_back(to_json(fit));
  Json failures = Json::array();
  for (const auto& f : result.failures) {
    failures.push_back(Json{{"family", std::string(to_string(f.family))}, {"reason", f.reason}});
  }
  return Json{{"format", kFitFormat},
              {"n_used", result.n_used},
              {"n_excluded", result.n_excluded},
              {"bins", result.histogram.bins()},
              {"ranked", ranked},
              {"failures", failures}};
}

std::vector<FittedDistribution> read_fit_document(const Json& doc) {
  check_format(doc, kFitFormat);
  if (!doc.contains("ranked") || !doc["ranked"].is_array() || doc["ranked"].empty()) {
    throw DomainError("fit document has no ranked fits");
  }
  std::vector<FittedDistribution> out;
  for (const auto& entry : doc["ranked"]) out.push_back(fitted_from_json(entry));
  return out;
}

Json to_json(const BktParams& p) {
  return Json{{"prior", p.prior}, {"learn", p.learn}, {"forget", p.forget},
              {"guess", p.guess}, {"slip", p.slip}};
}

BktParams bkt_params_from_json(const Json& j) {
  BktParams p;
  p.prior = get_field<double>(j, "prior");
  p.learn = get_field<double>(j, "learn");
  p.forget = get_field<double>(j, "forget");
  p.guess = get_field<double>(j, "guess");
  p.slip = get_field<double>(j, "slip");
  if (!params_valid(p)) throw DomainError("BKT parameters must lie in [0, 1]");
  return p;
}

Json to_json(const BktModel& model) {
  Json skills = Json::object();
  for (const auto& [id, m] : model.skills) {
    Json entry = to_json(m.params);
    entry["n_train_sequences"] = m.n_train_sequences;
    entry["log_likelihood"] = m.log_likelihood;
    entry["iterations"] = m.iterations;
    entry["converged"] = m.converged;
    skills[id] = entry;
  }
  return Json{{"format", kBktFormat}, {"fallback", to_json(model.fallback)}, {"skills", skills}};
}

BktModel bkt_model_from_json(const Json& j) {
  check_format(j, kBktFormat);
  BktModel model;
  if (j.contains("fallback")) model.fallback = bkt_params_from_json(j["fallback"]);
  if (!j.contains("skills") || !j["skills"].is_object()) {
    throw DomainError("BKT document needs a 'skills' object");
  }
  for (const auto& [id, entry] : j["skills"].items()) {
    SkillModel m;
    m.skill_id = id;
    m.params = bkt_params_from_json(entry);
    m.n_train_sequences = entry.value("n_train_sequences", std::size_t{0});
    m.log_likelihood = entry.value("log_likelihood", 0.0);
    m.iterations = entry.value("iterations", std::size_t{0});
    m.converged = entry.value("converged", false);
    model.skills.emplace(id, std::move(m));
  }
  return model;
}

Json to_json(const DktConfig& c) {
  return Json{{"hidden_size", c.hidden_size}, {"input_buckets", c.input_buckets},
              {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
              {"batch_size", c.batch_size}, {"bptt_limit", c.bptt_limit}};
}

Json to_json(const StatsSummary& s) {
  return Json{{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"std", s.std},
              {"q1", s.q1},       {"q3", s.q3},     {"min", s.min},       {"max", s.max}};
}

Json to_json(const GridSpec& spec) {
  Json gens = Json::array();
  for (auto g : spec.generators) gens.push_back(std::string(to_string(g)));
  Json models = Json::array();
  for (auto m : spec.models) models.push_back(std::string(to_string(m)));
  Json families = Json::array();
  for (auto f : spec.gen1_families) families.push_back(std::string(to_string(f)));
  Json bkt{{"init", to_json(spec.bkt.init)},
           {"max_iters", spec.bkt.max_iters},
           {"tol", spec.bkt.tol},
           {"restarts", spec.bkt.restarts}};
  return Json{{"format", kGridFormat},
              {"seed", spec.seed},
              {"real_ratios", spec.real_ratios},
              {"synth_ratios", spec.synth_ratios},
              {"generators", gens},
              {"models", models},
              {"test_fraction", spec.test_fraction},
              {"noise_mu", spec.noise_mu},
              {"noise_sigma", spec.noise_sigma},
              {"clamp", spec.clamp},
              {"gen1_families", families},
              {"gen1_bins", spec.gen1_bins},
              {"dkt", to_json(spec.dkt)},
              {"bkt", bkt}};
}

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const char* where) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) throw DomainError("unknown key '" + key + "' in " + where);
  }
}

}  // namespace

GridSpec grid_spec_from_json(const Json& j, GridSpec spec) {
  if (!j.is_object()) throw DomainError("grid config must be a JSON object");
  reject_unknown(j,
                 {"format", "seed", "real_ratios", "synth_ratios", "generators", "models",
                  "test_fraction", "noise_mu", "noise_sigma", "clamp", "gen1_families", "gen1_bins",
                  "dkt", "bkt", "jobs"},
                 "grid config");
  if (j.contains("format")) check_format(j, kGridFormat);
  if (j.contains("seed")) spec.seed = get_field<std::uint64_t>(j, "seed");
  if (j.contains("real_ratios")) spec.real_ratios = get_field<std::vector<double>>(j, "real_ratios");
  if (j.contains("synth_ratios")) spec.synth_ratios = get_field<std::vector<double>>(j, "synth_ratios");
  if (j.contains("generators")) {
    spec.generators.clear();
    for (const auto& s : get_field<std::vector<std::string>>(j, "generators")) {
      spec.generators.push_back(parse_generator(s));
    }
  }
  if (j.contains("models")) {
    spec.models.clear();
    for (const auto& s : get_field<std::vector<std::string>>(j, "models")) {
      spec.models.push_back(parse_model(s));
    }
  }
  if (j.contains("test_fraction")) spec.test_fraction = get_field<double>(j, "test_fraction");
  if (j.contains("noise_mu")) spec.noise_mu = get_field<double>(j, "noise_mu");
  if (j.contains("noise_sigma")) spec.noise_sigma = get_field<double>(j, "noise_sigma");
  if (j.contains("clamp")) spec.clamp = get_field<bool>(j, "clamp");
  if (j.contains("gen1_families")) {
    spec.gen1_families.clear();
    for (const auto& s : get_field<std::vector<std::string>>(j, "gen1_families")) {
      spec.gen1_families.push_back(parse_family(s));
    }
  }
  if (j.contains("gen1_bins")) spec.gen1_bins = get_field<std::size_t>(j, "gen1_bins");
  if (j.contains("jobs")) spec.jobs = get_field<std::size_t>(j, "jobs");
  if (j.contains("dkt")) {
    const Json& d = j["dkt"];
    reject_unknown(d,
                   {"hidden_size", "input_buckets", "learning_rate", "epochs", "batch_size",
                    "bptt_limit"},
                   "dkt config");
    if (d.contains("hidden_size")) spec.dkt.hidden_size = get_field<std::size_t>(d, "hidden_size");
    if (d.contains("input_buckets")) spec.dkt.input_buckets = get_field<std::size_t>(d, "input_buckets");
    if (d.contains("learning_rate")) spec.dkt.learning_rate = get_field<double>(d, "learning_rate");
    if (d.contains("epochs")) spec.dkt.epochs = get_field<std::size_t>(d, "epochs");
    if (d.contains("batch_size")) spec.dkt.batch_size = get_field<std::size_t>(d, "batch_size");
    if (d.contains("bptt_limit")) spec.dkt.bptt_limit = get_field<std::size_t>(d, "bptt_limit");
  }
  if (j.contains("bkt")) {
    const Json& b = j["bkt"];
    reject_unknown(b, {"init", "max_iters", "tol", "restarts"}, "bkt config");
    if (b.contains("init")) spec.bkt.init = bkt_params_from_json(b["init"]);
    if (b.contains("max_iters")) spec.bkt.max_iters = get_field<std::size_t>(b, "max_iters");
    if (b.contains("tol")) spec.bkt.tol = get_field<double>(b, "tol");
    if (b.contains("restarts")) spec.bkt.restarts = get_field<std::size_t>(b, "restarts");
  }
  validate(spec);
  return spec;
}

SchemaMap schema_from_json(const Json& j) {
  if (!j.is_object()) throw DomainError("schema must be a JSON object");
  reject_unknown(j,
                 {"student_col", "exercise_col", "skill_col", "grade_col", "max_grade_col",
                  "constant_max_grade", "order_col", "provenance_col", "delimiter"},
                 "schema");
  SchemaMap s;
  s.student_col = get_field<std::string>(j, "student_col");
  s.exercise_col = get_field<std::string>(j, "exercise_col");
  s.grade_col = get_field<std::string>(j, "grade_col");
  s.order_col = get_field<std::string>(j, "order_col");
  s.skill_col = j.value("skill_col", std::string{});
  s.max_grade_col = j.value("max_grade_col", std::string{});
  s.provenance_col = j.value("provenance_col", std::string{});
  if (j.contains("constant_max_grade")) s.constant_max_grade = get_field<double>(j, "constant_max_grade");
  if (j.contains("delimiter")) {
    const auto d = get_field<std::string>(j, "delimiter");
    if (d.size() != 1) throw DomainError("schema delimiter must be a single character");
    s.delimiter = d[0];
  }
  return s;
}

Json to_json(const SchemaMap& s) {
  return Json{{"student_col", s.student_col},
              {"exercise_col", s.exercise_col},
              {"skill_col", s.skill_col},
              {"grade_col", s.grade_col},
              {"max_grade_col", s.max_grade_col},
              {"constant_max_grade", s.constant_max_grade},
              {"order_col", s.order_col},
              {"provenance_col", s.provenance_col},
              {"delimiter", std::string(1, s.delimiter)}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace synthkt
