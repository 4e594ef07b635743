#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

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

namespace py = pybind11;
using namespace synthkt;

namespace {

// JSON crosses the boundary as text; the Python package wraps these with
// json.loads / json.dumps.
std::string dump(const Json& j) { return j.dump(); }

Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw DomainError(std::string("invalid JSON: ") + e.what());
  }
}

SchemaMap resolve_schema(const std::string& preset, const std::string& schema_json) {
  return schema_json.empty() ? schema_preset(preset) : schema_from_json(parse(schema_json));
}

std::vector<std::tuple<std::string, std::string, std::string, double>> rows_of(const Dataset& ds) {
  std::vector<std::tuple<std::string, std::string, std::string, double>> out;
  out.reserve(ds.n_interactions());
  for (const auto& p : ds.paths()) {
    for (const auto& s : p.steps) out.emplace_back(p.student_id, s.exercise_id, s.skill_id, s.grade);
  }
  return out;
}

Dataset dataset_from_rows(
    const std::vector<std::tuple<std::string, std::string, std::string, double>>& rows,
    const std::string& provenance) {
  std::vector<LearningPath> paths;
  std::map<std::string, std::size_t> index;
  for (const auto& [student, exercise, skill, grade] : rows) {
    auto [it, fresh] = index.try_emplace(student, paths.size());
    if (fresh) paths.push_back(LearningPath{student, {}});
    paths[it->second].steps.push_back(Step{exercise, skill, grade});
  }
  return Dataset(std::move(paths), parse_provenance(provenance));
}

std::vector<FamilyKind> families_of(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllFamilies.begin(), kAllFamilies.end()};
  std::vector<FamilyKind> out;
  for (const auto& n : names) out.push_back(parse_family(n));
  return out;
}

py::dict metrics_dict(const std::vector<PredictionPair>& pairs) {
  py::dict d;
  d["mae"] = mae(pairs);
  d["acc"] = accuracy(pairs);
  d["mcc"] = mcc(pairs);
  d["pairs"] = pairs.size();
  return d;
}

std::vector<PredictionPair> to_pairs(const std::vector<double>& predicted, const std::vector<double>& actual) {
  if (predicted.size() != actual.size()) throw DomainError("predicted and actual differ in length");
  std::vector<PredictionPair> out(predicted.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {predicted[i], actual[i]};
  return out;
}

DktConfig dkt_config_from(const py::dict& kw) {
  DktConfig c;
  for (auto [k, v] : kw) {
    const auto key = k.cast<std::string>();
    if (key == "hidden_size") c.hidden_size = v.cast<std::size_t>();
    else if (key == "input_buckets") c.input_buckets = v.cast<std::size_t>();
    else if (key == "learning_rate") c.learning_rate = v.cast<double>();
    else if (key == "epochs") c.epochs = v.cast<std::size_t>();
    else if (key == "batch_size") c.batch_size = v.cast<std::size_t>();
    else if (key == "bptt_limit") c.bptt_limit = v.cast<std::size_t>();
    else if (key == "seed") c.seed = v.cast<std::uint64_t>();
    else throw DomainError("unknown DKT option: " + key);
  }
  validate(c);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the synthkt package";
  m.attr("__version__") = kVersion;

  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<EmptyDatasetError>(m, "EmptyDatasetError", PyExc_ValueError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
  py::register_exception<EmError>(m, "EmError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&dataset_from_rows), py::arg("rows"), py::arg("provenance") = "real",
           "Build from (student_id, exercise_id, skill_id, grade) rows in path order.")
      .def_property_readonly("n_students", &Dataset::n_students)
      .def_property_readonly("n_exercises", &Dataset::n_exercises)
      .def_property_readonly("n_interactions", &Dataset::n_interactions)
      .def_property_readonly("provenance", [](const Dataset& d) { return std::string(to_string(d.provenance())); })
      .def_property_readonly("content_hash", &Dataset::content_hash)
      .def("grades", &Dataset::all_grades)
      .def("rows", &rows_of)
      .def("path_lengths",
           [](const Dataset& d) {
             std::vector<std::size_t> out;
             for (const auto& p : d.paths()) out.push_back(p.size());
             return out;
           })
      .def("to_csv",
           [](const Dataset& d) {
             std::ostringstream out;
             write_dataset(out, d);
             return out.str();
           })
      .def("save", [](const Dataset& d, const std::string& path) { write_dataset_file(path, d); })
      .def("__len__", &Dataset::n_students);

  m.def(
      "load_dataset",
      [](const std::string& path, const std::string& schema, const std::string& schema_json) {
        auto r = ingest_file(path, resolve_schema(schema, schema_json));
        return py::make_tuple(std::move(r.dataset), r.rejected.size());
      },
      py::arg("path"), py::arg("schema") = "generic", py::arg("schema_json") = "");
  m.def(
      "parse_dataset",
      [](const std::string& text, const std::string& schema, const std::string& schema_json) {
        std::istringstream in(text);
        auto r = ingest_interactions(in, resolve_schema(schema, schema_json));
        return py::make_tuple(std::move(r.dataset), r.rejected.size());
      },
      py::arg("text"), py::arg("schema") = "generic", py::arg("schema_json") = "");

  m.def(
      "make_fixture",
      [](std::size_t n_students, std::uint64_t seed, double mastery_gain, double known_mean,
         double unknown_mean, double noise) {
        FixtureConfig c;
        c.n_students = n_students;
        c.seed = seed;
        c.mastery_gain = mastery_gain;
        c.base_known_mean = known_mean;
        c.base_unknown_mean = unknown_mean;
        c.observation_noise_std = noise;
        return make_fixture(c);
      },
      py::arg("n_students") = 500, py::arg("seed") = FixtureConfig{}.seed,
      py::arg("mastery_gain") = FixtureConfig{}.mastery_gain,
      py::arg("known_mean") = FixtureConfig{}.base_known_mean,
      py::arg("unknown_mean") = FixtureConfig{}.base_unknown_mean,
      py::arg("noise") = FixtureConfig{}.observation_noise_std);

  m.def(
      "split", [](const Dataset& ds, double test_fraction, std::uint64_t seed) {
        auto s = split_dataset(ds, test_fraction, seed);
        return py::make_tuple(std::move(s.train), std::move(s.test));
      },
      py::arg("dataset"), py::arg("test_fraction") = 0.2, py::arg("seed") = 0);

  m.def("stats_json", [](const std::vector<double>& grades) { return dump(to_json(descriptive_stats(grades))); });

  m.def(
      "fit_json",
      [](const std::vector<double>& grades, const std::vector<std::string>& families, std::size_t bins) {
        const auto kinds = families_of(families);
        return dump(fit_document(select_best_fit(grades, kinds, bins)));
      },
      py::arg("grades"), py::arg("families") = std::vector<std::string>{}, py::arg("bins") = 50);

  m.def(
      "generate",
      [](const Dataset& real, const std::string& method, std::size_t n_paths, double mu, double sigma,
         bool clamp, std::uint64_t seed, const std::string& fit_json) {
        GeneratorConfig c;
        c.method = parse_generator(method);
        c.n_paths = n_paths;
        c.noise_mu = mu;
        c.noise_sigma = sigma;
        c.clamp = clamp;
        c.seed = seed;
        if (c.method == GeneratorMethod::gen1) {
          if (fit_json.empty()) throw DomainError("gen1 needs a fitted distribution");
          const FittedDistribution fit = fitted_from_json(parse(fit_json));
          return generate(real, c, &fit);
        }
        return generate(real, c);
      },
      py::arg("real"), py::arg("method"), py::arg("n_paths"), py::arg("mu") = 0.0, py::arg("sigma") = 3.0,
      py::arg("clamp") = true, py::arg("seed") = 0, py::arg("fit_json") = "");

  py::class_<DktModel>(m, "DktModel")
      .def_property_readonly("hidden_size", &DktModel::hidden_size)
      .def_property_readonly("buckets", &DktModel::buckets)
      .def_property_readonly("n_parameters", [](const DktModel& d) { return d.parameters().size(); })
      .def("predict", [](const DktModel& d, const Dataset& test) { return metrics_dict(predict_dataset(d, test)); })
      .def("save", [](const DktModel& d, const std::string& path) { save_model_file(path, d); })
      .def_static("load", &load_model_file);

  m.def(
      "train_dkt",
      [](const Dataset& train_data, const py::kwargs& kw) {
        const DktConfig c = dkt_config_from(kw);
        TrainResult r = [&] {
          py::gil_scoped_release release;
          return train(DktModel::initialized(c), train_data, c);
        }();
        return py::make_tuple(std::move(r.model), r.report.epoch_losses);
      },
      py::arg("train"));

  py::class_<BktModel>(m, "BktModel")
      .def("predict", [](const BktModel& b, const Dataset& test) { return metrics_dict(predict_dataset(b, test)); })
      .def("to_json", [](const BktModel& b) { return dump(to_json(b)); })
      .def_static("from_json", [](const std::string& text) { return bkt_model_from_json(parse(text)); });

  m.def(
      "fit_bkt",
      [](const Dataset& train_data, std::size_t max_iters, std::size_t restarts, std::uint64_t seed) {
        BktFitOptions o;
        o.max_iters = max_iters;
        o.restarts = restarts;
        o.seed = seed;
        py::gil_scoped_release release;
        return fit_bkt(train_data, o);
      },
      py::arg("train"), py::arg("max_iters") = 200, py::arg("restarts") = 3, py::arg("seed") = 0);

  m.def(
      "metrics",
      [](const std::vector<double>& predicted, const std::vector<double>& actual) {
        return metrics_dict(to_pairs(predicted, actual));
      },
      py::arg("predicted"), py::arg("actual"));

  m.def(
      "run_grid",
      [](const Dataset& real, const std::string& config_json, const std::string& out_dir) {
        const GridSpec spec = grid_spec_from_json(config_json.empty() ? Json::object() : parse(config_json));
        GridRun run = [&] {
          py::gil_scoped_release release;
          return run_grid(real, spec);
        }();
        if (!out_dir.empty()) emit_report(run.cells, out_dir);
        py::list cells;
        for (const auto& c : run.cells) {
          py::dict d;
          d["generator"] = generator_label(c);
          d["model"] = std::string(to_string(c.model));
          d["real_ratio"] = c.real_ratio;
          d["synth_ratio"] = c.synth_ratio;
          d["mae"] = c.mae;
          d["acc"] = c.acc;
          d["mcc"] = c.mcc;
          d["train_interactions"] = c.train_interactions;
          d["test_pairs"] = c.test_pairs;
          d["test_hash"] = c.test_hash;
          d["error"] = c.error;
          cells.append(d);
        }
        return cells;
      },
      py::arg("real"), py::arg("config_json") = "", py::arg("out_dir") = "");
}
