#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthkt/bkt.hpp"
#include "synthkt/dataset.hpp"
#include "synthkt/distributions.hpp"
#include "synthkt/evalgrid.hpp"

namespace synthkt {

using Json = nlohmann::ordered_json;

inline constexpr const char* kFitFormat = "synthkt.fits/1";
inline constexpr const char* kBktFormat = "synthkt.bkt/1";
inline constexpr const char* kGridFormat = "synthkt.grid/1";

Json to_json(const FittedDistribution& fit);
FittedDistribution fitted_from_json(const Json& j);

// {"format", "n_used", "n_excluded", "bins", "ranked": [...], "failures": [...]}
Json fit_document(const BestFitResult& result);
// Ranked fits from a fit document, best first. Throws DomainError when the
// document is malformed or has no fits.
std::vector<FittedDistribution> read_fit_document(const Json& doc);

Json to_json(const BktParams& params);
BktParams bkt_params_from_json(const Json& j);
Json to_json(const BktModel& model);
BktModel bkt_model_from_json(const Json& j);

Json to_json(const DktConfig& config);
Json to_json(const StatsSummary& stats);

// Every GridSpec field; `jobs` is left out so the echo stays identical across
// machines.
Json to_json(const GridSpec& spec);
// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
GridSpec grid_spec_from_json(const Json& j, GridSpec base = {});

// Column mapping document: the SchemaMap field names as keys; "delimiter" is
// a one-character string. Missing optional keys keep their defaults.
SchemaMap schema_from_json(const Json& j);
Json to_json(const SchemaMap& schema);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace synthkt
