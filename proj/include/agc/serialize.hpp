#pragma once

#include <string>

#include <json.hpp>

#include "agc/harness.hpp"

namespace agc {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

json to_json(const Vector& v);
json to_json(const Matrix& m);
Vector vector_from_json(const json& j);
Matrix matrix_from_json(const json& j);

json to_json(const HPolytope& p);
HPolytope hpolytope_from_json(const json& j);

json to_json(const GridSpec& grid);
GridSpec gridspec_from_json(const json& j);

json to_json(const GainSampleSet& samples);
GainSampleSet samples_from_json(const json& j);

json to_json(const EpigraphApprox& approx);
EpigraphApprox epigraph_from_json(const json& j);

/// RCI artifact: template rows, offsets, status, and a hash of the problem
/// data so stale artifacts are detectable across CLI invocations.
json rci_to_json(const RciResult& result, const RciProblem& prob, const RciTemplate& tmpl);

json to_json(const SearchResult& result);
json to_json(const ValidityOutcome& outcome);
json to_json(const RefinementLog& log);
json to_json(const RunTrace& trace);
json to_json(const TraceVerdict& verdict);
json to_json(const PipelineReport& report);

uint64_t problem_hash(const RciProblem& prob, const Matrix& facets, const Vector& q0);

NetworkConfig parse_network_config(const json& j);
NetworkConfig load_network_config(const std::string& path);

/// Wraps a payload with the schema version and writes it.
void write_artifact(const std::string& path, json payload);
json read_artifact(const std::string& path);

}  // namespace agc
