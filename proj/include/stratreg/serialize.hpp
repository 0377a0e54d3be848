#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "stratreg/learner.hpp"
#include "stratreg/metrics.hpp"
#include "stratreg/scenarios.hpp"

namespace stratreg {

using json = nlohmann::json;

// Scenario file schema:
// {name, d, r, beta_star, sigma, noise_kind, loading (row-major), cost_types: [{c, B, pi}]}
json to_json(const Scenario& s);
Scenario scenario_from_json(const json& j);
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

json to_json(const LearnerConfig& c);
json to_json(const Observation& o);
json to_json(const EpochEntry& e);
// {scenario, config, seed, epochs: [...], observations?: [...]}
json to_json(const RunRecord& r);

json to_json(const InstanceConstants& c);
json to_json(const BoundCheckReport& r);
json to_json(const ConcentrationReport& r);

json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace stratreg
