#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcm/gillespie.hpp"
#include "hcm/meanfield.hpp"
#include "hcm/odesolve.hpp"
#include "hcm/pgf.hpp"

namespace hcm {

struct ModelSpec {
    std::string name;
    NetworkModel model;
    /// Set when the rates came from solve_mixture.
    std::optional<MixtureSolution> solved;
};

struct ExperimentConfig {
    std::string name;
    std::uint64_t seed = 1;
    EpidemicParams epidemic;
    InitialSeeding seeding = InitialSeeding::PerState;
    IntegrateOptions ode;
    SimProtocol ensemble;
    bool simulate = true;
    std::vector<ModelSpec> models;
    nlohmann::json source;  // the document as given
};

/*
 * JSON config parsing. A marginal is an object such as
 *   {"family": "poisson", "rate": 2}
 *   {"family": "scaled_poisson", "multiplier": 2, "rate": 2}
 *   {"family": "exact", "count": 3}
 * or an array of them (independent sum). A subgraph is a library name or
 * {"id": ..., "adjacency": [[...]]}. All functions throw ValidationError.
 */
Subgraph parse_subgraph(const nlohmann::json& j);
OrbitMarginal parse_marginal(const nlohmann::json& j);
nlohmann::json marginal_to_json(const OrbitMarginal& m);
ModelSpec parse_model(const nlohmann::json& j);
ExperimentConfig parse_config(const nlohmann::json& j);

/// Directory searched for presets: $HCM_PRESET_DIR, else the source tree's
/// presets/ directory.
std::filesystem::path preset_dir();
/// Reads a config file, or the preset of that name when no such file exists.
/// A manifest.json from a previous run is accepted too.
ExperimentConfig load_config(const std::string& path_or_preset);

struct ModelOutcome {
    std::string name;
    MomentReport moments;
    NetworkMetrics sample_metrics;  // on the ensemble's first network
    IntegrationReport ode;
    std::optional<EnsembleResult> simulation;
};

struct ExperimentResult {
    std::vector<ModelOutcome> models;
};

/// Runs every model without touching the filesystem.
ExperimentResult run_experiment(const ExperimentConfig& config);

/*
 * Runs the experiment and writes, per model, <out>/<model>/ode_trace.csv,
 * sim_mean.csv, sim_mean.json, metrics.csv and system_dump.txt, plus
 * <out>/manifest.json.
 */
ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

} // namespace hcm
