#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "hcm/netgen.hpp"
#include "hcm/odesolve.hpp"
#include "hcm/rng.hpp"

namespace hcm {

/// Event-by-event record of one run. Entry 0 is the initial state at t = 0;
/// counts hold from their time until the next entry.
struct RunTrace {
    std::size_t nodes = 0;
    std::vector<double> times;
    std::vector<std::uint32_t> susceptible;
    std::vector<std::uint32_t> infected;

    std::size_t events() const noexcept { return times.empty() ? 0 : times.size() - 1; }
    std::uint32_t final_recovered() const {
        return static_cast<std::uint32_t>(nodes) - susceptible.back() - infected.back();
    }
    std::uint32_t peak_infected() const;
};

struct SimulationOptions {
    /// Recount S-I edges from scratch after every event and throw on mismatch.
    bool verify_bookkeeping = false;
};

/*
 * Exact SIR simulation: each S-I edge transmits at rate tau, each infected
 * node recovers at rate gamma. Runs until no node is infected.
 */
RunTrace simulate_once(const Network& net, double tau, double gamma, NodeId initial_infected, Rng& rng,
                       const SimulationOptions& options = {});
RunTrace simulate_once(const Network& net, double tau, double gamma, NodeId initial_infected, std::uint64_t seed,
                       const SimulationOptions& options = {});

struct SimProtocol {
    double tau = 1.0;
    double gamma = 1.0;
    std::size_t nodes = 5000;
    std::size_t n_networks = 100;
    std::size_t runs_per_network = 1;
    double outbreak_threshold = 0.05;
    double alignment_prevalence = 0.01;
    double h_out = 0.01;
    double t_end = 15.0;
    std::uint64_t seed = 1;
    /// 0 means HCM_WORKERS from the environment, else hardware concurrency.
    unsigned workers = 0;
    /// Keep every run's event trace in the result.
    bool keep_runs = false;

    void validate() const;
};

struct EnsembleResult {
    SimProtocol protocol;
    std::vector<RunTrace> runs;            // empty unless keep_runs
    std::vector<double> alignment_shift;   // per run; NaN when discarded
    std::vector<std::uint32_t> final_sizes;
    std::size_t total_runs = 0;
    std::size_t discarded_runs = 0;
    /// Mean of the retained runs, shifted so each crosses the alignment
    /// prevalence at t = 0, on the grid 0, h_out, ..., t_end (fractions of N).
    EpidemicTrace mean;

    std::size_t retained_runs() const noexcept { return total_runs - discarded_runs; }
};

unsigned resolve_workers(unsigned requested);

/*
 * Generates protocol.n_networks networks, simulates runs_per_network
 * epidemics on each from a uniformly random initial infected node, discards
 * runs whose prevalence never reaches outbreak_threshold and averages the
 * aligned rest. Results do not depend on the number of workers. Throws
 * NoOutbreakError when every run is discarded.
 */
EnsembleResult run_ensemble(const NetworkModel& model, const SimProtocol& protocol);

/// Seed used for network `k` of an ensemble, and for its runs.
std::uint64_t network_seed(std::uint64_t seed, std::size_t k);
std::uint64_t run_seed(std::uint64_t seed, std::size_t k, std::size_t run);

/// JSON sidecar: protocol and discard counts.
void write_ensemble_json(std::ostream& out, const EnsembleResult& result);

} // namespace hcm
