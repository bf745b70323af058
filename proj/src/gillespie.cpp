#include "hcm/gillespie.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <string>
#include <thread>

#include <json.hpp>

#include "hcm/errors.hpp"

namespace hcm {

std::uint32_t RunTrace::peak_infected() const {
    return infected.empty() ? 0 : *std::max_element(infected.begin(), infected.end());
}

namespace {

enum : std::uint8_t { kS = 0, kI = 1, kR = 2 };

class Epidemic {
public:
    Epidemic(const Network& net, double tau, double gamma)
        : net_(net), tau_(tau), gamma_(gamma), state_(net.size(), kS), s_neighbours_(net.size(), 0),
          slot_(net.size(), npos) {}

    RunTrace run(NodeId seed_node, Rng& rng, bool verify) {
        RunTrace trace;
        trace.nodes = net_.size();
        std::uint32_t s = static_cast<std::uint32_t>(net_.size());
        infect(seed_node);
        --s;
        record(trace, 0.0, s);

        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double t = 0.0;
        while (!infected_.empty()) {
            const double infection = tau_ * static_cast<double>(si_edges_);
            const double recovery = gamma_ * static_cast<double>(infected_.size());
            const double total = infection + recovery;
            if (!(total > 0.0)) {
                // gamma = 0 and no S-I edges left: nothing can change again
                break;
            }
            std::exponential_distribution<double> wait(total);
            t += wait(rng);
            if (unit(rng) * total < recovery) {
                std::uniform_int_distribution<std::size_t> pick(0, infected_.size() - 1);
                recover(infected_[pick(rng)]);
            } else {
                infect(pick_target(rng));
                --s;
            }
            record(trace, t, s);
            if (verify) check();
        }
        return trace;
    }

private:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    void record(RunTrace& trace, double t, std::uint32_t s) const {
        trace.times.push_back(t);
        trace.susceptible.push_back(s);
        trace.infected.push_back(static_cast<std::uint32_t>(infected_.size()));
    }

    NodeId pick_target(Rng& rng) const {
        std::uniform_int_distribution<std::uint64_t> pick(0, si_edges_ - 1);
        std::uint64_t r = pick(rng);
        for (NodeId v : infected_) {
            if (r < s_neighbours_[v]) {
                for (NodeId w : net_.neighbours(v)) {
                    if (state_[w] != kS) continue;
                    if (r == 0) return w;
                    --r;
                }
            }
            r -= s_neighbours_[v];
        }
        throw std::logic_error("S-I edge selection out of range");
    }

    void infect(NodeId v) {
        state_[v] = kI;
        slot_[v] = infected_.size();
        infected_.push_back(v);
        std::uint32_t own = 0;
        for (NodeId w : net_.neighbours(v)) {
            if (state_[w] == kS) {
                ++own;
            } else if (state_[w] == kI) {
                --s_neighbours_[w];
                --si_edges_;
            }
        }
        s_neighbours_[v] = own;
        si_edges_ += own;
    }

    void recover(NodeId v) {
        state_[v] = kR;
        si_edges_ -= s_neighbours_[v];
        s_neighbours_[v] = 0;
        const std::size_t k = slot_[v];
        infected_[k] = infected_.back();
        slot_[infected_[k]] = k;
        infected_.pop_back();
        slot_[v] = npos;
    }

    void check() const {
        std::uint64_t edges = 0;
        for (NodeId v : infected_) {
            std::uint32_t own = 0;
            for (NodeId w : net_.neighbours(v))
                if (state_[w] == kS) ++own;
            if (own != s_neighbours_[v]) throw std::logic_error("per-node S-neighbour count out of sync");
            edges += own;
        }
        if (edges != si_edges_) throw std::logic_error("S-I edge count out of sync");
    }

    const Network& net_;
    double tau_;
    double gamma_;
    std::vector<std::uint8_t> state_;
    std::vector<std::uint32_t> s_neighbours_;
    std::vector<std::size_t> slot_;
    std::vector<NodeId> infected_;
    std::uint64_t si_edges_ = 0;
};

// first time the run's prevalence reaches `level` (fraction of N), NaN if never
double first_crossing(const RunTrace& run, double level) {
    const double target = level * static_cast<double>(run.nodes);
    for (std::size_t e = 0; e < run.times.size(); ++e)
        if (static_cast<double>(run.infected[e]) >= target) return run.times[e];
    return std::numeric_limits<double>::quiet_NaN();
}

void accumulate(const RunTrace& run, double shift, const std::vector<double>& grid, std::vector<double>& s,
                std::vector<double>& i, std::vector<double>& r) {
    const double n = static_cast<double>(run.nodes);
    std::size_t e = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k] + shift;
        while (e + 1 < run.times.size() && run.times[e + 1] <= t) ++e;
        const double sv = run.susceptible[e], iv = run.infected[e];
        s[k] += sv / n;
        i[k] += iv / n;
        r[k] += (n - sv - iv) / n;
    }
}

} // namespace

RunTrace simulate_once(const Network& net, double tau, double gamma, NodeId initial_infected, Rng& rng,
                       const SimulationOptions& options) {
    if (!(tau >= 0.0) || !(gamma >= 0.0)) throw ValidationError("rates must be nonnegative");
    if (initial_infected >= net.size()) throw ValidationError("initial infected node out of range");
    Epidemic epidemic(net, tau, gamma);
    return epidemic.run(initial_infected, rng, options.verify_bookkeeping);
}

RunTrace simulate_once(const Network& net, double tau, double gamma, NodeId initial_infected, std::uint64_t seed,
                       const SimulationOptions& options) {
    Rng rng(seed);
    return simulate_once(net, tau, gamma, initial_infected, rng, options);
}

void SimProtocol::validate() const {
    if (!(tau >= 0.0) || !(gamma >= 0.0)) throw ValidationError("rates must be nonnegative");
    if (!(outbreak_threshold > 0.0 && outbreak_threshold < 1.0))
        throw ValidationError("outbreak_threshold must lie in (0, 1)");
    if (!(alignment_prevalence > 0.0 && alignment_prevalence < 1.0))
        throw ValidationError("alignment_prevalence must lie in (0, 1)");
    if (nodes < 2) throw ValidationError("networks need at least 2 nodes");
    if (n_networks == 0 || runs_per_network == 0) throw ValidationError("ensemble must contain at least one run");
    if (!(h_out > 0.0) || !(t_end > 0.0)) throw ValidationError("h_out and t_end must be positive");
}

unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HCM_WORKERS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t network_seed(std::uint64_t seed, std::size_t k) { return derive_seed(seed, 2 * k); }

std::uint64_t run_seed(std::uint64_t seed, std::size_t k, std::size_t run) {
    return derive_seed(derive_seed(seed, 2 * k + 1), run);
}

EnsembleResult run_ensemble(const NetworkModel& model, const SimProtocol& protocol) {
    protocol.validate();
    const std::size_t total = protocol.n_networks * protocol.runs_per_network;
    std::vector<RunTrace> runs(total);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= protocol.n_networks) return;
            try {
                const Network net = generate_network(model, protocol.nodes, network_seed(protocol.seed, k));
                for (std::size_t r = 0; r < protocol.runs_per_network; ++r) {
                    Rng rng(run_seed(protocol.seed, k, r));
                    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(net.size() - 1));
                    const NodeId first = pick(rng);
                    runs[k * protocol.runs_per_network + r] = simulate_once(net, protocol.tau, protocol.gamma, first, rng);
                }
            } catch (...) {
                std::lock_guard<std::mutex> guard(failure_lock);
                if (!failure) failure = std::current_exception();
                next.store(protocol.n_networks);
                return;
            }
        }
    };
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(resolve_workers(protocol.workers), protocol.n_networks));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    EnsembleResult result;
    result.protocol = protocol;
    result.total_runs = total;
    const auto points = static_cast<std::size_t>(std::llround(protocol.t_end / protocol.h_out)) + 1;
    std::vector<double> grid(points);
    for (std::size_t k = 0; k < points; ++k) grid[k] = static_cast<double>(k) * protocol.h_out;
    std::vector<double> s(points, 0.0), i(points, 0.0), r(points, 0.0);

    for (const RunTrace& run : runs) {
        result.final_sizes.push_back(run.final_recovered());
        const double peak = static_cast<double>(run.peak_infected()) / static_cast<double>(run.nodes);
        if (peak < protocol.outbreak_threshold) {
            ++result.discarded_runs;
            result.alignment_shift.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double shift = first_crossing(run, protocol.alignment_prevalence);
        result.alignment_shift.push_back(shift);
        accumulate(run, shift, grid, s, i, r);
    }
    if (result.retained_runs() == 0) throw NoOutbreakError(total, result.discarded_runs);

    const double kept = static_cast<double>(result.retained_runs());
    for (std::size_t k = 0; k < points; ++k) {
        s[k] /= kept;
        i[k] /= kept;
        r[k] /= kept;
    }
    result.mean.t = std::move(grid);
    result.mean.S = std::move(s);
    result.mean.I = std::move(i);
    result.mean.R = std::move(r);
    result.mean.metadata["source"] = "simulation";
    result.mean.metadata["retained_runs"] = std::to_string(result.retained_runs());
    if (protocol.keep_runs) result.runs = std::move(runs);
    return result;
}

void write_ensemble_json(std::ostream& out, const EnsembleResult& result) {
    const SimProtocol& p = result.protocol;
    nlohmann::ordered_json j;
    j["protocol"] = {{"tau", p.tau},
                     {"gamma", p.gamma},
                     {"nodes", p.nodes},
                     {"n_networks", p.n_networks},
                     {"runs_per_network", p.runs_per_network},
                     {"outbreak_threshold", p.outbreak_threshold},
                     {"alignment_prevalence", p.alignment_prevalence},
                     {"h_out", p.h_out},
                     {"t_end", p.t_end},
                     {"seed", p.seed}};
    j["total_runs"] = result.total_runs;
    j["discarded_runs"] = result.discarded_runs;
    j["retained_runs"] = result.retained_runs();
    std::vector<std::uint32_t> sizes = result.final_sizes;
    j["final_sizes"] = sizes;
    out << j.dump(2) << '\n';
}

} // namespace hcm
