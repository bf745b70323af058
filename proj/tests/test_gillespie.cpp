#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "hcm/errors.hpp"
#include "hcm/gillespie.hpp"

using namespace hcm;
using namespace hcm::library;

namespace {

/*
 * Exact final-size distribution of SIR on a small graph. The embedded jump
 * chain is walked state by state; every transition moves one node forward
 * (S->I or I->R), so the recursion terminates.
 */
std::vector<double> ctmc_final_size(const Network& net, double tau, double gamma, NodeId initial) {
    const std::size_t n = net.size();
    std::vector<double> dist(n + 1, 0.0);
    std::function<void(std::vector<int>&, double)> walk = [&](std::vector<int>& st, double p) {
        double total = 0;
        std::vector<std::pair<std::size_t, double>> moves;
        for (std::size_t v = 0; v < n; ++v) {
            if (st[v] == 1) {
                moves.emplace_back(v, gamma);
            } else if (st[v] == 0) {
                int k = 0;
                for (NodeId w : net.neighbours(static_cast<NodeId>(v))) k += st[w] == 1;
                if (k) moves.emplace_back(v, tau * k);
            }
        }
        for (auto& m : moves) total += m.second;
        if (total == 0) {
            int r = 0;
            for (int s : st) r += s == 2;
            dist[r] += p;
            return;
        }
        for (auto [v, rate] : moves) {
            ++st[v];
            walk(st, p * rate / total);
            --st[v];
        }
    };
    std::vector<int> st(n, 0);
    st[initial] = 1;
    walk(st, 1.0);
    return dist;
}

Network k3() { return Network(3, {{0, 1}, {1, 2}, {0, 2}}); }

SimProtocol small_protocol() {
    SimProtocol p;
    p.nodes = 400;
    p.n_networks = 6;
    p.runs_per_network = 2;
    p.t_end = 10;
    p.h_out = 0.05;
    p.seed = 17;
    return p;
}

} // namespace

TEST_CASE("single edge transmits with probability tau/(tau+gamma)") {
    const Network pair(2, {{0, 1}});
    Rng rng(2024);
    const int runs = 100000;
    int transmitted = 0;
    for (int r = 0; r < runs; ++r) transmitted += simulate_once(pair, 1.0, 1.0, 0, rng).final_recovered() == 2;
    CHECK(std::abs(transmitted / double(runs) - 0.5) < 0.01);
}

TEST_CASE("isolated node recovers after an exponential time") {
    const Network lone(1, {});
    Rng rng(5);
    double total = 0;
    const int runs = 40000;
    for (int r = 0; r < runs; ++r) {
        const RunTrace tr = simulate_once(lone, 1.0, 2.0, 0, rng);
        REQUIRE(tr.events() == 1);
        total += tr.times.back();
    }
    CHECK(total / runs == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("final-size distributions match the exact chain") {
    const Network path4(4, {{0, 1}, {1, 2}, {2, 3}});
    const Network star(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    struct Case {
        Network net;
        double tau, gamma;
        NodeId start;
    };
    for (const Case& c : {Case{k3(), 1, 1, 0}, Case{k3(), 2, 0.5, 1}, Case{path4, 1.5, 1, 1}, Case{star, 1, 1, 3}}) {
        const std::vector<double> exact = ctmc_final_size(c.net, c.tau, c.gamma, c.start);
        double mass = 0;
        for (double p : exact) mass += p;
        REQUIRE(mass == doctest::Approx(1.0));
        std::vector<double> seen(exact.size(), 0.0);
        Rng rng(77);
        const int runs = 40000;
        for (int r = 0; r < runs; ++r) seen[simulate_once(c.net, c.tau, c.gamma, c.start, rng).final_recovered()] += 1;
        for (std::size_t k = 0; k < exact.size(); ++k) {
            CAPTURE(k);
            CHECK(std::abs(seen[k] / runs - exact[k]) < 0.01);
        }
    }
}

TEST_CASE("triangle closed form") {
    // tau=gamma=1 from one corner: the seed recovers before either
    // transmission with probability 1/3
    const std::vector<double> exact = ctmc_final_size(k3(), 1, 1, 0);
    CHECK(exact[0] == 0);
    CHECK(exact[1] == doctest::Approx(1.0 / 3));
    CHECK(exact[1] + exact[2] + exact[3] == doctest::Approx(1.0));
}

TEST_CASE("bookkeeping stays consistent on a generated network") {
    const Network net = generate_network(NetworkModel().add(edge(), Poisson{2}).add(triangle(), Poisson{1}), 500, 3);
    SimulationOptions check;
    check.verify_bookkeeping = true;
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const RunTrace tr = simulate_once(net, 1.0, 1.0, static_cast<NodeId>(s * 37), s, check);
        CHECK(tr.infected.back() == 0);
        CHECK(tr.times.front() == 0.0);
        for (std::size_t i = 1; i < tr.times.size(); ++i) {
            CHECK(tr.times[i] >= tr.times[i - 1]);
            CHECK(tr.susceptible[i] <= tr.susceptible[i - 1]);
            const int moved = int(tr.susceptible[i - 1]) - int(tr.susceptible[i]) + int(tr.infected[i]) - int(tr.infected[i - 1]);
            // infection: S-1, I+1; recovery: I-1
            CHECK((moved == 2 || moved == -1));
        }
    }
}

TEST_CASE("simulation is reproducible from its seed") {
    const Network net = generate_network(NetworkModel().add(edge(), Poisson{3}), 300, 8);
    const RunTrace a = simulate_once(net, 1, 1, 0, 99);
    const RunTrace b = simulate_once(net, 1, 1, 0, 99);
    CHECK(a.times == b.times);
    CHECK(a.infected == b.infected);
}

TEST_CASE("ensemble does not depend on the worker count") {
    const NetworkModel m = NetworkModel().add(triangle(), Poisson{2});
    SimProtocol p = small_protocol();
    p.workers = 1;
    const EnsembleResult one = run_ensemble(m, p);
    p.workers = 3;
    const EnsembleResult three = run_ensemble(m, p);
    CHECK(one.total_runs == 12);
    CHECK(one.final_sizes == three.final_sizes);
    CHECK(one.discarded_runs == three.discarded_runs);
    REQUIRE(one.mean.size() == three.mean.size());
    for (std::size_t i = 0; i < one.mean.size(); ++i) CHECK(one.mean.I[i] == three.mean.I[i]);
}

TEST_CASE("ensemble mean is aligned and normalised") {
    const NetworkModel m = NetworkModel().add(triangle(), Poisson{2});
    const EnsembleResult r = run_ensemble(m, small_protocol());
    REQUIRE(r.retained_runs() > 0);
    REQUIRE(r.mean.size() == 201);
    // each retained run sits exactly at the crossing count at t=0
    CHECK(r.mean.I[0] == doctest::Approx(4.0 / 400));
    for (std::size_t i = 0; i < r.mean.size(); ++i)
        CHECK(r.mean.S[i] + r.mean.I[i] + r.mean.R[i] == doctest::Approx(1.0));
    std::size_t discarded = 0;
    for (double s : r.alignment_shift) discarded += std::isnan(s);
    CHECK(discarded == r.discarded_runs);
    std::ostringstream js;
    write_ensemble_json(js, r);
    CHECK(js.str().find("\"discarded_runs\"") != std::string::npos);
}

TEST_CASE("ensemble failures") {
    const NetworkModel m = NetworkModel().add(edge(), Poisson{3});
    SimProtocol p = small_protocol();
    p.tau = 0;
    CHECK_THROWS_AS(run_ensemble(m, p), NoOutbreakError);
    p = small_protocol();
    p.outbreak_threshold = 1.5;
    CHECK_THROWS_AS(run_ensemble(m, p), ValidationError);
    p = small_protocol();
    p.n_networks = 0;
    CHECK_THROWS_AS(run_ensemble(m, p), ValidationError);
    p = small_protocol();
    p.gamma = -1;
    CHECK_THROWS_AS(run_ensemble(m, p), ValidationError);
}
