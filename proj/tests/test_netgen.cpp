#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "hcm/errors.hpp"
#include "hcm/netgen.hpp"

using namespace hcm;
using namespace hcm::library;

namespace {

NetworkModel model1() { return NetworkModel().add(triangle(), Poisson{2}); }

// Degree moments and triangle count computed straight from the edge list.
struct Brute {
    double mean = 0, var = 0;
    std::uint64_t triangles = 0;
};

Brute brute(const Network& net) {
    const std::size_t n = net.size();
    std::vector<std::set<NodeId>> adj(n);
    for (auto [u, v] : net.edges()) {
        adj[u].insert(v);
        adj[v].insert(u);
    }
    Brute b;
    for (const auto& a : adj) b.mean += a.size();
    b.mean /= n;
    for (const auto& a : adj) b.var += (a.size() - b.mean) * (a.size() - b.mean);
    b.var /= n;
    for (auto [u, v] : net.edges())
        for (NodeId w : adj[u])
            if (w > std::max(u, v) && adj[v].count(w)) ++b.triangles;
    return b;
}

} // namespace

TEST_CASE("three nodes holding one triangle hyperstub form a triangle") {
    const NetworkModel m = NetworkModel().add(triangle(), ExactCount{1});
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Network net = generate_network(m, 3, seed);
        CHECK(net.edges().size() == 3);
        CHECK(net.has_edge(0, 1));
        CHECK(net.has_edge(1, 2));
        CHECK(net.has_edge(0, 2));
        CHECK(net.provenance[0].size() == 3);
    }
}

TEST_CASE("one edge stub per node on four nodes gives uniform perfect matchings") {
    const NetworkModel m = NetworkModel().add(edge(), ExactCount{1});
    std::map<std::vector<std::pair<NodeId, NodeId>>, int> seen;
    const int trials = 3000;
    for (int s = 0; s < trials; ++s) {
        const Network net = generate_network(m, 4, 1000 + s);
        REQUIRE(net.edges().size() == 2);
        for (NodeId v = 0; v < 4; ++v) CHECK(net.degree(v) == 1);
        auto e = net.edges();
        for (auto& p : e)
            if (p.first > p.second) std::swap(p.first, p.second);
        std::sort(e.begin(), e.end());
        ++seen[e];
    }
    REQUIRE(seen.size() == 3);
    // chi-square with 2 degrees of freedom, 0.001 critical value 13.82
    double chi2 = 0;
    for (auto& [k, c] : seen) chi2 += (c - trials / 3.0) * (c - trials / 3.0) / (trials / 3.0);
    CHECK(chi2 < 13.82);
}

TEST_CASE("doubled edge stubs give even degrees") {
    const NetworkModel m = NetworkModel().add(edge(), ScaledPoisson{2, 2});
    const HyperstubSequence seq = sample_sequences(m, 2000, 7);
    for (std::size_t v = 0; v < seq.nodes(); ++v) CHECK(seq.at(v, 0) % 2 == 0);
    const Network net = generate_network(m, 2000, 7);
    std::size_t odd = 0;
    for (NodeId v = 0; v < net.size(); ++v) odd += net.degree(v) % 2;
    CHECK(odd == 0);
}

TEST_CASE("sequence columns satisfy the cardinality constraints") {
    const NetworkModel m = NetworkModel()
                               .add(edge(), Poisson{1.5})
                               .add(triangle(), Poisson{1})
                               .add(square_diagonal(), Poisson{0.7})
                               .add(complete(5), Poisson{0.3});
    const auto& index = m.index();
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const HyperstubSequence seq = sample_sequences(m, 997, seed);
        for (std::size_t k = 0; k < index.subgraph_count(); ++k) {
            const auto classes = index.classes_of(k);
            std::optional<std::uint64_t> copies;
            for (const auto& cls : classes) {
                const std::size_t c = &cls - index.orbit_classes().data();
                const std::uint64_t sum = seq.column_sum(c);
                CHECK(sum % cls.positions.size() == 0);
                const std::uint64_t implied = sum / cls.positions.size();
                if (copies) CHECK(implied == *copies);
                copies = implied;
            }
        }
    }
}

TEST_CASE("every placed copy is present and the edge set is their union") {
    const NetworkModel m = NetworkModel()
                               .add(edge(), Poisson{1})
                               .add(triangle(), Poisson{1})
                               .add(square(), Poisson{0.5})
                               .add(square_diagonal(), Poisson{0.5});
    const auto& index = m.index();
    const Network net = generate_network(m, 3000, 11);
    std::set<std::pair<NodeId, NodeId>> from_copies;
    std::size_t expected_edges = 0;
    for (std::size_t k = 0; k < index.subgraph_count(); ++k) {
        const Subgraph& g = index.subgraph(k);
        const auto& tuples = net.provenance[k];
        REQUIRE(tuples.size() % g.size() == 0);
        for (std::size_t c = 0; c < tuples.size(); c += g.size()) {
            std::set<NodeId> distinct(tuples.begin() + c, tuples.begin() + c + g.size());
            CHECK(distinct.size() == static_cast<std::size_t>(g.size()));
            for (int a = 0; a < g.size(); ++a)
                for (int b = a + 1; b < g.size(); ++b)
                    if (g.adjacent(a, b)) {
                        NodeId u = tuples[c + a], v = tuples[c + b];
                        CHECK(net.has_edge(u, v));
                        from_copies.insert({std::min(u, v), std::max(u, v)});
                        ++expected_edges;
                    }
        }
    }
    // no edge is shared between copies, so the counts agree
    CHECK(from_copies.size() == expected_edges);
    CHECK(net.edges().size() == expected_edges);
}

TEST_CASE("measure on small graphs") {
    const NetworkMetrics k3 = measure(Network(3, {{0, 1}, {1, 2}, {0, 2}}));
    CHECK(k3.mean_degree == doctest::Approx(2));
    CHECK(k3.degree_variance == doctest::Approx(0));
    CHECK(k3.triangles == 1);
    CHECK(k3.global_clustering == doctest::Approx(1));
    const NetworkMetrics c4 = measure(Network(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}));
    CHECK(c4.triangles == 0);
    CHECK(c4.paths2 == 4);
    CHECK(c4.global_clustering == doctest::Approx(0));
    // star with three leaves: degrees 3,1,1,1
    const NetworkMetrics star = measure(Network(4, {{0, 1}, {0, 2}, {0, 3}}));
    CHECK(star.mean_degree == doctest::Approx(1.5));
    CHECK(star.degree_variance == doctest::Approx(0.75));
    CHECK(star.paths2 == 3);
}

TEST_CASE("measure agrees with a brute-force recount") {
    const Network net = generate_network(model1(), 1500, 3);
    const NetworkMetrics m = measure(net);
    const Brute b = brute(net);
    CHECK(m.mean_degree == doctest::Approx(b.mean).epsilon(1e-12));
    CHECK(m.degree_variance == doctest::Approx(b.var).epsilon(1e-12));
    CHECK(m.triangles == b.triangles);
}

TEST_CASE("triangle model at N=5000 is near its targets") {
    const NetworkMetrics m = measure(generate_network(model1(), 5000, 1));
    CHECK(m.mean_degree == doctest::Approx(4).epsilon(0.025));
    CHECK(std::abs(m.degree_variance - 8) < 0.5);
    CHECK(std::abs(m.global_clustering - 0.2) < 0.02);
}

TEST_CASE("generation is deterministic in the seed") {
    const Network a = generate_network(model1(), 500, 42);
    const Network b = generate_network(model1(), 500, 42);
    const Network c = generate_network(model1(), 500, 43);
    CHECK(a.edges() == b.edges());
    CHECK(a.edges() != c.edges());
}

TEST_CASE("edge list round trip") {
    const Network net = generate_network(model1(), 300, 5);
    std::stringstream buf;
    write_edge_list(buf, net);
    const Network back = read_edge_list(buf);
    CHECK(back.size() == net.size());
    CHECK(back.edges().size() == net.edges().size());
    for (auto [u, v] : net.edges()) CHECK(back.has_edge(u, v));

    std::istringstream dup("3\n0 1\n1 0\n");
    CHECK_THROWS_AS(read_edge_list(dup), ValidationError);
    std::istringstream loop("3\n1 1\n");
    CHECK_THROWS_AS(read_edge_list(loop), ValidationError);
    std::istringstream junk("3\n0 x\n");
    CHECK_THROWS_AS(read_edge_list(junk), ValidationError);
}

TEST_CASE("impossible wiring is reported") {
    // two nodes cannot host a triangle
    CHECK_THROWS_AS(generate_network(NetworkModel().add(triangle(), ExactCount{1}), 2, 1), ValidationError);
    // three nodes each in two triangles would need a duplicated edge
    CHECK_THROWS_AS(generate_network(NetworkModel().add(triangle(), ExactCount{2}), 3, 1), ConstraintError);
}
