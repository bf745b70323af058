#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "hcm/errors.hpp"
#include "hcm/subgraph.hpp"

using namespace hcm;

namespace {

// Independent orbit oracle: backtracking search for an automorphism mapping
// u to v, pruning on degree and adjacency consistency.
bool maps_to(const Subgraph& g, int u, int v) {
    const int n = g.size();
    std::vector<int> image(n, -1);
    std::vector<bool> used(n, false);
    image[u] = v;
    used[v] = true;
    std::function<bool(int)> extend = [&](int a) -> bool {
        if (a == n) return true;
        if (image[a] >= 0) return extend(a + 1);
        for (int b = 0; b < n; ++b) {
            if (used[b] || g.degree(a) != g.degree(b)) continue;
            bool ok = true;
            for (int c = 0; c < n && ok; ++c)
                if (image[c] >= 0 && g.adjacent(a, c) != g.adjacent(b, image[c])) ok = false;
            if (!ok) continue;
            image[a] = b;
            used[b] = true;
            if (extend(a + 1)) return true;
            image[a] = -1;
            used[b] = false;
        }
        return false;
    };
    // the fixed pair must itself be consistent with later choices, which
    // extend() checks when those nodes are placed
    return extend(0);
}

std::vector<std::vector<int>> oracle_orbits(const Subgraph& g) {
    std::vector<std::vector<int>> out;
    std::vector<bool> seen(g.size(), false);
    for (int u = 0; u < g.size(); ++u) {
        if (seen[u]) continue;
        std::vector<int> orbit;
        for (int v = 0; v < g.size(); ++v)
            if (maps_to(g, u, v)) {
                orbit.push_back(v);
                seen[v] = true;
            }
        out.push_back(orbit);
    }
    return out;
}

Subgraph relabel(const Subgraph& g, const std::vector<int>& perm) {
    const int n = g.size();
    std::vector<std::vector<int>> rows(n, std::vector<int>(n, 0));
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) rows[perm[u]][perm[v]] = g.adjacent(u, v) ? 1 : 0;
    return Subgraph(g.id() + "'", rows);
}

} // namespace

TEST_CASE("edge has a single orbit") {
    const auto p = compute_orbits(library::edge());
    REQUIRE(p.orbits.size() == 1);
    CHECK(p.orbits[0] == std::vector<int>{0, 1});
}

TEST_CASE("square with diagonal splits into degree-2 and degree-3 orbits") {
    const Subgraph g = library::square_diagonal();
    const auto p = compute_orbits(g);
    REQUIRE(p.orbits.size() == 2);
    CHECK(p.orbits[0] == std::vector<int>{0, 3});
    CHECK(p.orbits[1] == std::vector<int>{1, 2});
    for (int u : p.orbits[0]) CHECK(g.degree(u) == 2);
    for (int u : p.orbits[1]) CHECK(g.degree(u) == 3);
}

TEST_CASE("library subgraphs match the backtracking orbit oracle") {
    for (const auto& name : library::names()) {
        CAPTURE(name);
        const Subgraph g = *library::by_name(name);
        CHECK(compute_orbits(g).orbits == oracle_orbits(g));
    }
    // a path and a star are not vertex-transitive
    const Subgraph path("path4", {{0, 1, 0, 0}, {1, 0, 1, 0}, {0, 1, 0, 1}, {0, 0, 1, 0}});
    CHECK(compute_orbits(path).orbits == std::vector<std::vector<int>>{{0, 3}, {1, 2}});
    const Subgraph star("star", {{0, 1, 1, 1, 1}, {1, 0, 0, 0, 0}, {1, 0, 0, 0, 0}, {1, 0, 0, 0, 0}, {1, 0, 0, 0, 0}});
    CHECK(compute_orbits(star).orbits == oracle_orbits(star));
    CHECK(compute_orbits(star).orbits.size() == 2);
}

TEST_CASE("complete graphs and cycles are vertex-transitive") {
    for (int n = 3; n <= 7; ++n) {
        CAPTURE(n);
        CHECK(compute_orbits(library::complete(n)).orbits.size() == 1);
        CHECK(compute_orbits(library::cycle(n)).orbits.size() == 1);
    }
    CHECK(compute_orbits(library::complete(5)).orbits[0] == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("orbit partition follows node relabelling") {
    std::mt19937 rng(3);
    const Subgraph tadpole("tadpole", {{0, 1, 1, 0, 0}, {1, 0, 1, 0, 0}, {1, 1, 0, 1, 0}, {0, 0, 1, 0, 1}, {0, 0, 0, 1, 0}});
    for (const Subgraph& g : {library::square_diagonal(), tadpole}) {
        const auto base = compute_orbits(g);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<int> perm(g.size());
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            const auto moved = compute_orbits(relabel(g, perm));
            for (int u = 0; u < g.size(); ++u)
                for (int v = 0; v < g.size(); ++v)
                    CHECK((base.orbit_of[u] == base.orbit_of[v]) == (moved.orbit_of[perm[u]] == moved.orbit_of[perm[v]]));
        }
    }
}

TEST_CASE("subgraph validation") {
    CHECK_THROWS_AS(Subgraph("one", {{0}}), ValidationError);
    CHECK_THROWS_AS(Subgraph("asym", {{0, 1}, {0, 0}}), ValidationError);
    CHECK_THROWS_AS(Subgraph("loop", {{1, 1}, {1, 0}}), ValidationError);
    CHECK_THROWS_AS(Subgraph("weight", {{0, 2}, {2, 0}}), ValidationError);
    CHECK_THROWS_AS(Subgraph("ragged", {{0, 1}, {1}}), ValidationError);
    CHECK_THROWS_AS(Subgraph("split", {{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}}), ValidationError);
    CHECK_THROWS_AS(library::complete(8), ValidationError);
}

TEST_CASE("triangle counts per node") {
    const Subgraph k4 = library::complete(4);
    for (int u = 0; u < 4; ++u) CHECK(k4.triangles_at(u) == 3);
    CHECK(k4.triangle_count() == 4);
    CHECK(library::square().triangle_count() == 0);
    const Subgraph d = library::square_diagonal();
    CHECK(d.triangle_count() == 2);
    CHECK(d.triangles_at(0) == 1);
    CHECK(d.triangles_at(1) == 2);
}

TEST_CASE("position index") {
    SUBCASE("single edge") { CHECK(build_position_index({library::edge()}).size() == 2); }
    SUBCASE("edge and triangle") {
        const auto idx = build_position_index({library::edge(), library::triangle()});
        CHECK(idx.size() == 5);
        CHECK(idx.slot(0).subgraph == 0);
        CHECK(idx.slot(1).subgraph == 0);
        for (std::size_t p = 2; p < 5; ++p) CHECK(idx.slot(p).subgraph == 1);
        CHECK(idx.position_of(1, 2) == 4);
    }
    SUBCASE("five-subgraph figure set has 17 positions") {
        const auto idx = build_position_index({library::edge(), library::triangle(), library::complete(4),
                                               library::square(), library::square_diagonal()});
        CHECK(idx.size() == 17);
        CHECK(idx.orbit_classes().size() == 6);
        // x14..x17 are positions 13..16; orbits {x14,x17} and {x15,x16}
        const auto classes = idx.classes_of(4);
        REQUIRE(classes.size() == 2);
        CHECK(classes[0].positions == std::vector<std::size_t>{13, 16});
        CHECK(classes[1].positions == std::vector<std::size_t>{14, 15});
        for (std::size_t p = 0; p < idx.size(); ++p) {
            const auto& slot = idx.slot(p);
            CHECK(idx.position_of(slot.subgraph, slot.node) == p);
            const auto& cls = idx.orbit_classes()[slot.orbit_class];
            CHECK(std::count(cls.positions.begin(), cls.positions.end(), p) == 1);
        }
    }
    SUBCASE("rejects empty and duplicate sets") {
        CHECK_THROWS_AS(build_position_index({}), ValidationError);
        CHECK_THROWS_AS(build_position_index({library::edge(), library::edge()}), ValidationError);
    }
}

TEST_CASE("library lookup by name and alias") {
    CHECK(library::by_name("K4")->size() == 4);
    CHECK(library::by_name("6c")->size() == 6);
    CHECK(library::by_name("G0")->size() == 2);
    CHECK_FALSE(library::by_name("dodecahedron").has_value());
}
