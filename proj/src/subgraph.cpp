#include "hcm/subgraph.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>

#include "hcm/errors.hpp"

namespace hcm {

Subgraph::Subgraph(std::string id, const std::vector<std::vector<int>>& rows)
    : id_(std::move(id)), n_(static_cast<int>(rows.size())) {
    if (n_ < kMinSubgraphNodes || n_ > kMaxSubgraphNodes)
        throw ValidationError("subgraph '" + id_ + "': node count " + std::to_string(n_) +
                              " outside [2, 7]");
    adj_.assign(static_cast<std::size_t>(n_ * n_), 0);
    for (int i = 0; i < n_; ++i) {
        if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != n_)
            throw ValidationError("subgraph '" + id_ + "': adjacency matrix is not square");
        for (int j = 0; j < n_; ++j) {
            const int v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (v != 0 && v != 1)
                throw ValidationError("subgraph '" + id_ + "': adjacency entries must be 0 or 1");
            adj_[static_cast<std::size_t>(i * n_ + j)] = static_cast<std::uint8_t>(v);
        }
    }
    for (int i = 0; i < n_; ++i) {
        if (adjacent(i, i))
            throw ValidationError("subgraph '" + id_ + "': nonzero diagonal (self-loop)");
        for (int j = i + 1; j < n_; ++j)
            if (adjacent(i, j) != adjacent(j, i))
                throw ValidationError("subgraph '" + id_ + "': adjacency matrix is not symmetric");
    }

    std::vector<int> stack{0};
    std::vector<bool> seen(static_cast<std::size_t>(n_), false);
    seen[0] = true;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < n_; ++v)
            if (adjacent(u, v) && !seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = true;
                stack.push_back(v);
            }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw ValidationError("subgraph '" + id_ + "' is not connected");
}

int Subgraph::degree(int u) const {
    int d = 0;
    for (int v = 0; v < n_; ++v) d += adjacent(u, v) ? 1 : 0;
    return d;
}

int Subgraph::triangles_at(int u) const {
    int t = 0;
    for (int v = 0; v < n_; ++v)
        for (int w = v + 1; w < n_; ++w)
            if (adjacent(u, v) && adjacent(u, w) && adjacent(v, w)) ++t;
    return t;
}

int Subgraph::triangle_count() const {
    int total = 0;
    for (int u = 0; u < n_; ++u) total += triangles_at(u);
    return total / 3;
}

std::vector<std::pair<int, int>> Subgraph::edges() const {
    std::vector<std::pair<int, int>> out;
    for (int u = 0; u < n_; ++u)
        for (int v = u + 1; v < n_; ++v)
            if (adjacent(u, v)) out.emplace_back(u, v);
    return out;
}

OrbitPartition compute_orbits(const Subgraph& s) {
    const int n = s.size();
    // Union-find over nodes; every automorphism merges u with perm[u].
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    do {
        bool automorphism = true;
        for (int u = 0; u < n && automorphism; ++u) {
            if (s.degree(u) != s.degree(perm[static_cast<std::size_t>(u)])) automorphism = false;
            for (int v = u + 1; v < n && automorphism; ++v)
                if (s.adjacent(u, v) !=
                    s.adjacent(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]))
                    automorphism = false;
        }
        if (!automorphism) continue;
        for (int u = 0; u < n; ++u) {
            const int a = find(u);
            const int b = find(perm[static_cast<std::size_t>(u)]);
            if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    OrbitPartition out;
    out.orbit_of.assign(static_cast<std::size_t>(n), -1);
    std::map<int, int> root_to_orbit;
    for (int u = 0; u < n; ++u) {
        const int root = find(u);
        auto [it, inserted] = root_to_orbit.try_emplace(root, static_cast<int>(out.orbits.size()));
        if (inserted) out.orbits.emplace_back();
        out.orbits[static_cast<std::size_t>(it->second)].push_back(u);
        out.orbit_of[static_cast<std::size_t>(u)] = it->second;
    }
    return out;
}

PositionIndex::PositionIndex(std::vector<Subgraph> subgraphs) : subgraphs_(std::move(subgraphs)) {
    if (subgraphs_.empty()) throw ValidationError("position index needs at least one subgraph");
    for (std::size_t a = 0; a < subgraphs_.size(); ++a)
        for (std::size_t b = a + 1; b < subgraphs_.size(); ++b)
            if (subgraphs_[a].id() == subgraphs_[b].id())
                throw ValidationError("duplicate subgraph id '" + subgraphs_[a].id() + "'");

    for (std::size_t k = 0; k < subgraphs_.size(); ++k) {
        const Subgraph& g = subgraphs_[k];
        partitions_.push_back(compute_orbits(g));
        offsets_.push_back(slots_.size());
        class_offsets_.push_back(classes_.size());
        const OrbitPartition& part = partitions_.back();
        for (std::size_t o = 0; o < part.orbits.size(); ++o) {
            OrbitClass cls;
            cls.subgraph = k;
            cls.local_orbit = static_cast<int>(o);
            cls.nodes = part.orbits[o];
            for (int node : cls.nodes) cls.positions.push_back(slots_.size() + static_cast<std::size_t>(node));
            classes_.push_back(std::move(cls));
        }
        for (int u = 0; u < g.size(); ++u)
            slots_.push_back({k, u, class_offsets_.back() + static_cast<std::size_t>(part.orbit_of[static_cast<std::size_t>(u)])});
    }
    class_offsets_.push_back(classes_.size());
}

std::span<const OrbitClass> PositionIndex::classes_of(std::size_t k) const {
    const std::size_t lo = class_offsets_.at(k);
    const std::size_t hi = class_offsets_.at(k + 1);
    return std::span<const OrbitClass>(classes_).subspan(lo, hi - lo);
}

PositionIndex build_position_index(std::vector<Subgraph> subgraphs) {
    return PositionIndex(std::move(subgraphs));
}

namespace library {

namespace {
std::vector<std::vector<int>> empty_rows(int n) {
    return std::vector<std::vector<int>>(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), 0));
}
void link(std::vector<std::vector<int>>& rows, int u, int v) {
    rows[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
    rows[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = 1;
}
std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}
} // namespace

Subgraph cycle(int n) {
    auto rows = empty_rows(n);
    for (int i = 0; i < n; ++i) link(rows, i, (i + 1) % n);
    return Subgraph("C" + std::to_string(n), rows);
}

Subgraph complete(int n) {
    auto rows = empty_rows(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) link(rows, i, j);
    return Subgraph("K" + std::to_string(n), rows);
}

Subgraph edge() { return Subgraph("edge", {{0, 1}, {1, 0}}); }

Subgraph triangle() {
    auto rows = empty_rows(3);
    link(rows, 0, 1);
    link(rows, 1, 2);
    link(rows, 0, 2);
    return Subgraph("triangle", rows);
}

Subgraph square() {
    auto rows = empty_rows(4);
    for (int i = 0; i < 4; ++i) link(rows, i, (i + 1) % 4);
    return Subgraph("square", rows);
}

Subgraph pentagon() {
    auto rows = empty_rows(5);
    for (int i = 0; i < 5; ++i) link(rows, i, (i + 1) % 5);
    return Subgraph("pentagon", rows);
}

Subgraph hexagon() {
    auto rows = empty_rows(6);
    for (int i = 0; i < 6; ++i) link(rows, i, (i + 1) % 6);
    return Subgraph("hexagon", rows);
}

Subgraph square_diagonal() {
    auto rows = empty_rows(4);
    link(rows, 0, 1);
    link(rows, 1, 3);
    link(rows, 3, 2);
    link(rows, 2, 0);
    link(rows, 1, 2);
    return Subgraph("square_diagonal", rows);
}

std::optional<Subgraph> by_name(std::string_view name) {
    const std::string key = lower(name);
    if (key == "edge" || key == "line" || key == "g0") return edge();
    if (key == "triangle" || key == "k3") return triangle();
    if (key == "square" || key == "c4") return square();
    if (key == "pentagon" || key == "c5") return pentagon();
    if (key == "hexagon" || key == "c6") return hexagon();
    if (key == "square_diagonal" || key == "diamond") return square_diagonal();
    if (key == "k4") return complete(4);
    if (key == "k5" || key == "5c") return complete(5);
    if (key == "k6" || key == "6c") return complete(6);
    return std::nullopt;
}

std::vector<std::string> names() {
    return {"edge", "triangle", "square", "pentagon", "hexagon", "square_diagonal", "k4", "k5", "k6"};
}

} // namespace library
} // namespace hcm
