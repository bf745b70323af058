#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hcm {

inline constexpr int kMinSubgraphNodes = 2;
inline constexpr int kMaxSubgraphNodes = 7;

/*
 * A small connected, undirected building block. Local node indices run
 * 0..n-1; the adjacency matrix is stored row-major.
 */
class Subgraph {
public:
    /// Validates symmetry, zero diagonal, 0/1 entries, size bounds and
    /// connectivity; throws ValidationError otherwise.
    Subgraph(std::string id, const std::vector<std::vector<int>>& rows);

    const std::string& id() const noexcept { return id_; }
    int size() const noexcept { return n_; }
    bool adjacent(int u, int v) const { return adj_[static_cast<std::size_t>(u * n_ + v)] != 0; }
    int degree(int u) const;
    /// Number of triangles of the subgraph that contain node u.
    int triangles_at(int u) const;
    int triangle_count() const;
    /// Edges (u, v) with u < v, lexicographic order.
    std::vector<std::pair<int, int>> edges() const;

    friend bool operator==(const Subgraph&, const Subgraph&) = default;

private:
    std::string id_;
    int n_ = 0;
    std::vector<std::uint8_t> adj_;
};

struct OrbitPartition {
    /// Orbits sorted by smallest member; members ascending.
    std::vector<std::vector<int>> orbits;
    /// orbit_of[node] = index into orbits.
    std::vector<int> orbit_of;
};

/// Orbits under the full automorphism group, found by exhaustive search over
/// all n! relabellings.
OrbitPartition compute_orbits(const Subgraph& s);

/// Orbit-level hyperstub class: one per (subgraph, orbit).
struct OrbitClass {
    std::size_t subgraph = 0;
    int local_orbit = 0;
    std::vector<int> nodes;               // local node indices
    std::vector<std::size_t> positions;   // global position indices
};

struct PositionSlot {
    std::size_t subgraph = 0;
    int node = 0;
    std::size_t orbit_class = 0;
};

/*
 * Global position indexing x_1..x_m (stored 0-based). Positions are assigned
 * contiguously in subgraph declaration order, local node order within a
 * subgraph. Orbit classes are numbered in the same order.
 */
class PositionIndex {
public:
    explicit PositionIndex(std::vector<Subgraph> subgraphs);

    std::size_t size() const noexcept { return slots_.size(); }
    std::size_t subgraph_count() const noexcept { return subgraphs_.size(); }
    const std::vector<Subgraph>& subgraphs() const noexcept { return subgraphs_; }
    const Subgraph& subgraph(std::size_t k) const { return subgraphs_.at(k); }
    const PositionSlot& slot(std::size_t position) const { return slots_.at(position); }
    /// Global index of local node `node` of subgraph `k`.
    std::size_t position_of(std::size_t k, int node) const {
        return offsets_.at(k) + static_cast<std::size_t>(node);
    }
    std::size_t first_position(std::size_t k) const { return offsets_.at(k); }
    const std::vector<OrbitClass>& orbit_classes() const noexcept { return classes_; }
    const OrbitPartition& orbits(std::size_t k) const { return partitions_.at(k); }
    /// Orbit classes belonging to subgraph k, in local-orbit order.
    std::span<const OrbitClass> classes_of(std::size_t k) const;

private:
    std::vector<Subgraph> subgraphs_;
    std::vector<OrbitPartition> partitions_;
    std::vector<std::size_t> offsets_;
    std::vector<PositionSlot> slots_;
    std::vector<OrbitClass> classes_;
    std::vector<std::size_t> class_offsets_;
};

PositionIndex build_position_index(std::vector<Subgraph> subgraphs);

/*
 * Canonical building blocks. Local node orders:
 *   edge        0-1
 *   triangle    K3
 *   square      cycle 0-1-2-3-0
 *   pentagon    cycle 0-1-2-3-4-0
 *   hexagon     cycle 0-1-...-5-0
 *   square_diagonal  cycle 0-1-3-2-0 plus chord 1-2; degree-2 orbit {0,3},
 *                    degree-3 orbit {1,2} (so [edge, triangle, k4, square,
 *                    square_diagonal] puts {x14,x17} and {x15,x16} in separate
 *                    orbits)
 *   k4, k5, k6  complete graphs
 */
namespace library {
Subgraph edge();
Subgraph triangle();
Subgraph square();
Subgraph pentagon();
Subgraph hexagon();
Subgraph square_diagonal();
Subgraph complete(int n);
Subgraph cycle(int n);

/// Accepts the names above plus a few aliases (G0, line, K3, C4, C5, C6,
/// K4, K5, K6, 5c, 6c, diamond).
std::optional<Subgraph> by_name(std::string_view name);
std::vector<std::string> names();
} // namespace library

} // namespace hcm
