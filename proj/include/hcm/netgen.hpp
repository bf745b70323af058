#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcm/pgf.hpp"
#include "hcm/rng.hpp"

namespace hcm {

using NodeId = std::uint32_t;

/// N x H matrix of hyperstub counts; column j is orbit class j of the model.
class HyperstubSequence {
public:
    HyperstubSequence() = default;
    HyperstubSequence(std::size_t nodes, std::size_t classes)
        : nodes_(nodes), classes_(classes), counts_(nodes * classes, 0) {}

    std::size_t nodes() const noexcept { return nodes_; }
    std::size_t classes() const noexcept { return classes_; }
    std::uint32_t& at(std::size_t node, std::size_t cls) { return counts_[node * classes_ + cls]; }
    std::uint32_t at(std::size_t node, std::size_t cls) const { return counts_[node * classes_ + cls]; }
    std::uint64_t column_sum(std::size_t cls) const;

private:
    std::size_t nodes_ = 0;
    std::size_t classes_ = 0;
    std::vector<std::uint32_t> counts_;
};

/*
 * Simple undirected graph with CSR adjacency and the subgraph copies that
 * were placed to build it.
 */
class Network {
public:
    Network() = default;
    Network(std::size_t n_nodes, std::vector<std::pair<NodeId, NodeId>> edges);

    std::size_t size() const noexcept { return n_; }
    const std::vector<std::pair<NodeId, NodeId>>& edges() const noexcept { return edges_; }
    std::span<const NodeId> neighbours(NodeId v) const {
        return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
    }
    std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
    bool has_edge(NodeId u, NodeId v) const;

    /// provenance[k] holds the node tuples (|G_k| entries each, in local node
    /// order) of the copies of subgraph k.
    std::vector<std::vector<NodeId>> provenance;

private:
    std::size_t n_ = 0;
    std::vector<std::pair<NodeId, NodeId>> edges_;
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> adjacency_;  // sorted per node
};

struct NetworkMetrics {
    double mean_degree = 0.0;
    double degree_variance = 0.0;
    std::uint64_t triangles = 0;
    std::uint64_t paths2 = 0;
    double global_clustering = 0.0;
};

struct SequenceOptions {
    int max_attempts = 1000;
};

/*
 * I.i.d. per-node draws from each orbit marginal, redrawn until every
 * cardinality constraint holds: an orbit column must be a multiple of the
 * orbit size, and all orbits of one subgraph must imply the same copy count.
 * For a partner orbit of equal size the column is a random permutation of
 * the first orbit's column.
 */
HyperstubSequence sample_sequences(const NetworkModel& model, std::size_t n_nodes, std::uint64_t seed,
                                   const SequenceOptions& options = {});

struct AssembleOptions {
    int retries_per_copy = 100;
    int restarts = 10;
};

/*
 * Hyperstub configuration model wiring. For every copy of every subgraph one
 * node is drawn uniformly without replacement from each position's orbit bin;
 * draws that repeat a node or duplicate an existing edge are redrawn. When a
 * copy exhausts its retry budget, assembly restarts from the sequence; after
 * `restarts` failures a ConstraintError is thrown.
 */
Network assemble(const HyperstubSequence& seq, const PositionIndex& index, std::uint64_t seed,
                 const AssembleOptions& options = {});

/// sample_sequences + assemble, resampling the sequence when wiring fails.
Network generate_network(const NetworkModel& model, std::size_t n_nodes, std::uint64_t seed, int max_resamples = 20);

NetworkMetrics measure(const Network& net);

/// Plain-text edge list: first line N, then one "u v" pair per line, 0-indexed.
void write_edge_list(std::ostream& out, const Network& net);
Network read_edge_list(std::istream& in);

void write_metrics_csv(std::ostream& out, std::span<const std::pair<std::string, NetworkMetrics>> rows);

} // namespace hcm
