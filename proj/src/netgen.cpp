#include "hcm/netgen.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "hcm/errors.hpp"

namespace hcm {

namespace {

std::uint64_t edge_key(NodeId u, NodeId v) {
    if (u > v) std::swap(u, v);
    return (static_cast<std::uint64_t>(u) << 32) | v;
}

std::uint32_t draw_term(const MarginalTerm& term, Rng& rng) {
    return std::visit(
        [&rng](const auto& t) -> std::uint32_t {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, Poisson>) {
                if (t.rate <= 0.0) return 0;
                return std::poisson_distribution<std::uint32_t>(t.rate)(rng);
            } else if constexpr (std::is_same_v<T, ScaledPoisson>) {
                if (t.rate <= 0.0) return 0;
                return static_cast<std::uint32_t>(t.multiplier) * std::poisson_distribution<std::uint32_t>(t.rate)(rng);
            } else {
                return static_cast<std::uint32_t>(t.count);
            }
        },
        term);
}

bool deterministic(const OrbitMarginal& m) {
    return std::all_of(m.terms.begin(), m.terms.end(), [](const MarginalTerm& t) {
        return std::holds_alternative<ExactCount>(t) ||
               (std::holds_alternative<Poisson>(t) && std::get<Poisson>(t).rate <= 0.0) ||
               (std::holds_alternative<ScaledPoisson>(t) && std::get<ScaledPoisson>(t).rate <= 0.0);
    });
}

std::uint64_t draw_column(HyperstubSequence& seq, std::size_t cls, const OrbitMarginal& m, Rng& rng) {
    std::uint64_t sum = 0;
    for (std::size_t v = 0; v < seq.nodes(); ++v) {
        std::uint32_t c = 0;
        for (const auto& term : m.terms) c += draw_term(term, rng);
        seq.at(v, cls) = c;
        sum += c;
    }
    return sum;
}

std::string class_label(const PositionIndex& index, const OrbitClass& cls) {
    std::ostringstream out;
    out << "orbit " << cls.local_orbit << " of '" << index.subgraph(cls.subgraph).id() << "'";
    return out.str();
}

} // namespace

std::uint64_t HyperstubSequence::column_sum(std::size_t cls) const {
    std::uint64_t s = 0;
    for (std::size_t v = 0; v < nodes_; ++v) s += at(v, cls);
    return s;
}

// ---------------------------------------------------------------------------
// Network

Network::Network(std::size_t n_nodes, std::vector<std::pair<NodeId, NodeId>> edges)
    : n_(n_nodes), edges_(std::move(edges)) {
    std::vector<std::size_t> deg(n_, 0);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(edges_.size() * 2);
    for (auto& [u, v] : edges_) {
        if (u >= n_ || v >= n_) throw ValidationError("edge endpoint out of range");
        if (u == v) throw ValidationError("self-loop at node " + std::to_string(u));
        if (!seen.insert(edge_key(u, v)).second)
            throw ValidationError("duplicate edge " + std::to_string(u) + " " + std::to_string(v));
        if (u > v) std::swap(u, v);
        ++deg[u];
        ++deg[v];
    }
    offsets_.assign(n_ + 1, 0);
    for (std::size_t v = 0; v < n_; ++v) offsets_[v + 1] = offsets_[v] + deg[v];
    adjacency_.assign(offsets_[n_], 0);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [u, v] : edges_) {
        adjacency_[fill[u]++] = v;
        adjacency_[fill[v]++] = u;
    }
    for (std::size_t v = 0; v < n_; ++v)
        std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
                  adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]));
}

bool Network::has_edge(NodeId u, NodeId v) const {
    const auto nb = neighbours(u);
    return std::binary_search(nb.begin(), nb.end(), v);
}

// ---------------------------------------------------------------------------
// Sequences

HyperstubSequence sample_sequences(const NetworkModel& model, std::size_t n_nodes, std::uint64_t seed,
                                   const SequenceOptions& options) {
    const PositionIndex& index = model.index();
    if (n_nodes < model.max_subgraph_size())
        throw ValidationError("network size " + std::to_string(n_nodes) + " is smaller than the largest subgraph");
    const auto& classes = index.orbit_classes();
    HyperstubSequence seq(n_nodes, classes.size());
    Rng rng(seed);

    for (std::size_t k = 0; k < index.subgraph_count(); ++k) {
        const auto own = index.classes_of(k);
        const OrbitClass& lead = own.front();
        const std::size_t lead_id = static_cast<std::size_t>(&lead - classes.data());
        const OrbitMarginal& lead_marginal = model.marginals()[lead_id];
        const std::uint64_t lead_size = lead.positions.size();

        std::uint64_t sum = 0;
        bool ok = false;
        const int attempts = deterministic(lead_marginal) ? 1 : options.max_attempts;
        for (int a = 0; a < attempts && !ok; ++a) {
            sum = draw_column(seq, lead_id, lead_marginal, rng);
            ok = sum % lead_size == 0;
        }
        if (!ok)
            throw ConstraintError("hyperstub count of " + class_label(index, lead) + " is not a multiple of " +
                                  std::to_string(lead_size) + " after " + std::to_string(attempts) + " attempts");
        const std::uint64_t copies = sum / lead_size;

        for (std::size_t c = 1; c < own.size(); ++c) {
            const OrbitClass& partner = own[c];
            const std::size_t id = static_cast<std::size_t>(&partner - classes.data());
            const OrbitMarginal& marginal = model.marginals()[id];
            const std::uint64_t target = copies * partner.positions.size();

            if (partner.positions.size() == lead_size && describe(marginal) == describe(lead_marginal)) {
                std::vector<std::size_t> perm(n_nodes);
                std::iota(perm.begin(), perm.end(), 0);
                std::shuffle(perm.begin(), perm.end(), rng);
                for (std::size_t v = 0; v < n_nodes; ++v) seq.at(v, id) = seq.at(perm[v], lead_id);
                continue;
            }

            bool matched = false;
            const int tries = deterministic(marginal) ? 1 : options.max_attempts;
            std::uint64_t got = 0;
            for (int a = 0; a < tries && !matched; ++a) {
                got = draw_column(seq, id, marginal, rng);
                matched = got == target;
            }
            if (matched) continue;
            if (deterministic(marginal))
                throw ConstraintError("hyperstub count of " + class_label(index, partner) + " (" + std::to_string(got) +
                                      ") does not match the " + std::to_string(copies) + " copies implied by " +
                                      class_label(index, lead));
            // Nudge random nodes by one stub until the copy counts agree.
            std::uniform_int_distribution<std::size_t> pick(0, n_nodes - 1);
            while (got < target) {
                ++seq.at(pick(rng), id);
                ++got;
            }
            while (got > target) {
                const std::size_t v = pick(rng);
                if (seq.at(v, id) == 0) continue;
                --seq.at(v, id);
                --got;
            }
        }
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

struct Bins {
    std::vector<std::vector<NodeId>> bins;
};

Bins fill_bins(const HyperstubSequence& seq) {
    Bins b;
    b.bins.resize(seq.classes());
    for (std::size_t c = 0; c < seq.classes(); ++c) {
        b.bins[c].reserve(seq.column_sum(c));
        for (std::size_t v = 0; v < seq.nodes(); ++v)
            for (std::uint32_t r = 0; r < seq.at(v, c); ++r) b.bins[c].push_back(static_cast<NodeId>(v));
    }
    return b;
}

bool try_assemble(const HyperstubSequence& seq, const PositionIndex& index, Rng& rng,
                  const AssembleOptions& options, Network& out) {
    Bins bins = fill_bins(seq);
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::unordered_set<std::uint64_t> edge_set;
    std::vector<std::vector<NodeId>> provenance(index.subgraph_count());

    for (std::size_t k = 0; k < index.subgraph_count(); ++k) {
        const Subgraph& g = index.subgraph(k);
        const auto own = index.classes_of(k);
        const std::size_t copies = bins.bins[index.slot(own.front().positions.front()).orbit_class].size() /
                                   own.front().positions.size();
        const auto g_edges = g.edges();
        const int n = g.size();
        std::vector<std::size_t> class_of(static_cast<std::size_t>(n));
        for (int u = 0; u < n; ++u) class_of[static_cast<std::size_t>(u)] = index.slot(index.position_of(k, u)).orbit_class;

        std::vector<std::size_t> picked(static_cast<std::size_t>(n));
        std::vector<NodeId> nodes(static_cast<std::size_t>(n));
        for (std::size_t copy = 0; copy < copies; ++copy) {
            bool placed = false;
            for (int attempt = 0; attempt < options.retries_per_copy && !placed; ++attempt) {
                // Distinct bin slots for positions sharing a bin.
                for (int u = 0; u < n; ++u) {
                    auto& bin = bins.bins[class_of[static_cast<std::size_t>(u)]];
                    std::uniform_int_distribution<std::size_t> pick(0, bin.size() - 1);
                    bool fresh = false;
                    while (!fresh) {
                        picked[static_cast<std::size_t>(u)] = pick(rng);
                        fresh = true;
                        for (int w = 0; w < u; ++w)
                            if (class_of[static_cast<std::size_t>(w)] == class_of[static_cast<std::size_t>(u)] &&
                                picked[static_cast<std::size_t>(w)] == picked[static_cast<std::size_t>(u)])
                                fresh = false;
                    }
                    nodes[static_cast<std::size_t>(u)] = bin[picked[static_cast<std::size_t>(u)]];
                }
                bool valid = true;
                for (int u = 0; u < n && valid; ++u)
                    for (int w = u + 1; w < n && valid; ++w)
                        if (nodes[static_cast<std::size_t>(u)] == nodes[static_cast<std::size_t>(w)]) valid = false;
                for (const auto& [u, w] : g_edges) {
                    if (!valid) break;
                    if (edge_set.contains(edge_key(nodes[static_cast<std::size_t>(u)], nodes[static_cast<std::size_t>(w)])))
                        valid = false;
                }
                if (!valid) continue;

                for (const auto& [u, w] : g_edges) {
                    const NodeId a = nodes[static_cast<std::size_t>(u)];
                    const NodeId b = nodes[static_cast<std::size_t>(w)];
                    edge_set.insert(edge_key(a, b));
                    edges.emplace_back(std::min(a, b), std::max(a, b));
                }
                provenance[k].insert(provenance[k].end(), nodes.begin(), nodes.end());

                // Remove picked slots, highest index first within each bin.
                std::vector<std::pair<std::size_t, std::size_t>> removal;
                for (int u = 0; u < n; ++u)
                    removal.emplace_back(class_of[static_cast<std::size_t>(u)], picked[static_cast<std::size_t>(u)]);
                std::sort(removal.begin(), removal.end(), [](const auto& x, const auto& y) {
                    return x.first != y.first ? x.first < y.first : x.second > y.second;
                });
                for (const auto& [cls, slot] : removal) {
                    auto& bin = bins.bins[cls];
                    bin[slot] = bin.back();
                    bin.pop_back();
                }
                placed = true;
            }
            if (!placed) return false;
        }
    }
    out = Network(seq.nodes(), std::move(edges));
    out.provenance = std::move(provenance);
    return true;
}

} // namespace

Network assemble(const HyperstubSequence& seq, const PositionIndex& index, std::uint64_t seed,
                 const AssembleOptions& options) {
    const auto& classes = index.orbit_classes();
    if (seq.classes() != classes.size())
        throw ValidationError("sequence has " + std::to_string(seq.classes()) + " columns, model has " +
                              std::to_string(classes.size()) + " orbit classes");
    for (std::size_t k = 0; k < index.subgraph_count(); ++k) {
        const auto own = index.classes_of(k);
        std::uint64_t copies = 0;
        for (std::size_t c = 0; c < own.size(); ++c) {
            const std::size_t id = static_cast<std::size_t>(&own[c] - classes.data());
            const std::uint64_t sum = seq.column_sum(id);
            if (sum % own[c].positions.size() != 0)
                throw ConstraintError("hyperstub count of " + class_label(index, own[c]) + " is not a multiple of " +
                                      std::to_string(own[c].positions.size()));
            const std::uint64_t implied = sum / own[c].positions.size();
            if (c == 0) copies = implied;
            else if (implied != copies)
                throw ConstraintError("orbits of '" + index.subgraph(k).id() + "' imply different copy counts");
        }
        if (copies > 0 && seq.nodes() < static_cast<std::size_t>(index.subgraph(k).size()))
            throw ConstraintError("network too small for '" + index.subgraph(k).id() + "'");
    }

    Rng rng(seed);
    Network out;
    for (int r = 0; r <= options.restarts; ++r)
        if (try_assemble(seq, index, rng, options, out)) return out;
    throw ConstraintError("hyperstub wiring failed after " + std::to_string(options.restarts + 1) +
                          " attempts; regenerate the sequence");
}

Network generate_network(const NetworkModel& model, std::size_t n_nodes, std::uint64_t seed, int max_resamples) {
    for (int r = 0;; ++r) {
        try {
            const HyperstubSequence seq = sample_sequences(model, n_nodes, derive_seed(seed, 2 * static_cast<std::uint64_t>(r)));
            return assemble(seq, model.index(), derive_seed(seed, 2 * static_cast<std::uint64_t>(r) + 1));
        } catch (const ConstraintError&) {
            if (r + 1 >= max_resamples) throw;
        }
    }
}

// ---------------------------------------------------------------------------
// Metrics and I/O

NetworkMetrics measure(const Network& net) {
    NetworkMetrics m;
    const std::size_t n = net.size();
    if (n == 0) return m;
    double sum = 0.0, sum2 = 0.0;
    for (NodeId v = 0; v < n; ++v) {
        const double d = static_cast<double>(net.degree(v));
        sum += d;
        sum2 += d * d;
        m.paths2 += net.degree(v) * (net.degree(v) - 1) / 2;  // zero when degree is 0
    }
    m.mean_degree = sum / static_cast<double>(n);
    m.degree_variance = sum2 / static_cast<double>(n) - m.mean_degree * m.mean_degree;

    for (const auto& [u, v] : net.edges()) {
        // count common neighbours w > max(u, v) so each triangle is seen once
        const NodeId hi = std::max(u, v);
        const auto a = net.neighbours(u);
        const auto b = net.neighbours(v);
        auto ia = std::upper_bound(a.begin(), a.end(), hi);
        auto ib = std::upper_bound(b.begin(), b.end(), hi);
        while (ia != a.end() && ib != b.end()) {
            if (*ia < *ib) ++ia;
            else if (*ib < *ia) ++ib;
            else {
                ++m.triangles;
                ++ia;
                ++ib;
            }
        }
    }
    m.global_clustering = m.paths2 > 0 ? 3.0 * static_cast<double>(m.triangles) / static_cast<double>(m.paths2) : 0.0;
    return m;
}

void write_edge_list(std::ostream& out, const Network& net) {
    out << net.size() << '\n';
    for (const auto& [u, v] : net.edges()) out << u << ' ' << v << '\n';
}

Network read_edge_list(std::istream& in) {
    std::size_t n = 0;
    if (!(in >> n)) throw ValidationError("edge list: missing node count header");
    std::vector<std::pair<NodeId, NodeId>> edges;
    long long u = 0, v = 0;
    while (in >> u >> v) {
        if (u < 0 || v < 0) throw ValidationError("edge list: negative node id");
        edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
    if (!in.eof()) throw ValidationError("edge list: malformed line");
    return Network(n, std::move(edges));
}

void write_metrics_csv(std::ostream& out, std::span<const std::pair<std::string, NetworkMetrics>> rows) {
    out << "label,mean_degree,degree_variance,triangles,paths2,global_clustering\n";
    out.precision(10);
    for (const auto& [label, m] : rows)
        out << label << ',' << m.mean_degree << ',' << m.degree_variance << ',' << m.triangles << ',' << m.paths2
            << ',' << m.global_clustering << '\n';
}

} // namespace hcm
