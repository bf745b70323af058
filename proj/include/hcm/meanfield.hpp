#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hcm/pgf.hpp"

namespace hcm {

enum class Compartment : std::uint8_t { S = 0, I = 1, R = 2 };

/*
 * The 3^n SIR states of an n-node subgraph, encoded base 3 with S=0, I=1,
 * R=2 and node 0 as the most significant digit, so the edge enumerates
 * SS, SI, SR, IS, II, IR, RS, RI, RR.
 */
class StateSpace {
public:
    explicit StateSpace(int nodes);

    int nodes() const noexcept { return n_; }
    std::size_t size() const noexcept { return size_; }
    Compartment at(std::size_t state, int node) const;
    std::size_t with(std::size_t state, int node, Compartment c) const;
    std::size_t encode(std::span<const Compartment> nodes) const;
    std::string label(std::size_t state) const;
    /// Inverse of label(); throws ValidationError on bad input.
    std::size_t parse(const std::string& label) const;

private:
    int n_;
    std::size_t size_;
    std::vector<std::size_t> weight_;  // 3^(n-1-node)
};

struct TTerm {
    std::size_t state = 0;
    int multiplicity = 0;

    friend bool operator==(const TTerm&, const TTerm&) = default;
};

/// T_i = tau * sum multiplicity * G_{subgraph(i)}(state), for each position i.
struct TAssembly {
    std::vector<std::vector<TTerm>> terms;
};

TAssembly build_T(const PositionIndex& index);

/// Symbolic rate a*tau + b*gamma + sum c*(T Delta)_position.
struct RateExpr {
    int tau = 0;
    int gamma = 0;
    std::vector<std::pair<std::size_t, int>> flux;  // (global position, coefficient)

    friend bool operator==(const RateExpr&, const RateExpr&) = default;
};

struct RateEntry {
    std::size_t from = 0;
    std::size_t to = 0;
    RateExpr rate;
};

/// Sparse per-subgraph transition-rate matrix; entries sorted by (from, to).
struct RateMatrixZ {
    std::size_t subgraph = 0;
    StateSpace states{2};
    std::vector<RateEntry> entries;

    /// Zero expression when (from, to) has no entry.
    RateExpr at(std::size_t from, std::size_t to) const;
};

RateMatrixZ build_Z(const PositionIndex& index, std::size_t subgraph);

struct EpidemicParams {
    double tau = 1.0;
    double gamma = 1.0;
    double epsilon = 0.01;
};

enum class InitialSeeding {
    /// every single-I state starts at J_p * epsilon
    PerState,
    /// the subgraph's epsilon mass J * epsilon is shared equally by its
    /// single-I states
    Split,
};

/*
 * The compiled mean-field ODE system. State vector layout:
 *   [G_1 states | ... | G_M states | theta_1..theta_m | I | R]
 * with 2 + m + sum 3^{|G_k|} entries.
 */
class CompiledSystem {
public:
    CompiledSystem(const NetworkModel& model, const EpidemicParams& params,
                   InitialSeeding seeding = InitialSeeding::PerState);

    std::size_t equation_count() const noexcept { return size_; }
    std::size_t position_count() const noexcept { return m_; }
    const PositionIndex& index() const noexcept { return index_; }
    const EpidemicParams& params() const noexcept { return params_; }
    const TAssembly& t_assembly() const noexcept { return t_; }
    const std::vector<RateMatrixZ>& rate_matrices() const noexcept { return z_; }
    const JointHyperstubPgf& pgf() const noexcept { return pgf_; }

    std::size_t state_offset(std::size_t subgraph) const { return state_offsets_.at(subgraph); }
    std::size_t theta_offset() const noexcept { return theta_offset_; }
    std::size_t infected_offset() const noexcept { return size_ - 2; }
    std::size_t recovered_offset() const noexcept { return size_ - 1; }

    std::vector<double> initial_conditions() const;
    void rhs(std::span<const double> y, std::span<double> dydt) const;

    /// T_i for the given state vector.
    std::vector<double> transmission(std::span<const double> y) const;
    /// S = (1 - epsilon) psi(theta)
    double susceptible(std::span<const double> y) const;
    double infected(std::span<const double> y) const { return y[infected_offset()]; }
    double recovered(std::span<const double> y) const { return y[recovered_offset()]; }
    /// Sum of the state expectations of one subgraph.
    double subgraph_mass(std::span<const double> y, std::size_t subgraph) const;

    /// Human-readable system: T definitions, one ODE per state, theta and
    /// prevalence equations.
    void dump(std::ostream& out) const;
    /// CSV rows (subgraph, row_state, col_state, tau, gamma, flux).
    void dump_z_csv(std::ostream& out) const;

private:
    NetworkModel model_;
    PositionIndex index_;
    JointHyperstubPgf pgf_;
    EpidemicParams params_;
    InitialSeeding seeding_;
    TAssembly t_;
    std::vector<RateMatrixZ> z_;
    std::vector<std::size_t> state_offsets_;
    std::vector<int> stubs_;  // subgraph-internal degree per position, for dump
    std::size_t theta_offset_ = 0;
    std::size_t m_ = 0;
    std::size_t size_ = 0;
};

std::string format_rate(const RateExpr& rate);

} // namespace hcm
