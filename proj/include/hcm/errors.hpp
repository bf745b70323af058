#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hcm {

/// Malformed input: bad adjacency, unknown subgraph name, dimension mismatch,
/// parameter outside its domain.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A hyperstub sequence could not be made to satisfy its cardinality
/// constraints, or could not be wired into a simple graph.
class ConstraintError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Integration or root-finding failure (step-size underflow, conservation
/// violation, infeasible linear system).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every simulated run died out before reaching the outbreak threshold.
class NoOutbreakError : public std::runtime_error {
public:
    NoOutbreakError(std::size_t total, std::size_t discarded)
        : std::runtime_error("no outbreaks: " + std::to_string(discarded) + " of " + std::to_string(total) +
                             " runs discarded"),
          total_runs(total), discarded_runs(discarded) {}
    std::size_t total_runs;
    std::size_t discarded_runs;
};

} // namespace hcm
