#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hcm/meanfield.hpp"

namespace hcm {

/// Time series of prevalences on a uniform grid, optionally with per-state
/// subgraph expectations.
struct EpidemicTrace {
    std::vector<double> t, S, I, R;
    std::vector<std::string> state_names;
    std::vector<std::vector<double>> states;  // states[grid point][column]
    std::map<std::string, std::string> metadata;

    std::size_t size() const noexcept { return t.size(); }
};

struct Peak {
    double value = 0.0;
    double time = 0.0;
};

/// Largest I on the grid, refined by a parabola through its neighbours.
Peak infected_peak(const EpidemicTrace& trace);

void write_trace_csv(std::ostream& out, const EpidemicTrace& trace);
EpidemicTrace read_trace_csv(std::istream& in);

using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;
using GridObserver = std::function<void(double t, std::span<const double> y)>;

struct OdeStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_calls = 0;
};

/*
 * Dormand-Prince 5(4) with standard step control. The observer is
 * called at t = 0, h_out, 2 h_out, ..., t_end with values from the
 * method's 4th-order continuous extension. Throws NumericalError on step-size
 * underflow.
 */
OdeStats integrate_dopri(const OdeRhs& rhs, std::vector<double> y0, double t_end, double rel_tol, double abs_tol,
                         double h_out, const GridObserver& observer);

struct IntegrateOptions {
    double t_end = 15.0;
    double rel_tol = 1e-6;
    double abs_tol = 1e-8;
    double h_out = 0.01;
    bool record_states = false;
};

struct IntegrationReport {
    EpidemicTrace trace;
    double max_conservation_error = 0.0;  // max |S+I+R-1|
    double max_mass_drift = 0.0;          // max over subgraphs of |mass(t) - mass(0)|
    OdeStats stats;
};

/// Integrates the compiled system. Aborts with NumericalError when
/// |S+I+R-1| exceeds 100 * rel_tol.
IntegrationReport integrate(const CompiledSystem& system, const IntegrateOptions& options = {});

} // namespace hcm
