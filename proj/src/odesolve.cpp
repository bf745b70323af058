#include "hcm/odesolve.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "hcm/errors.hpp"

namespace hcm {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// continuous extension (Hairer, Norsett & Wanner, dopri5)
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

} // namespace

OdeStats integrate_dopri(const OdeRhs& rhs, std::vector<double> y, double t_end, double rel_tol, double abs_tol,
                         double h_out, const GridObserver& observer) {
    if (!(t_end > 0.0)) throw ValidationError("t_end must be positive");
    if (!(rel_tol > 0.0 && rel_tol <= 1e-2) || !(abs_tol > 0.0 && abs_tol <= 1e-2))
        throw ValidationError("tolerances must lie in (0, 1e-2]");
    if (!(h_out > 0.0)) throw ValidationError("h_out must be positive");

    const std::size_t n = y.size();
    const auto grid_points = static_cast<std::size_t>(std::llround(t_end / h_out));
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), dense(n);
    OdeStats stats;
    auto f = [&](double t, const std::vector<double>& in, std::vector<double>& out) {
        rhs(t, in, out);
        ++stats.rhs_calls;
    };

    double t = 0.0;
    f(t, y, k1);
    observer(0.0, y);
    std::size_t next_grid = 1;

    double h = std::min(h_out, 1e-3);
    const std::size_t max_steps = 10'000'000;
    while (next_grid <= grid_points) {
        if (stats.accepted + stats.rejected > max_steps) throw NumericalError("step limit exceeded at t = " + std::to_string(t));
        const double t_final = static_cast<double>(grid_points) * h_out;
        h = std::min(h, t_final - t);
        if (h < 1e-12 * std::max(1.0, std::abs(t))) {
            std::ostringstream msg;
            msg << "step-size underflow (stiff system?) at t = " << t;
            throw NumericalError(msg.str());
        }

        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        f(t + c2 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(t + c3 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(t + c4 * h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        f(t + c5 * h, tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        f(t + h, tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            y_new[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        f(t + h, y_new, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double scale = abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            err += (e / scale) * (e / scale);
        }
        err = std::sqrt(err / static_cast<double>(std::max<std::size_t>(n, 1)));
        if (!std::isfinite(err)) err = 1e10;

        if (err > 1.0) {
            ++stats.rejected;
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            continue;
        }
        ++stats.accepted;

        const double t_new = t + h;
        while (next_grid <= grid_points) {
            const double tg = static_cast<double>(next_grid) * h_out;
            if (tg > t_new + 1e-12 * h_out) break;
            const double s = std::clamp((tg - t) / h, 0.0, 1.0);
            const double s1 = 1.0 - s;
            for (std::size_t i = 0; i < n; ++i) {
                const double diff = y_new[i] - y[i];
                const double bspl = h * k1[i] - diff;
                const double r4 = diff - h * k7[i] - bspl;
                const double r5 =
                    h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
                dense[i] = y[i] + s * (diff + s1 * (bspl + s * (r4 + s1 * r5)));
            }
            observer(tg, dense);
            ++next_grid;
        }

        t = t_new;
        y.swap(y_new);
        k1.swap(k7);
        h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
    }
    return stats;
}

IntegrationReport integrate(const CompiledSystem& system, const IntegrateOptions& options) {
    IntegrationReport report;
    EpidemicTrace& trace = report.trace;
    const std::size_t subgraphs = system.index().subgraph_count();

    std::vector<double> mass0;
    const std::vector<double> y0 = system.initial_conditions();
    for (std::size_t k = 0; k < subgraphs; ++k) mass0.push_back(system.subgraph_mass(y0, k));

    if (options.record_states)
        for (std::size_t k = 0; k < subgraphs; ++k) {
            const auto& z = system.rate_matrices()[k];
            for (std::size_t s = 0; s < z.states.size(); ++s)
                trace.state_names.push_back(system.index().subgraph(k).id() + "_" + z.states.label(s));
        }

    const double abort_level = 100.0 * options.rel_tol;
    auto observer = [&](double t, std::span<const double> y) {
        const double s = system.susceptible(y);
        const double i = system.infected(y);
        const double r = system.recovered(y);
        trace.t.push_back(t);
        trace.S.push_back(s);
        trace.I.push_back(i);
        trace.R.push_back(r);
        const double drift = std::abs(s + i + r - 1.0);
        report.max_conservation_error = std::max(report.max_conservation_error, drift);
        if (drift > abort_level) {
            std::ostringstream msg;
            msg << "conservation violated at t = " << t << ": |S+I+R-1| = " << drift;
            throw NumericalError(msg.str());
        }
        for (std::size_t k = 0; k < subgraphs; ++k)
            report.max_mass_drift = std::max(report.max_mass_drift, std::abs(system.subgraph_mass(y, k) - mass0[k]));
        if (options.record_states) {
            std::vector<double> row;
            for (std::size_t k = 0; k < subgraphs; ++k) {
                const std::size_t off = system.state_offset(k);
                const std::size_t len = system.rate_matrices()[k].states.size();
                row.insert(row.end(), y.begin() + static_cast<std::ptrdiff_t>(off),
                           y.begin() + static_cast<std::ptrdiff_t>(off + len));
            }
            trace.states.push_back(std::move(row));
        }
    };

    report.stats = integrate_dopri([&system](double, std::span<const double> y, std::span<double> dy) { system.rhs(y, dy); },
                                   y0, options.t_end, options.rel_tol, options.abs_tol, options.h_out, observer);

    const EpidemicParams& p = system.params();
    std::ostringstream fmt;
    fmt.precision(17);
    auto num = [&fmt](double v) {
        fmt.str("");
        fmt << v;
        return fmt.str();
    };
    trace.metadata["source"] = "ode";
    trace.metadata["tau"] = num(p.tau);
    trace.metadata["gamma"] = num(p.gamma);
    trace.metadata["epsilon"] = num(p.epsilon);
    trace.metadata["equations"] = std::to_string(system.equation_count());
    trace.metadata["rel_tol"] = num(options.rel_tol);
    trace.metadata["abs_tol"] = num(options.abs_tol);
    return report;
}

Peak infected_peak(const EpidemicTrace& trace) {
    if (trace.I.empty()) return {};
    const auto it = std::max_element(trace.I.begin(), trace.I.end());
    const std::size_t k = static_cast<std::size_t>(it - trace.I.begin());
    Peak p{*it, trace.t[k]};
    if (k > 0 && k + 1 < trace.I.size()) {
        const double ym = trace.I[k - 1], y0 = trace.I[k], yp = trace.I[k + 1];
        const double denom = ym - 2 * y0 + yp;
        if (denom < 0.0) {
            const double h = trace.t[k + 1] - trace.t[k];
            const double shift = 0.5 * (ym - yp) / denom;
            p.time = trace.t[k] + shift * h;
            p.value = y0 - 0.25 * (ym - yp) * shift;
        }
    }
    return p;
}

void write_trace_csv(std::ostream& out, const EpidemicTrace& trace) {
    out << "t,S,I,R";
    for (const auto& name : trace.state_names) out << ',' << name;
    out << '\n';
    out.precision(12);
    for (std::size_t k = 0; k < trace.size(); ++k) {
        out << trace.t[k] << ',' << trace.S[k] << ',' << trace.I[k] << ',' << trace.R[k];
        if (!trace.states.empty())
            for (double v : trace.states[k]) out << ',' << v;
        out << '\n';
    }
}

EpidemicTrace read_trace_csv(std::istream& in) {
    EpidemicTrace trace;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("trace CSV: empty input");
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 4 || header[0] != "t" || header[1] != "S" || header[2] != "I" || header[3] != "R")
        throw ValidationError("trace CSV: header must start with t,S,I,R");
    trace.state_names.assign(header.begin() + 4, header.end());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ValidationError("trace CSV: bad number '" + cell + "'");
            }
        }
        if (row.size() != header.size()) throw ValidationError("trace CSV: row has wrong column count");
        trace.t.push_back(row[0]);
        trace.S.push_back(row[1]);
        trace.I.push_back(row[2]);
        trace.R.push_back(row[3]);
        if (row.size() > 4) trace.states.emplace_back(row.begin() + 4, row.end());
    }
    return trace;
}

} // namespace hcm
