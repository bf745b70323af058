#include "hcm/pgf.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "hcm/errors.hpp"

namespace hcm {

namespace {

double ipow(double base, int exponent) {
    double out = 1.0;
    for (int k = 0; k < exponent; ++k) out *= base;
    return out;
}

struct TermValue {
    double g, dg, d2g;
};

TermValue evaluate_term(const MarginalTerm& term, double u) {
    return std::visit(
        [u](const auto& t) -> TermValue {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, Poisson>) {
                const double g = std::exp(t.rate * (u - 1.0));
                return {g, t.rate * g, t.rate * t.rate * g};
            } else if constexpr (std::is_same_v<T, ScaledPoisson>) {
                const int c = t.multiplier;
                const double g = std::exp(t.rate * (ipow(u, c) - 1.0));
                const double slope = t.rate * c * ipow(u, c - 1);
                const double curvature = c >= 2 ? t.rate * c * (c - 1) * ipow(u, c - 2) : 0.0;
                return {g, slope * g, (slope * slope + curvature) * g};
            } else {
                const int n = t.count;
                const double dg = n >= 1 ? n * ipow(u, n - 1) : 0.0;
                const double d2g = n >= 2 ? n * (n - 1) * ipow(u, n - 2) : 0.0;
                return {ipow(u, n), dg, d2g};
            }
        },
        term);
}

} // namespace

double OrbitMarginal::mean() const {
    double total = 0.0;
    for (const auto& term : terms)
        total += std::visit(
            [](const auto& t) -> double {
                using T = std::decay_t<decltype(t)>;
                if constexpr (std::is_same_v<T, Poisson>) return t.rate;
                else if constexpr (std::is_same_v<T, ScaledPoisson>) return t.multiplier * t.rate;
                else return static_cast<double>(t.count);
            },
            term);
    return total;
}

double OrbitMarginal::variance() const {
    double total = 0.0;
    for (const auto& term : terms)
        total += std::visit(
            [](const auto& t) -> double {
                using T = std::decay_t<decltype(t)>;
                if constexpr (std::is_same_v<T, Poisson>) return t.rate;
                else if constexpr (std::is_same_v<T, ScaledPoisson>)
                    return static_cast<double>(t.multiplier) * t.multiplier * t.rate;
                else return 0.0;
            },
            term);
    return total;
}

void OrbitMarginal::evaluate(double u, double& g, double& dg, double& d2g) const {
    const std::size_t n = terms.size();
    std::vector<TermValue> v;
    v.reserve(n);
    for (const auto& t : terms) v.push_back(evaluate_term(t, u));

    g = 1.0;
    for (const auto& tv : v) g *= tv.g;
    dg = 0.0;
    d2g = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double rest = 1.0;
        for (std::size_t l = 0; l < n; ++l)
            if (l != k) rest *= v[l].g;
        dg += v[k].dg * rest;
        d2g += v[k].d2g * rest;
        for (std::size_t l = k + 1; l < n; ++l) {
            double rest2 = 1.0;
            for (std::size_t q = 0; q < n; ++q)
                if (q != k && q != l) rest2 *= v[q].g;
            d2g += 2.0 * v[k].dg * v[l].dg * rest2;
        }
    }
}

void OrbitMarginal::validate() const {
    for (const auto& term : terms)
        std::visit(
            [](const auto& t) {
                using T = std::decay_t<decltype(t)>;
                if constexpr (std::is_same_v<T, Poisson>) {
                    if (!(t.rate >= 0.0) || !std::isfinite(t.rate))
                        throw ValidationError("Poisson rate must be finite and >= 0");
                } else if constexpr (std::is_same_v<T, ScaledPoisson>) {
                    if (!(t.rate >= 0.0) || !std::isfinite(t.rate))
                        throw ValidationError("scaled Poisson rate must be finite and >= 0");
                    if (t.multiplier < 1) throw ValidationError("scaled Poisson multiplier must be >= 1");
                } else {
                    if (t.count < 0) throw ValidationError("exact count must be >= 0");
                }
            },
            term);
}

std::string describe(const OrbitMarginal& m) {
    if (m.terms.empty()) return "0";
    std::ostringstream out;
    for (std::size_t k = 0; k < m.terms.size(); ++k) {
        if (k) out << " + ";
        std::visit(
            [&out](const auto& t) {
                using T = std::decay_t<decltype(t)>;
                if constexpr (std::is_same_v<T, Poisson>) out << "Pois(" << t.rate << ")";
                else if constexpr (std::is_same_v<T, ScaledPoisson>)
                    out << t.multiplier << "Pois(" << t.rate << ")";
                else out << "Exact(" << t.count << ")";
            },
            m.terms[k]);
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// NetworkModel

NetworkModel::NetworkModel(std::vector<Subgraph> subgraphs, std::vector<OrbitMarginal> marginals)
    : pending_(std::move(subgraphs)), marginals_(std::move(marginals)) {
    if (pending_.empty()) {
        if (!marginals_.empty()) throw ValidationError("marginals given for an empty model");
        return;
    }
    index_.emplace(pending_);
    if (marginals_.size() != index_->orbit_classes().size())
        throw ValidationError("model has " + std::to_string(index_->orbit_classes().size()) +
                              " orbit classes but " + std::to_string(marginals_.size()) + " marginals");
    for (const auto& m : marginals_) m.validate();
}

NetworkModel NetworkModel::from_rates(std::vector<Subgraph> subgraphs, std::span<const double> rates) {
    if (subgraphs.size() != rates.size()) throw ValidationError("one rate per subgraph required");
    NetworkModel model;
    for (std::size_t k = 0; k < subgraphs.size(); ++k) {
        const OrbitPartition part = compute_orbits(subgraphs[k]);
        const double n = subgraphs[k].size();
        std::vector<OrbitMarginal> per_orbit;
        for (const auto& orbit : part.orbits)
            per_orbit.emplace_back(Poisson{rates[k] * static_cast<double>(orbit.size()) / n});
        model.add(subgraphs[k], std::move(per_orbit));
    }
    return model;
}

const PositionIndex& NetworkModel::index() const {
    if (!index_) throw ValidationError("model has no subgraphs");
    return *index_;
}

std::size_t NetworkModel::max_subgraph_size() const {
    std::size_t out = 0;
    for (const auto& g : pending_) out = std::max(out, static_cast<std::size_t>(g.size()));
    return out;
}

NetworkModel& NetworkModel::add(Subgraph g, const OrbitMarginal& marginal) {
    const std::size_t orbits = compute_orbits(g).orbits.size();
    return add(std::move(g), std::vector<OrbitMarginal>(orbits, marginal));
}

NetworkModel& NetworkModel::add(Subgraph g, std::vector<OrbitMarginal> per_orbit) {
    if (compute_orbits(g).orbits.size() != per_orbit.size())
        throw ValidationError("subgraph '" + g.id() + "' needs one marginal per orbit");
    for (const auto& m : per_orbit) m.validate();
    pending_.push_back(std::move(g));
    index_.emplace(pending_);
    for (auto& m : per_orbit) marginals_.push_back(std::move(m));
    return *this;
}

// ---------------------------------------------------------------------------
// JointHyperstubPgf

JointHyperstubPgf::JointHyperstubPgf(const NetworkModel& model) {
    const PositionIndex& index = model.index();
    m_ = index.size();
    orbit_of_position_.assign(m_, 0);
    const auto& classes = index.orbit_classes();
    for (std::size_t o = 0; o < classes.size(); ++o) {
        orbits_.push_back({model.marginals()[o], classes[o].positions});
        for (std::size_t p : classes[o].positions) orbit_of_position_[p] = o;
    }
}

void JointHyperstubPgf::check(std::span<const double> theta) const {
    if (theta.size() != m_)
        throw ValidationError("PGF argument has dimension " + std::to_string(theta.size()) + ", expected " +
                              std::to_string(m_));
}

void JointHyperstubPgf::orbit_values(std::span<const double> theta, std::vector<double>& g,
                                     std::vector<double>& dg, std::vector<double>& d2g) const {
    const std::size_t n = orbits_.size();
    g.resize(n);
    dg.resize(n);
    d2g.resize(n);
    for (std::size_t o = 0; o < n; ++o) {
        double u = 0.0;
        for (std::size_t p : orbits_[o].positions) u += theta[p];
        u /= static_cast<double>(orbits_[o].positions.size());
        orbits_[o].marginal.evaluate(u, g[o], dg[o], d2g[o]);
    }
}

double JointHyperstubPgf::eval(std::span<const double> theta) const {
    check(theta);
    std::vector<double> g, dg, d2g;
    orbit_values(theta, g, dg, d2g);
    double out = 1.0;
    for (double v : g) out *= v;
    return out;
}

Eigen::VectorXd JointHyperstubPgf::gradient(std::span<const double> theta) const {
    return derivatives(theta).gradient;
}

Eigen::MatrixXd JointHyperstubPgf::hessian(std::span<const double> theta) const {
    return derivatives(theta).hessian;
}

PgfDerivatives JointHyperstubPgf::derivatives(std::span<const double> theta) const {
    check(theta);
    std::vector<double> g, dg, d2g;
    orbit_values(theta, g, dg, d2g);
    const std::size_t n = orbits_.size();

    // Products of g over all orbits except one / except two, without division
    // (g may vanish for exact counts at zero).
    std::vector<double> prefix(n + 1, 1.0), suffix(n + 1, 1.0);
    for (std::size_t o = 0; o < n; ++o) prefix[o + 1] = prefix[o] * g[o];
    for (std::size_t o = n; o > 0; --o) suffix[o - 1] = suffix[o] * g[o - 1];
    auto except_one = [&](std::size_t o) { return prefix[o] * suffix[o + 1]; };
    auto except_two = [&](std::size_t a, std::size_t b) {
        double out = 1.0;
        for (std::size_t o = 0; o < n; ++o)
            if (o != a && o != b) out *= g[o];
        return out;
    };

    PgfDerivatives out;
    out.value = prefix[n];
    out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    out.hessian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));

    std::vector<double> scaled_dg(n);
    for (std::size_t o = 0; o < n; ++o) {
        const double s = static_cast<double>(orbits_[o].positions.size());
        const double rest = except_one(o);
        scaled_dg[o] = dg[o] / s;
        const double grad = scaled_dg[o] * rest;
        const double diag = d2g[o] / (s * s) * rest;
        for (std::size_t i : orbits_[o].positions) {
            out.gradient(static_cast<Eigen::Index>(i)) = grad;
            for (std::size_t j : orbits_[o].positions)
                out.hessian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = diag;
        }
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const double cross = scaled_dg[a] * scaled_dg[b] * except_two(a, b);
            for (std::size_t i : orbits_[a].positions)
                for (std::size_t j : orbits_[b].positions) {
                    out.hessian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cross;
                    out.hessian(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = cross;
                }
        }
    return out;
}

Eigen::MatrixXd JointHyperstubPgf::excess_matrix(std::span<const double> theta) const {
    const PgfDerivatives d = derivatives(theta);
    Eigen::MatrixXd delta(d.hessian.rows(), d.hessian.cols());
    for (Eigen::Index i = 0; i < delta.rows(); ++i) {
        const double j = d.gradient(i);
        if (!(j >= kJFloor))
            throw NumericalError("degenerate position x" + std::to_string(i + 1) + ": J = " + std::to_string(j) +
                                 " below floor");
        for (Eigen::Index k = 0; k < delta.cols(); ++k)
            delta(i, k) = theta[static_cast<std::size_t>(k)] * d.hessian(i, k) / j;
    }
    return delta;
}

// ---------------------------------------------------------------------------
// moments

MomentReport moments(const NetworkModel& model) {
    MomentReport report;
    if (model.empty()) return report;
    const PositionIndex& index = model.index();
    const JointHyperstubPgf pgf(model);
    const std::vector<double> ones(index.size(), 1.0);
    const PgfDerivatives d = pgf.derivatives(ones);

    // psi(z^a1, ..., z^am): G'(1) = sum a_i J_i,
    // G''(1) = sum_ij a_i a_j H_ij + sum_i a_i (a_i - 1) J_i.
    Eigen::VectorXd stubs(static_cast<Eigen::Index>(index.size()));
    double triangles = 0.0;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const PositionSlot& slot = index.slot(i);
        const Subgraph& g = index.subgraph(slot.subgraph);
        stubs(static_cast<Eigen::Index>(i)) = g.degree(slot.node);
        triangles += g.triangles_at(slot.node) * d.gradient(static_cast<Eigen::Index>(i));
    }
    const double first = stubs.dot(d.gradient);
    const double falling = stubs.dot(d.hessian * stubs) +
                           (stubs.array() * (stubs.array() - 1.0) * d.gradient.array()).sum();

    report.mean_degree = first;
    report.degree_variance = falling + first - first * first;
    report.triangles_per_node = triangles;
    report.global_clustering = falling > 0.0 ? triangles / (falling / 2.0) : 0.0;
    return report;
}

// ---------------------------------------------------------------------------
// solve_mixture

Eigen::MatrixXd contribution_matrix(std::span<const Subgraph> subgraphs) {
    Eigen::MatrixXd a(3, static_cast<Eigen::Index>(subgraphs.size()));
    for (std::size_t k = 0; k < subgraphs.size(); ++k) {
        const Subgraph& g = subgraphs[k];
        double deg = 0.0, deg2 = 0.0, tri = 0.0;
        for (int u = 0; u < g.size(); ++u) {
            deg += g.degree(u);
            deg2 += static_cast<double>(g.degree(u)) * g.degree(u);
            tri += g.triangles_at(u);
        }
        const double n = g.size();
        a(0, static_cast<Eigen::Index>(k)) = deg / n;
        a(1, static_cast<Eigen::Index>(k)) = deg2 / n;
        a(2, static_cast<Eigen::Index>(k)) = tri / n;
    }
    return a;
}

MixtureSolution solve_mixture(std::span<const Subgraph> subgraphs, const MixtureTargets& targets,
                              const std::map<std::size_t, double>& fixed) {
    if (subgraphs.empty()) throw ValidationError("solve_mixture needs at least one subgraph");
    Eigen::Vector3d b(targets.mean_degree, targets.degree_variance, targets.triangles_per_node);
    if (!b.allFinite()) throw ValidationError("mixture targets must be finite");

    const Eigen::MatrixXd a = contribution_matrix(subgraphs);
    std::vector<double> rates(subgraphs.size(), 0.0);
    std::vector<Eigen::Index> free;
    for (std::size_t k = 0; k < subgraphs.size(); ++k) {
        if (auto it = fixed.find(k); it != fixed.end()) {
            if (!(it->second >= 0.0)) throw ValidationError("pinned rates must be >= 0");
            rates[k] = it->second;
            b -= a.col(static_cast<Eigen::Index>(k)) * it->second;
        } else {
            free.push_back(static_cast<Eigen::Index>(k));
        }
    }
    for (const auto& [k, v] : fixed)
        if (k >= subgraphs.size()) throw ValidationError("pinned rate index out of range");
    if (free.size() > 16) throw ValidationError("solve_mixture supports at most 16 free rates");

    const double tol = 1e-9 * std::max(1.0, b.norm());
    double best_norm = std::numeric_limits<double>::infinity();
    double best_residual = b.norm();  // empty support
    std::vector<double> best;
    if (b.norm() <= tol) {
        best_norm = 0.0;
        best.assign(free.size(), 0.0);
    }

    // Every support set: its minimum-norm least-squares solution. The optimum
    // of the nonnegative minimum-norm problem is such a solution on its own
    // (strictly positive) support, so exhaustive enumeration finds it.
    const std::size_t subsets = std::size_t{1} << free.size();
    for (std::size_t mask = 1; mask < subsets; ++mask) {
        std::vector<Eigen::Index> cols;
        for (std::size_t k = 0; k < free.size(); ++k)
            if (mask & (std::size_t{1} << k)) cols.push_back(free[k]);
        Eigen::MatrixXd sub(3, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
        const Eigen::VectorXd x = sub.completeOrthogonalDecomposition().solve(b);
        if ((x.array() < -tol).any()) continue;
        const double residual = (sub * x - b).norm();
        best_residual = std::min(best_residual, residual);
        if (residual > tol) continue;
        const double norm = x.norm();
        if (norm < best_norm - 1e-14) {
            best_norm = norm;
            best.assign(free.size(), 0.0);
            for (std::size_t c = 0, k = 0; k < free.size(); ++k)
                if (mask & (std::size_t{1} << k)) best[k] = std::max(0.0, x(static_cast<Eigen::Index>(c++)));
        }
    }
    if (best.size() != free.size() || !std::isfinite(best_norm)) {
        std::ostringstream msg;
        msg << "no nonnegative mixture reproduces the targets; least-squares residual " << best_residual;
        throw NumericalError(msg.str());
    }
    for (std::size_t k = 0; k < free.size(); ++k) rates[static_cast<std::size_t>(free[k])] = best[k];

    MixtureSolution out;
    out.rates = rates;
    Eigen::VectorXd lambda = Eigen::Map<const Eigen::VectorXd>(rates.data(), static_cast<Eigen::Index>(rates.size()));
    out.residual = (a * lambda - Eigen::Vector3d(targets.mean_degree, targets.degree_variance,
                                                 targets.triangles_per_node))
                       .norm();
    return out;
}

} // namespace hcm
