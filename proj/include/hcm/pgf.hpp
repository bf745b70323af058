#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hcm/subgraph.hpp"

namespace hcm {

/// count ~ Poisson(rate)
struct Poisson {
    double rate = 0.0;
};
/// count = multiplier * K, K ~ Poisson(rate)
struct ScaledPoisson {
    int multiplier = 1;
    double rate = 0.0;
};
/// count = n exactly
struct ExactCount {
    int count = 0;
};

using MarginalTerm = std::variant<Poisson, ScaledPoisson, ExactCount>;

/*
 * Distribution of the number of hyperstubs a node holds in one orbit class.
 * The count is a sum of independent terms, so the orbit PGF is the product of
 * the term PGFs. The orbit count is spread uniformly over the orbit's
 * positions: with u the mean of the orbit's alpha components the orbit
 * contributes g(u) to psi. For Poisson terms this is exact thinning.
 */
struct OrbitMarginal {
    std::vector<MarginalTerm> terms;

    OrbitMarginal() = default;
    OrbitMarginal(MarginalTerm t) : terms{t} {}  // NOLINT(google-explicit-constructor)
    OrbitMarginal(Poisson t) : terms{t} {}        // NOLINT
    OrbitMarginal(ScaledPoisson t) : terms{t} {}  // NOLINT
    OrbitMarginal(ExactCount t) : terms{t} {}     // NOLINT
    OrbitMarginal(std::vector<MarginalTerm> ts) : terms(std::move(ts)) {}  // NOLINT

    double mean() const;
    double variance() const;
    /// g(u), g'(u), g''(u)
    void evaluate(double u, double& g, double& dg, double& d2g) const;
    /// Throws ValidationError on negative rates or non-positive multipliers.
    void validate() const;
};

std::string describe(const OrbitMarginal& m);

/*
 * Generative specification: a subgraph set and one marginal per orbit class
 * (orbit classes in PositionIndex order). Orbits are independent.
 */
class NetworkModel {
public:
    NetworkModel() = default;
    NetworkModel(std::vector<Subgraph> subgraphs, std::vector<OrbitMarginal> marginals);

    /// Every orbit of every subgraph gets Poisson(rate * orbit_size / |G|), so
    /// `rate` is the expected number of memberships per node. For single-orbit
    /// subgraphs this is simply Poisson(rate) on the orbit.
    static NetworkModel from_rates(std::vector<Subgraph> subgraphs, std::span<const double> rates);

    bool empty() const noexcept { return !index_.has_value(); }
    const PositionIndex& index() const;
    const std::vector<OrbitMarginal>& marginals() const noexcept { return marginals_; }
    std::size_t max_subgraph_size() const;

    /// Builder: the same marginal on every orbit of `g`.
    NetworkModel& add(Subgraph g, const OrbitMarginal& marginal);
    /// Builder: one marginal per orbit of `g` (local orbit order).
    NetworkModel& add(Subgraph g, std::vector<OrbitMarginal> per_orbit);

private:
    std::vector<Subgraph> pending_;
    std::optional<PositionIndex> index_;
    std::vector<OrbitMarginal> marginals_;
};

/// Value, gradient and Hessian of psi at one point.
struct PgfDerivatives {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

/*
 * Joint hyperstub PGF over the m global positions,
 *   psi(alpha) = prod_orbits g_o(mean of alpha over the orbit's positions).
 * Derivatives are closed form per family.
 */
class JointHyperstubPgf {
public:
    explicit JointHyperstubPgf(const NetworkModel& model);

    std::size_t dimension() const noexcept { return m_; }

    double eval(std::span<const double> theta) const;
    Eigen::VectorXd gradient(std::span<const double> theta) const;
    Eigen::MatrixXd hessian(std::span<const double> theta) const;
    PgfDerivatives derivatives(std::span<const double> theta) const;

    /// Delta[i][j] = theta_j * H[i][j] / J[i]; throws NumericalError when some
    /// J[i] is below kJFloor.
    Eigen::MatrixXd excess_matrix(std::span<const double> theta) const;

    static constexpr double kJFloor = 1e-12;

private:
    struct OrbitTerm {
        OrbitMarginal marginal;
        std::vector<std::size_t> positions;
    };
    void check(std::span<const double> theta) const;
    void orbit_values(std::span<const double> theta, std::vector<double>& g, std::vector<double>& dg,
                      std::vector<double>& d2g) const;

    std::size_t m_ = 0;
    std::vector<OrbitTerm> orbits_;
    std::vector<std::size_t> orbit_of_position_;
};

struct MomentReport {
    double mean_degree = 0.0;
    double degree_variance = 0.0;
    double triangles_per_node = 0.0;
    double global_clustering = 0.0;
};

/// Classical-degree moments obtained by substituting alpha_i = z^{a_i}
/// (a_i = degree of position i inside its subgraph) into psi.
MomentReport moments(const NetworkModel& model);

struct MixtureTargets {
    double mean_degree = 0.0;
    double degree_variance = 0.0;
    double triangles_per_node = 0.0;
};

struct MixtureSolution {
    std::vector<double> rates;
    double residual = 0.0;
};

/// Contribution matrix with one column per subgraph (per unit membership
/// rate, see NetworkModel::from_rates): rows are <k>, Var(k), <triangles>.
Eigen::MatrixXd contribution_matrix(std::span<const Subgraph> subgraphs);

/*
 * Nonnegative rates reproducing the targets. Among exact nonnegative
 * solutions the minimum Euclidean norm one is returned; `fixed` pins rates by
 * subgraph index. Throws NumericalError (with the least-squares residual) when
 * no exact nonnegative solution exists.
 */
MixtureSolution solve_mixture(std::span<const Subgraph> subgraphs, const MixtureTargets& targets,
                              const std::map<std::size_t, double>& fixed = {});

} // namespace hcm
