#include "hcm/meanfield.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>

#include "hcm/errors.hpp"

namespace hcm {

// ---------------------------------------------------------------------------
// StateSpace

StateSpace::StateSpace(int nodes) : n_(nodes), size_(1) {
    if (nodes < 1 || nodes > kMaxSubgraphNodes) throw ValidationError("state space size out of range");
    weight_.assign(static_cast<std::size_t>(n_), 1);
    for (int k = n_ - 1; k >= 0; --k) {
        weight_[static_cast<std::size_t>(k)] = size_;
        size_ *= 3;
    }
}

Compartment StateSpace::at(std::size_t state, int node) const {
    return static_cast<Compartment>((state / weight_[static_cast<std::size_t>(node)]) % 3);
}

std::size_t StateSpace::with(std::size_t state, int node, Compartment c) const {
    const std::size_t w = weight_[static_cast<std::size_t>(node)];
    const std::size_t current = (state / w) % 3;
    return state - current * w + static_cast<std::size_t>(c) * w;
}

std::size_t StateSpace::encode(std::span<const Compartment> nodes) const {
    if (static_cast<int>(nodes.size()) != n_) throw ValidationError("state has wrong node count");
    std::size_t s = 0;
    for (int k = 0; k < n_; ++k) s += static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)]) * weight_[static_cast<std::size_t>(k)];
    return s;
}

std::string StateSpace::label(std::size_t state) const {
    static constexpr char kLetters[] = {'S', 'I', 'R'};
    std::string out(static_cast<std::size_t>(n_), 'S');
    for (int k = 0; k < n_; ++k) out[static_cast<std::size_t>(k)] = kLetters[static_cast<int>(at(state, k))];
    return out;
}

std::size_t StateSpace::parse(const std::string& label) const {
    if (static_cast<int>(label.size()) != n_) throw ValidationError("state label '" + label + "' has wrong length");
    std::vector<Compartment> nodes;
    for (char ch : label) {
        switch (ch) {
        case 'S': nodes.push_back(Compartment::S); break;
        case 'I': nodes.push_back(Compartment::I); break;
        case 'R': nodes.push_back(Compartment::R); break;
        default: throw ValidationError("state label '" + label + "' has invalid letter");
        }
    }
    return encode(nodes);
}

// ---------------------------------------------------------------------------
// T assembly and rate matrices

namespace {

int infected_neighbours(const Subgraph& g, const StateSpace& space, std::size_t state, int node) {
    int count = 0;
    for (int v = 0; v < g.size(); ++v)
        if (g.adjacent(node, v) && space.at(state, v) == Compartment::I) ++count;
    return count;
}

} // namespace

TAssembly build_T(const PositionIndex& index) {
    TAssembly out;
    out.terms.resize(index.size());
    for (std::size_t k = 0; k < index.subgraph_count(); ++k) {
        const Subgraph& g = index.subgraph(k);
        const StateSpace space(g.size());
        for (int u = 0; u < g.size(); ++u) {
            auto& terms = out.terms[index.position_of(k, u)];
            for (std::size_t s = 0; s < space.size(); ++s) {
                if (space.at(s, u) != Compartment::S) continue;
                const int mult = infected_neighbours(g, space, s, u);
                if (mult > 0) terms.push_back({s, mult});
            }
        }
    }
    return out;
}

RateExpr RateMatrixZ::at(std::size_t from, std::size_t to) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{from, to},
                               [](const RateEntry& e, const std::pair<std::size_t, std::size_t>& key) {
                                   return std::pair{e.from, e.to} < key;
                               });
    if (it != entries.end() && it->from == from && it->to == to) return it->rate;
    return {};
}

RateMatrixZ build_Z(const PositionIndex& index, std::size_t subgraph) {
    const Subgraph& g = index.subgraph(subgraph);
    RateMatrixZ z;
    z.subgraph = subgraph;
    z.states = StateSpace(g.size());
    const StateSpace& space = z.states;
    // Every (from, to) pair differing in exactly one node by S->I or I->R.
    for (std::size_t from = 0; from < space.size(); ++from) {
        std::vector<RateEntry> row;
        for (int u = 0; u < g.size(); ++u) {
            const Compartment c = space.at(from, u);
            if (c == Compartment::S) {
                RateEntry e{from, space.with(from, u, Compartment::I), {}};
                e.rate.tau = infected_neighbours(g, space, from, u);
                e.rate.flux.emplace_back(index.position_of(subgraph, u), 1);
                row.push_back(std::move(e));
            } else if (c == Compartment::I) {
                RateEntry e{from, space.with(from, u, Compartment::R), {}};
                e.rate.gamma = 1;
                row.push_back(std::move(e));
            }
        }
        std::sort(row.begin(), row.end(), [](const RateEntry& a, const RateEntry& b) { return a.to < b.to; });
        for (auto& e : row) z.entries.push_back(std::move(e));
    }
    return z;
}

std::string format_rate(const RateExpr& rate) {
    std::vector<std::string> parts;
    auto coeff = [](int c, const std::string& sym) { return c == 1 ? sym : std::to_string(c) + sym; };
    if (rate.tau) parts.push_back(coeff(rate.tau, "tau"));
    if (rate.gamma) parts.push_back(coeff(rate.gamma, "gamma"));
    for (const auto& [pos, c] : rate.flux) parts.push_back(coeff(c, "(TD)_" + std::to_string(pos + 1)));
    if (parts.empty()) return "0";
    std::string out = parts.front();
    for (std::size_t k = 1; k < parts.size(); ++k) out += " + " + parts[k];
    return out;
}

// ---------------------------------------------------------------------------
// CompiledSystem

CompiledSystem::CompiledSystem(const NetworkModel& model, const EpidemicParams& params, InitialSeeding seeding)
    : model_(model), index_(model.index()), pgf_(model), params_(params), seeding_(seeding) {
    if (!(params.tau >= 0.0) || !(params.gamma >= 0.0))
        throw ValidationError("tau and gamma must be >= 0");
    if (!(params.epsilon >= 0.0 && params.epsilon < 1.0)) throw ValidationError("epsilon must lie in [0, 1)");
    m_ = index_.size();
    t_ = build_T(index_);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < index_.subgraph_count(); ++k) {
        z_.push_back(build_Z(index_, k));
        state_offsets_.push_back(offset);
        offset += z_.back().states.size();
    }
    theta_offset_ = offset;
    size_ = offset + m_ + 2;
    for (std::size_t i = 0; i < m_; ++i) {
        const PositionSlot& slot = index_.slot(i);
        stubs_.push_back(index_.subgraph(slot.subgraph).degree(slot.node));
    }
}

std::vector<double> CompiledSystem::initial_conditions() const {
    std::vector<double> y(size_, 0.0);
    const double eps = params_.epsilon;
    const std::vector<double> ones(m_, 1.0);
    const Eigen::VectorXd j = pgf_.gradient(ones);

    for (std::size_t k = 0; k < index_.subgraph_count(); ++k) {
        const StateSpace& space = z_[k].states;
        const int n = space.nodes();
        double copies = 0.0;  // J is equal across a subgraph's positions
        for (int u = 0; u < n; ++u) copies += j(static_cast<Eigen::Index>(index_.position_of(k, u)));
        copies /= n;
        double* g = y.data() + state_offsets_[k];
        g[0] = copies * (1.0 - eps);  // all-S state encodes to 0
        for (int u = 0; u < n; ++u) {
            const std::size_t single = space.with(0, u, Compartment::I);
            g[single] = seeding_ == InitialSeeding::PerState
                            ? j(static_cast<Eigen::Index>(index_.position_of(k, u))) * eps
                            : copies * eps / n;
        }
    }
    for (std::size_t i = 0; i < m_; ++i) y[theta_offset_ + i] = 1.0;
    y[infected_offset()] = eps;
    y[recovered_offset()] = 0.0;
    return y;
}

std::vector<double> CompiledSystem::transmission(std::span<const double> y) const {
    std::vector<double> t(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
        const double* g = y.data() + state_offsets_[index_.slot(i).subgraph];
        double sum = 0.0;
        for (const TTerm& term : t_.terms[i]) sum += term.multiplicity * g[term.state];
        t[i] = params_.tau * sum;
    }
    return t;
}

double CompiledSystem::susceptible(std::span<const double> y) const {
    return (1.0 - params_.epsilon) * pgf_.eval(y.subspan(theta_offset_, m_));
}

double CompiledSystem::subgraph_mass(std::span<const double> y, std::size_t subgraph) const {
    const double* g = y.data() + state_offsets_.at(subgraph);
    double sum = 0.0;
    for (std::size_t s = 0; s < z_[subgraph].states.size(); ++s) sum += g[s];
    return sum;
}

void CompiledSystem::rhs(std::span<const double> y, std::span<double> dydt) const {
    if (y.size() != size_ || dydt.size() != size_) throw ValidationError("state vector has wrong dimension");
    std::fill(dydt.begin(), dydt.end(), 0.0);

    const std::span<const double> theta = y.subspan(theta_offset_, m_);
    const std::vector<double> t = transmission(y);
    const PgfDerivatives d = pgf_.derivatives(theta);

    // Susceptible position-i attachments per node: kappa_i = theta_i J_i.
    // Positions whose kappa falls below the floor are frozen.
    std::vector<double> kappa(m_);
    std::vector<bool> live(m_);
    for (std::size_t i = 0; i < m_; ++i) {
        kappa[i] = theta[i] * d.gradient(static_cast<Eigen::Index>(i));
        live[i] = kappa[i] >= JointHyperstubPgf::kJFloor;
    }

    // (T Delta)_i: infections arriving through position j bring Delta[j][i]
    // susceptible position-i attachments each; dividing by kappa_i turns the
    // flux into a per-attachment hazard.
    std::vector<double> flux(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
        if (!live[i]) continue;
        double sum = 0.0;
        for (std::size_t j = 0; j < m_; ++j) {
            if (!live[j]) continue;
            const double delta_ji = theta[i] * d.hessian(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) /
                                    d.gradient(static_cast<Eigen::Index>(j));
            sum += t[j] * delta_ji;
        }
        flux[i] = sum / kappa[i];
    }

    for (std::size_t k = 0; k < z_.size(); ++k) {
        const double* g = y.data() + state_offsets_[k];
        double* dg = dydt.data() + state_offsets_[k];
        for (const RateEntry& e : z_[k].entries) {
            double rate = e.rate.tau * params_.tau + e.rate.gamma * params_.gamma;
            for (const auto& [pos, c] : e.rate.flux) rate += c * flux[pos];
            const double flow = rate * g[e.from];
            dg[e.from] -= flow;
            dg[e.to] += flow;
        }
    }

    double new_infections = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
        const double dtheta = live[i] ? -t[i] / d.gradient(static_cast<Eigen::Index>(i)) : 0.0;
        dydt[theta_offset_ + i] = dtheta;
        new_infections -= dtheta * d.gradient(static_cast<Eigen::Index>(i));
    }
    const double infected = y[infected_offset()];
    dydt[infected_offset()] = (1.0 - params_.epsilon) * new_infections - params_.gamma * infected;
    dydt[recovered_offset()] = params_.gamma * infected;
}

void CompiledSystem::dump(std::ostream& out) const {
    auto g_name = [&](std::size_t k, std::size_t state) {
        return "G_" + index_.subgraph(k).id() + "(" + z_[k].states.label(state) + ")";
    };

    out << "# equations: " << size_ << " = 2 + " << m_;
    for (const auto& z : z_) out << " + " << z.states.size();
    out << "\n# positions\n";
    for (std::size_t i = 0; i < m_; ++i) {
        const PositionSlot& slot = index_.slot(i);
        out << "x_" << i + 1 << " = " << index_.subgraph(slot.subgraph).id() << " node " << slot.node << " (orbit "
            << index_.orbit_classes()[slot.orbit_class].local_orbit << ", " << stubs_[i] << " stubs)\n";
    }
    out << "# marginals\n";
    for (std::size_t o = 0; o < index_.orbit_classes().size(); ++o) {
        const OrbitClass& cls = index_.orbit_classes()[o];
        out << "orbit {";
        for (std::size_t p = 0; p < cls.positions.size(); ++p) out << (p ? "," : "") << "x_" << cls.positions[p] + 1;
        out << "} ~ " << describe(model_.marginals()[o]) << '\n';
    }

    out << "# transmission\n";
    for (std::size_t i = 0; i < m_; ++i) {
        out << "T_" << i + 1 << " = tau*[";
        const std::size_t k = index_.slot(i).subgraph;
        for (std::size_t n = 0; n < t_.terms[i].size(); ++n) {
            const TTerm& term = t_.terms[i][n];
            out << (n ? " + " : "") << (term.multiplicity > 1 ? std::to_string(term.multiplicity) : "")
                << g_name(k, term.state);
        }
        out << "]\n";
    }

    out << "# subgraph states\n";
    for (std::size_t k = 0; k < z_.size(); ++k) {
        const RateMatrixZ& z = z_[k];
        for (std::size_t s = 0; s < z.states.size(); ++s) {
            RateExpr outflow;
            std::map<std::size_t, int> outflux;
            std::vector<std::string> inflow;
            for (const RateEntry& e : z.entries) {
                if (e.from == s) {
                    outflow.tau += e.rate.tau;
                    outflow.gamma += e.rate.gamma;
                    for (const auto& [pos, c] : e.rate.flux) outflux[pos] += c;
                }
                if (e.to == s) inflow.push_back("[" + format_rate(e.rate) + "] " + g_name(k, e.from));
            }
            outflow.flux.assign(outflux.begin(), outflux.end());
            out << "d/dt " << g_name(k, s) << " = ";
            bool any = false;
            if (!(outflow == RateExpr{})) {
                out << "-[" << format_rate(outflow) << "] " << g_name(k, s);
                any = true;
            }
            for (const auto& term : inflow) {
                out << (any ? " + " : "") << term;
                any = true;
            }
            if (!any) out << "0";
            out << '\n';
        }
    }

    out << "# survivor functions (J_i = dpsi/dalpha_i at theta)\n";
    for (std::size_t i = 0; i < m_; ++i) out << "d/dt theta_" << i + 1 << " = -T_" << i + 1 << " / J_" << i + 1 << '\n';
    out << "# prevalence\n";
    out << "S = (1 - epsilon) psi(theta)\n";
    out << "d/dt I = -(1 - epsilon) sum_i J_i d/dt theta_i - gamma I\n";
    out << "d/dt R = gamma I\n";
    out << "# external force: (TD)_i = sum_j T_j Delta_ji / (theta_i J_i), Delta_ji = theta_i H_ji / J_j\n";
}

void CompiledSystem::dump_z_csv(std::ostream& out) const {
    out << "subgraph,row_state,col_state,tau,gamma,flux\n";
    for (const auto& z : z_)
        for (const RateEntry& e : z.entries) {
            out << index_.subgraph(z.subgraph).id() << ',' << z.states.label(e.from) << ',' << z.states.label(e.to) << ','
                << e.rate.tau << ',' << e.rate.gamma << ',';
            for (std::size_t n = 0; n < e.rate.flux.size(); ++n)
                out << (n ? ";" : "") << "x" << e.rate.flux[n].first + 1 << ':' << e.rate.flux[n].second;
            out << '\n';
        }
}

} // namespace hcm
