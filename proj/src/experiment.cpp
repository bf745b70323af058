#include "hcm/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hcm/errors.hpp"

#ifndef HCM_SOURCE_PRESET_DIR
#define HCM_SOURCE_PRESET_DIR "presets"
#endif

namespace hcm {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
}

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
    return j.at(key);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key())) throw ValidationError(where + ": unknown field '" + item.key() + "'");
}

MarginalTerm parse_term(const json& j) {
    check_keys(j, {"family", "rate", "multiplier", "count"}, "marginal");
    const std::string family = require(j, "family", "marginal").get<std::string>();
    if (family == "poisson") return Poisson{require(j, "rate", "poisson").get<double>()};
    if (family == "scaled_poisson")
        return ScaledPoisson{require(j, "multiplier", "scaled_poisson").get<int>(),
                             require(j, "rate", "scaled_poisson").get<double>()};
    if (family == "exact") return ExactCount{require(j, "count", "exact").get<int>()};
    throw ValidationError("unknown marginal family '" + family + "'");
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << text;
}

template <typename Writer>
void write_with(const std::filesystem::path& path, Writer&& writer) {
    std::ostringstream s;
    writer(s);
    write_file(path, s.str());
}

} // namespace

Subgraph parse_subgraph(const json& j) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (auto g = library::by_name(name)) return *g;
        throw ValidationError("unknown subgraph '" + name + "'");
    }
    check_keys(j, {"id", "adjacency"}, "subgraph");
    try {
        return Subgraph(require(j, "id", "subgraph").get<std::string>(),
                        require(j, "adjacency", "subgraph").get<std::vector<std::vector<int>>>());
    } catch (const json::exception& e) {
        throw ValidationError(std::string("subgraph: ") + e.what());
    }
}

OrbitMarginal parse_marginal(const json& j) {
    OrbitMarginal m;
    try {
        if (j.is_array()) {
            for (const auto& t : j) m.terms.push_back(parse_term(t));
        } else {
            m.terms.push_back(parse_term(j));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("marginal: ") + e.what());
    }
    if (m.terms.empty()) throw ValidationError("marginal: no terms");
    m.validate();
    return m;
}

json marginal_to_json(const OrbitMarginal& m) {
    json terms = json::array();
    for (const auto& term : m.terms) {
        if (const auto* p = std::get_if<Poisson>(&term))
            terms.push_back({{"family", "poisson"}, {"rate", p->rate}});
        else if (const auto* s = std::get_if<ScaledPoisson>(&term))
            terms.push_back({{"family", "scaled_poisson"}, {"multiplier", s->multiplier}, {"rate", s->rate}});
        else
            terms.push_back({{"family", "exact"}, {"count", std::get<ExactCount>(term).count}});
    }
    return terms.size() == 1 ? terms[0] : terms;
}

ModelSpec parse_model(const json& j) {
    check_keys(j, {"name", "components", "solve"}, "model");
    ModelSpec spec;
    spec.name = require(j, "name", "model").get<std::string>();
    if (spec.name.empty() || spec.name.find_first_of("/\\") != std::string::npos || spec.name == "." ||
        spec.name == "..")
        throw ValidationError("model name must be a plain directory name");
    const std::string where = "model '" + spec.name + "'";
    if (j.contains("components") == j.contains("solve"))
        throw ValidationError(where + ": give exactly one of 'components' or 'solve'");

    if (j.contains("components")) {
        for (const auto& c : j.at("components")) {
            check_keys(c, {"subgraph", "marginal", "orbits"}, where);
            Subgraph g = parse_subgraph(require(c, "subgraph", where));
            if (c.contains("marginal") == c.contains("orbits"))
                throw ValidationError(where + ": a component needs exactly one of 'marginal' or 'orbits'");
            if (c.contains("marginal")) {
                spec.model.add(std::move(g), parse_marginal(c.at("marginal")));
            } else {
                std::vector<OrbitMarginal> per_orbit;
                for (const auto& m : c.at("orbits")) per_orbit.push_back(parse_marginal(m));
                spec.model.add(std::move(g), std::move(per_orbit));
            }
        }
        if (spec.model.empty()) throw ValidationError(where + ": no components");
        return spec;
    }

    const json& s = j.at("solve");
    check_keys(s, {"subgraphs", "targets", "fixed"}, where + " solve");
    std::vector<Subgraph> subgraphs;
    std::vector<std::string> keys;
    for (const auto& name : require(s, "subgraphs", where)) {
        subgraphs.push_back(parse_subgraph(name));
        keys.push_back(name.is_string() ? name.get<std::string>() : subgraphs.back().id());
    }
    const json& t = require(s, "targets", where);
    check_keys(t, {"mean_degree", "degree_variance", "triangles_per_node"}, where + " targets");
    MixtureTargets targets{require(t, "mean_degree", where).get<double>(),
                           require(t, "degree_variance", where).get<double>(),
                           require(t, "triangles_per_node", where).get<double>()};
    std::map<std::size_t, double> fixed;
    if (s.contains("fixed")) {
        for (const auto& item : s.at("fixed").items()) {
            std::size_t k = 0;
            while (k < keys.size() && keys[k] != item.key()) ++k;
            if (k == keys.size()) throw ValidationError(where + ": fixed rate for unlisted subgraph " + item.key());
            fixed[k] = item.value().get<double>();
        }
    }
    MixtureSolution solution = solve_mixture(subgraphs, targets, fixed);
    spec.model = NetworkModel::from_rates(subgraphs, solution.rates);
    spec.solved = std::move(solution);
    return spec;
}

ExperimentConfig parse_config(const json& j) {
    check_keys(j, {"name", "seed", "nodes", "epidemic", "ode", "ensemble", "simulate", "models", "description"},
               "config");
    ExperimentConfig c;
    c.source = j;
    c.name = get_or<std::string>(j, "name", "experiment");
    c.seed = get_or<std::uint64_t>(j, "seed", 1);
    c.simulate = get_or<bool>(j, "simulate", true);

    if (j.contains("epidemic")) {
        const json& e = j.at("epidemic");
        check_keys(e, {"tau", "gamma", "epsilon", "seeding"}, "epidemic");
        c.epidemic.tau = get_or(e, "tau", c.epidemic.tau);
        c.epidemic.gamma = get_or(e, "gamma", c.epidemic.gamma);
        c.epidemic.epsilon = get_or(e, "epsilon", c.epidemic.epsilon);
        const auto seeding = get_or<std::string>(e, "seeding", "per_state");
        if (seeding == "per_state")
            c.seeding = InitialSeeding::PerState;
        else if (seeding == "split")
            c.seeding = InitialSeeding::Split;
        else
            throw ValidationError("epidemic.seeding must be 'per_state' or 'split'");
    }
    if (j.contains("ode")) {
        const json& o = j.at("ode");
        check_keys(o, {"t_end", "rel_tol", "abs_tol", "h_out", "record_states"}, "ode");
        c.ode.t_end = get_or(o, "t_end", c.ode.t_end);
        c.ode.rel_tol = get_or(o, "rel_tol", c.ode.rel_tol);
        c.ode.abs_tol = get_or(o, "abs_tol", c.ode.abs_tol);
        c.ode.h_out = get_or(o, "h_out", c.ode.h_out);
        c.ode.record_states = get_or(o, "record_states", c.ode.record_states);
    }

    SimProtocol& p = c.ensemble;
    p.tau = c.epidemic.tau;
    p.gamma = c.epidemic.gamma;
    p.alignment_prevalence = c.epidemic.epsilon;
    p.h_out = c.ode.h_out;
    p.t_end = c.ode.t_end;
    p.seed = c.seed;
    p.nodes = get_or<std::size_t>(j, "nodes", p.nodes);
    if (j.contains("ensemble")) {
        const json& e = j.at("ensemble");
        check_keys(e, {"n_networks", "runs_per_network", "outbreak_threshold", "alignment_prevalence", "workers"},
                   "ensemble");
        p.n_networks = get_or(e, "n_networks", p.n_networks);
        p.runs_per_network = get_or(e, "runs_per_network", p.runs_per_network);
        p.outbreak_threshold = get_or(e, "outbreak_threshold", p.outbreak_threshold);
        p.alignment_prevalence = get_or(e, "alignment_prevalence", p.alignment_prevalence);
        p.workers = get_or(e, "workers", p.workers);
    }
    if (c.simulate) p.validate();

    const json& models = require(j, "models", "config");
    if (!models.is_array() || models.empty()) throw ValidationError("config: 'models' must be a nonempty array");
    std::set<std::string> seen;
    for (const auto& m : models) {
        c.models.push_back(parse_model(m));
        if (!seen.insert(c.models.back().name).second)
            throw ValidationError("config: duplicate model name '" + c.models.back().name + "'");
    }
    return c;
}

std::filesystem::path preset_dir() {
    if (const char* env = std::getenv("HCM_PRESET_DIR")) return env;
    return HCM_SOURCE_PRESET_DIR;
}

ExperimentConfig load_config(const std::string& path_or_preset) {
    std::filesystem::path path(path_or_preset);
    if (!std::filesystem::is_regular_file(path)) {
        path = preset_dir() / (path_or_preset + ".json");
        if (!std::filesystem::is_regular_file(path))
            throw ValidationError("no config file or preset named '" + path_or_preset + "'");
    }
    std::ifstream in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    // a manifest written by run_experiment carries its config verbatim
    if (j.is_object() && j.contains("tool") && j.contains("config")) return parse_config(j.at("config"));
    return parse_config(j);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    ExperimentResult result;
    for (const ModelSpec& spec : config.models) {
        ModelOutcome out;
        out.name = spec.name;
        out.moments = moments(spec.model);
        out.sample_metrics = measure(generate_network(spec.model, config.ensemble.nodes,
                                                      network_seed(config.ensemble.seed, 0)));
        CompiledSystem system(spec.model, config.epidemic, config.seeding);
        out.ode = integrate(system, config.ode);
        if (config.simulate) out.simulation = run_ensemble(spec.model, config.ensemble);
        result.models.push_back(std::move(out));
    }
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    ExperimentResult result;
    json manifest;
    manifest["tool"] = "hcm";
    manifest["version"] = "0.1.0";
    manifest["config"] = config.source;
    manifest["resolved"] = {{"seed", config.seed},
                            {"nodes", config.ensemble.nodes},
                            {"tau", config.epidemic.tau},
                            {"gamma", config.epidemic.gamma},
                            {"epsilon", config.epidemic.epsilon},
                            {"seeding", config.seeding == InitialSeeding::Split ? "split" : "per_state"},
                            {"rel_tol", config.ode.rel_tol},
                            {"abs_tol", config.ode.abs_tol},
                            {"h_out", config.ode.h_out},
                            {"t_end", config.ode.t_end},
                            {"simulate", config.simulate},
                            {"n_networks", config.ensemble.n_networks},
                            {"runs_per_network", config.ensemble.runs_per_network},
                            {"outbreak_threshold", config.ensemble.outbreak_threshold},
                            {"alignment_prevalence", config.ensemble.alignment_prevalence}};
    json models = json::array();

    for (const ModelSpec& spec : config.models) {
        ExperimentConfig one = config;
        one.models = {spec};
        ModelOutcome out = std::move(run_experiment(one).models.front());
        const auto dir = out_dir / spec.name;
        std::filesystem::create_directories(dir);

        CompiledSystem system(spec.model, config.epidemic, config.seeding);
        write_with(dir / "system_dump.txt", [&](std::ostream& s) { system.dump(s); });
        write_with(dir / "ode_trace.csv", [&](std::ostream& s) { write_trace_csv(s, out.ode.trace); });
        write_with(dir / "metrics.csv", [&](std::ostream& s) {
            s << "source,mean_degree,degree_variance,triangles_per_node,global_clustering\n";
            s.precision(10);
            const MomentReport& m = out.moments;
            s << "pgf," << m.mean_degree << ',' << m.degree_variance << ',' << m.triangles_per_node << ','
              << m.global_clustering << '\n';
            const NetworkMetrics& n = out.sample_metrics;
            s << "network," << n.mean_degree << ',' << n.degree_variance << ','
              << 3.0 * static_cast<double>(n.triangles) / static_cast<double>(config.ensemble.nodes) << ','
              << n.global_clustering << '\n';
        });

        json entry;
        entry["name"] = spec.name;
        entry["equations"] = system.equation_count();
        json components = json::array();
        const PositionIndex& index = spec.model.index();
        for (std::size_t k = 0; k < index.subgraph_count(); ++k) {
            json orbits = json::array();
            for (const OrbitClass& cls : index.classes_of(k)) {
                const auto c = static_cast<std::size_t>(&cls - index.orbit_classes().data());
                orbits.push_back(marginal_to_json(spec.model.marginals()[c]));
            }
            components.push_back({{"subgraph", index.subgraph(k).id()}, {"orbits", orbits}});
        }
        entry["components"] = components;
        if (spec.solved) entry["solved_rates"] = spec.solved->rates;
        const Peak ode_peak = infected_peak(out.ode.trace);
        entry["ode"] = {{"peak_prevalence", ode_peak.value},
                        {"peak_time", ode_peak.time},
                        {"final_recovered", out.ode.trace.R.back()},
                        {"max_conservation_error", out.ode.max_conservation_error},
                        {"max_mass_drift", out.ode.max_mass_drift}};
        std::vector<std::string> files = {"ode_trace.csv", "metrics.csv", "system_dump.txt"};
        if (out.simulation) {
            const EnsembleResult& sim = *out.simulation;
            write_with(dir / "sim_mean.csv", [&](std::ostream& s) { write_trace_csv(s, sim.mean); });
            write_with(dir / "sim_mean.json", [&](std::ostream& s) { write_ensemble_json(s, sim); });
            const Peak sim_peak = infected_peak(sim.mean);
            entry["simulation"] = {{"peak_prevalence", sim_peak.value},
                                   {"peak_time", sim_peak.time},
                                   {"total_runs", sim.total_runs},
                                   {"discarded_runs", sim.discarded_runs}};
            files.insert(files.end(), {"sim_mean.csv", "sim_mean.json"});
        }
        entry["files"] = files;
        models.push_back(entry);
        result.models.push_back(std::move(out));
    }
    manifest["models"] = models;
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return result;
}

} // namespace hcm
