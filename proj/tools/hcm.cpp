// hcm: command-line driver for network generation, ODE compilation and
// epidemic experiments.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hcm/errors.hpp"
#include "hcm/experiment.hpp"

using nlohmann::json;

namespace {

struct ModelSource {
    std::string config;
    std::string model;
    std::string inline_json;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config, "config file or preset name");
        app->add_option("-m,--model", model, "model name within the config (default: first)");
        app->add_option("--model-json", inline_json, "a single model as inline JSON");
    }

    hcm::ModelSpec resolve() const {
        if (!inline_json.empty()) {
            if (!config.empty()) throw hcm::ValidationError("give either --config or --model-json, not both");
            try {
                return hcm::parse_model(json::parse(inline_json));
            } catch (const json::parse_error& e) {
                throw hcm::ValidationError(std::string("--model-json: ") + e.what());
            }
        }
        if (config.empty()) throw hcm::ValidationError("a model is required (--config or --model-json)");
        hcm::ExperimentConfig c = hcm::load_config(config);
        if (model.empty()) return c.models.front();
        for (auto& m : c.models)
            if (m.name == model) return m;
        throw hcm::ValidationError("config has no model named '" + model + "'");
    }
};

// Writes to the file, or stdout when the path is empty or "-".
template <typename Writer>
void emit(const std::string& path, Writer&& writer) {
    if (path.empty() || path == "-") {
        writer(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw hcm::ValidationError("cannot write " + path);
    writer(out);
}

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperstub configuration model networks and SIR dynamics"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "sample a network and write its edge list");
    ModelSource gen_model;
    gen_model.attach(gen);
    std::size_t gen_nodes = 5000;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("-N,--nodes", gen_nodes, "number of nodes")->check(CLI::PositiveNumber);
    gen->add_option("-s,--seed", gen_seed, "random seed");
    gen->add_option("-o,--output", gen_out, "edge list path (default stdout)");

    // metrics
    auto* met = app.add_subcommand("metrics", "degree moments and clustering of edge lists or a model's PGF");
    ModelSource met_model;
    met_model.attach(met);
    std::vector<std::string> met_files;
    std::string met_out;
    met->add_option("edge_lists", met_files, "edge list files");
    met->add_option("-o,--output", met_out, "CSV path (default stdout)");

    // compile
    auto* comp = app.add_subcommand("compile", "print the compiled mean-field ODE system");
    ModelSource comp_model;
    comp_model.attach(comp);
    double comp_tau = 1.0, comp_gamma = 1.0, comp_eps = 0.01;
    std::string comp_out, comp_z;
    comp->add_option("--tau", comp_tau);
    comp->add_option("--gamma", comp_gamma);
    comp->add_option("--epsilon", comp_eps);
    comp->add_option("-o,--output", comp_out, "dump path (default stdout)");
    comp->add_option("--z-csv", comp_z, "also write the transition-rate matrices as CSV");

    // solve
    auto* sol = app.add_subcommand("solve", "mixture rates reproducing degree and triangle targets");
    std::vector<std::string> sol_subgraphs;
    double sol_k = 4.0, sol_var = 8.0, sol_tri = 2.0;
    sol->add_option("-g,--subgraphs", sol_subgraphs, "subgraph names")->required()->delimiter(',');
    sol->add_option("--mean-degree", sol_k);
    sol->add_option("--variance", sol_var);
    sol->add_option("--triangles", sol_tri, "expected triangles per node");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Gillespie ensemble for one model");
    ModelSource sim_model;
    sim_model.attach(sim);
    hcm::SimProtocol protocol;
    std::string sim_out = "sim_out";
    sim->add_option("-N,--nodes", protocol.nodes)->check(CLI::PositiveNumber);
    sim->add_option("-s,--seed", protocol.seed);
    sim->add_option("--networks", protocol.n_networks)->check(CLI::PositiveNumber);
    sim->add_option("--runs-per-network", protocol.runs_per_network)->check(CLI::PositiveNumber);
    sim->add_option("--tau", protocol.tau);
    sim->add_option("--gamma", protocol.gamma);
    sim->add_option("--threshold", protocol.outbreak_threshold, "outbreak threshold (prevalence)");
    sim->add_option("--align", protocol.alignment_prevalence, "alignment prevalence");
    sim->add_option("--t-end", protocol.t_end);
    sim->add_option("-o,--output", sim_out, "output directory");

    // experiment
    auto* exp = app.add_subcommand("experiment", "run a preset or config end to end");
    std::string exp_config, exp_out;
    std::optional<std::uint64_t> exp_seed;
    std::optional<std::size_t> exp_nodes, exp_networks;
    bool exp_no_sim = false;
    exp->add_option("config", exp_config, "preset name (fig4, fig5, null_moments) or config path")->required();
    exp->add_option("-o,--output", exp_out, "output directory (default out/<name>)");
    exp->add_option("-s,--seed", exp_seed);
    exp->add_option("-N,--nodes", exp_nodes);
    exp->add_option("--networks", exp_networks);
    exp->add_flag("--no-simulate", exp_no_sim, "skip the Gillespie ensembles");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const hcm::ModelSpec spec = gen_model.resolve();
            const hcm::Network net = hcm::generate_network(spec.model, gen_nodes, gen_seed);
            emit(gen_out, [&](std::ostream& o) { hcm::write_edge_list(o, net); });
        } else if (*met) {
            std::vector<std::pair<std::string, hcm::NetworkMetrics>> rows;
            for (const auto& path : met_files) {
                std::ifstream in(path);
                if (!in) throw hcm::ValidationError("cannot read " + path);
                rows.emplace_back(path, hcm::measure(hcm::read_edge_list(in)));
            }
            std::optional<hcm::MomentReport> pgf;
            if (!met_model.config.empty() || !met_model.inline_json.empty())
                pgf = hcm::moments(met_model.resolve().model);
            if (rows.empty() && !pgf) throw hcm::ValidationError("nothing to measure: give edge lists or a model");
            emit(met_out, [&](std::ostream& o) {
                if (!rows.empty()) hcm::write_metrics_csv(o, rows);
                if (pgf) {
                    o << "source,mean_degree,degree_variance,triangles_per_node,global_clustering\n";
                    o.precision(12);
                    o << "pgf," << pgf->mean_degree << ',' << pgf->degree_variance << ','
                      << pgf->triangles_per_node << ',' << pgf->global_clustering << '\n';
                }
            });
        } else if (*comp) {
            const hcm::ModelSpec spec = comp_model.resolve();
            const hcm::CompiledSystem system(spec.model, {comp_tau, comp_gamma, comp_eps});
            emit(comp_out, [&](std::ostream& o) { system.dump(o); });
            if (!comp_z.empty()) emit(comp_z, [&](std::ostream& o) { system.dump_z_csv(o); });
        } else if (*sol) {
            std::vector<hcm::Subgraph> subgraphs;
            for (const auto& name : sol_subgraphs) subgraphs.push_back(hcm::parse_subgraph(json(name)));
            const hcm::MixtureSolution s = hcm::solve_mixture(subgraphs, {sol_k, sol_var, sol_tri});
            json out;
            out["rates"] = json::object();
            for (std::size_t k = 0; k < subgraphs.size(); ++k) out["rates"][sol_subgraphs[k]] = s.rates[k];
            out["residual"] = s.residual;
            const hcm::MomentReport m = hcm::moments(hcm::NetworkModel::from_rates(subgraphs, s.rates));
            out["moments"] = {{"mean_degree", m.mean_degree},
                              {"degree_variance", m.degree_variance},
                              {"triangles_per_node", m.triangles_per_node},
                              {"global_clustering", m.global_clustering}};
            std::cout << out.dump(2) << '\n';
        } else if (*sim) {
            const hcm::ModelSpec spec = sim_model.resolve();
            const hcm::EnsembleResult r = hcm::run_ensemble(spec.model, protocol);
            std::filesystem::create_directories(sim_out);
            emit((std::filesystem::path(sim_out) / "sim_mean.csv").string(),
                 [&](std::ostream& o) { hcm::write_trace_csv(o, r.mean); });
            emit((std::filesystem::path(sim_out) / "sim_mean.json").string(),
                 [&](std::ostream& o) { hcm::write_ensemble_json(o, r); });
            std::cout << "retained " << r.retained_runs() << " of " << r.total_runs << " runs\n";
        } else if (*exp) {
            json doc = hcm::load_config(exp_config).source;
            if (exp_seed) doc["seed"] = *exp_seed;
            if (exp_nodes) doc["nodes"] = *exp_nodes;
            if (exp_networks) doc["ensemble"]["n_networks"] = *exp_networks;
            if (exp_no_sim) doc["simulate"] = false;
            const hcm::ExperimentConfig config = hcm::parse_config(doc);
            const std::filesystem::path out = exp_out.empty() ? std::filesystem::path("out") / config.name
                                                                : std::filesystem::path(exp_out);
            const hcm::ExperimentResult result = hcm::run_experiment(config, out);
            for (const auto& m : result.models) {
                const hcm::Peak ode = hcm::infected_peak(m.ode.trace);
                std::cout << m.name << ": ODE peak " << ode.value << " at t=" << ode.time;
                if (m.simulation) {
                    const hcm::Peak s = hcm::infected_peak(m.simulation->mean);
                    std::cout << ", simulation peak " << s.value << " at t=" << s.time << " ("
                              << m.simulation->retained_runs() << '/' << m.simulation->total_runs << " runs)";
                }
                std::cout << '\n';
            }
            std::cout << "wrote " << out.string() << '\n';
        }
    } catch (const hcm::ValidationError& e) {
        return fail("validation", e.what(), 2);
    } catch (const hcm::ConstraintError& e) {
        return fail("constraint", e.what(), 3);
    } catch (const hcm::NumericalError& e) {
        return fail("numerical", e.what(), 4);
    } catch (const hcm::NoOutbreakError& e) {
        return fail("no_outbreak", e.what(), 5);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
