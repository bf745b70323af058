#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hcm/errors.hpp"
#include "hcm/experiment.hpp"

using namespace hcm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json small_config() {
    return json::parse(R"({
      "name": "small",
      "seed": 3,
      "nodes": 300,
      "epidemic": {"tau": 1, "gamma": 1, "epsilon": 0.02},
      "ode": {"t_end": 8, "h_out": 0.1},
      "ensemble": {"n_networks": 4, "outbreak_threshold": 0.05},
      "models": [
        {"name": "tri", "components": [{"subgraph": "triangle", "marginal": {"family": "poisson", "rate": 2}}]},
        {"name": "mix", "solve": {"subgraphs": ["edge", "k4"],
          "targets": {"mean_degree": 4, "degree_variance": 8, "triangles_per_node": 2}}}
      ]})");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("marginal parsing") {
    const OrbitMarginal p = parse_marginal(json::parse(R"({"family": "poisson", "rate": 2.5})"));
    CHECK(p.mean() == doctest::Approx(2.5));
    const OrbitMarginal s = parse_marginal(json::parse(R"({"family": "scaled_poisson", "multiplier": 2, "rate": 2})"));
    CHECK(s.mean() == doctest::Approx(4));
    CHECK(s.variance() == doctest::Approx(8));
    const OrbitMarginal sum =
        parse_marginal(json::parse(R"([{"family": "poisson", "rate": 3}, {"family": "exact", "count": 2}])"));
    CHECK(sum.mean() == doctest::Approx(5));
    CHECK(parse_marginal(marginal_to_json(sum)).mean() == doctest::Approx(5));
    CHECK_THROWS_AS(parse_marginal(json::parse(R"({"family": "binomial", "rate": 1})")), ValidationError);
    CHECK_THROWS_AS(parse_marginal(json::parse(R"({"family": "poisson", "rate": -1})")), ValidationError);
    CHECK_THROWS_AS(parse_marginal(json::parse(R"({"family": "poisson"})")), ValidationError);
    CHECK_THROWS_AS(parse_marginal(json::array()), ValidationError);
}

TEST_CASE("subgraph parsing") {
    CHECK(parse_subgraph("k5").size() == 5);
    const Subgraph g = parse_subgraph(json::parse(R"({"id": "p3", "adjacency": [[0,1,0],[1,0,1],[0,1,0]]})"));
    CHECK(g.id() == "p3");
    CHECK(g.degree(1) == 2);
    CHECK_THROWS_AS(parse_subgraph("nonagon"), ValidationError);
    CHECK_THROWS_AS(parse_subgraph(json::parse(R"({"id": "bad", "adjacency": [[0,1],[0,0]]})")), ValidationError);
}

TEST_CASE("model parsing") {
    const ModelSpec per_orbit = parse_model(json::parse(R"({"name": "d", "components": [
        {"subgraph": "square_diagonal", "orbits": [{"family": "poisson", "rate": 1}, {"family": "poisson", "rate": 1}]}]})"));
    CHECK(per_orbit.model.marginals().size() == 2);
    CHECK_FALSE(per_orbit.solved);

    const ModelSpec solved = parse_model(small_config()["models"][1]);
    REQUIRE(solved.solved);
    CHECK(solved.solved->rates[0] == doctest::Approx(2));
    CHECK(solved.solved->rates[1] == doctest::Approx(2.0 / 3));

    CHECK_THROWS_AS(parse_model(json::parse(R"({"name": "x"})")), ValidationError);
    CHECK_THROWS_AS(parse_model(json::parse(R"({"name": "../x", "components": [
        {"subgraph": "edge", "marginal": {"family": "poisson", "rate": 1}}]})")),
                    ValidationError);
    CHECK_THROWS_AS(parse_model(json::parse(R"({"name": "x", "components": [
        {"subgraph": "edge", "marginal": {"family": "poisson", "rate": 1}, "colour": "red"}]})")),
                    ValidationError);
    // no nonnegative mixture of edges and triangles has zero variance
    CHECK_THROWS_AS(parse_model(json::parse(R"({"name": "x", "solve": {"subgraphs": ["edge", "triangle"],
        "targets": {"mean_degree": 4, "degree_variance": 0.5, "triangles_per_node": 2}}})")),
                    NumericalError);
}

TEST_CASE("config parsing") {
    const ExperimentConfig c = parse_config(small_config());
    CHECK(c.name == "small");
    CHECK(c.models.size() == 2);
    CHECK(c.ensemble.nodes == 300);
    CHECK(c.ensemble.seed == 3);
    CHECK(c.ensemble.alignment_prevalence == doctest::Approx(0.02));
    CHECK(c.ode.t_end == 8);

    json j = small_config();
    j["extra"] = 1;
    CHECK_THROWS_AS(parse_config(j), ValidationError);
    j = small_config();
    j["epidemic"]["seeding"] = "everywhere";
    CHECK_THROWS_AS(parse_config(j), ValidationError);
    j = small_config();
    j["models"][1]["name"] = "tri";
    CHECK_THROWS_AS(parse_config(j), ValidationError);
    j = small_config();
    j["ensemble"]["outbreak_threshold"] = 2;
    CHECK_THROWS_AS(parse_config(j), ValidationError);
    j = small_config();
    j["models"] = json::array();
    CHECK_THROWS_AS(parse_config(j), ValidationError);
}

TEST_CASE("presets load") {
    const ExperimentConfig fig4 = load_config("fig4");
    CHECK(fig4.models.size() == 5);
    const ExperimentConfig fig5 = load_config("fig5");
    REQUIRE(fig5.models.size() == 4);
    for (const auto& m : fig5.models) {
        const MomentReport r = moments(m.model);
        CHECK(r.mean_degree == doctest::Approx(4));
        CHECK(r.degree_variance == doctest::Approx(8));
        CHECK(r.triangles_per_node == doctest::Approx(2));
    }
    CHECK(load_config("null_moments").models.size() == 4);
    CHECK_THROWS_AS(load_config("no_such_preset"), ValidationError);
}

TEST_CASE("experiment writes its bundle deterministically") {
    const fs::path a = fs::temp_directory_path() / "hcm_test_experiment_a";
    const fs::path b = fs::temp_directory_path() / "hcm_test_experiment_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const ExperimentConfig c = parse_config(small_config());
    const ExperimentResult r = run_experiment(c, a);
    run_experiment(c, b);
    REQUIRE(r.models.size() == 2);
    for (const char* model : {"tri", "mix"}) {
        for (const char* file : {"ode_trace.csv", "sim_mean.csv", "sim_mean.json", "metrics.csv", "system_dump.txt"}) {
            CAPTURE(file);
            REQUIRE(fs::exists(a / model / file));
            CHECK(slurp(a / model / file) == slurp(b / model / file));
        }
        CHECK(slurp(a / model / "metrics.csv")
                  .rfind("source,mean_degree,degree_variance,triangles_per_node,global_clustering\npgf,", 0) == 0);
        CHECK(slurp(a / model / "ode_trace.csv").rfind("t,S,I,R", 0) == 0);
    }
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
    const json manifest = json::parse(slurp(a / "manifest.json"));
    CHECK(manifest.contains("config"));
    // the manifest alone reproduces the run
    const fs::path c2 = fs::temp_directory_path() / "hcm_test_experiment_c";
    fs::remove_all(c2);
    run_experiment(load_config((a / "manifest.json").string()), c2);
    CHECK(slurp(c2 / "manifest.json") == slurp(a / "manifest.json"));
    CHECK(slurp(c2 / "tri" / "sim_mean.csv") == slurp(a / "tri" / "sim_mean.csv"));
    fs::remove_all(c2);
    for (const auto& m : r.models) CHECK(m.ode.max_conservation_error < 1e-6);
    fs::remove_all(a);
    fs::remove_all(b);
}
