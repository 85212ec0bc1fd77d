#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "swarmfield/metrics.hpp"
#include "swarmfield/runner.hpp"
#include "swarmfield/scenario.hpp"

using namespace swarmfield;

namespace {

json minimal_direct_config() {
    return json{
        {"schema_version", 1},
        {"scenario", "direct"},
        {"seed", 3},
        {"grid", {{"n_cells", 128}}},
        {"time", {{"dt", 0.002}, {"horizon", 0.2}}},
        {"kernel", {{"family", "repulsive-exponential"}, {"strength", 1.0}, {"decay_length", 1.5707963}}},
        {"initial_density", {{"family", "perturbed-uniform"}, {"amplitude", 0.15}, {"modes", 2}}},
    };
}

}  // namespace

TEST_CASE("metrics examples") {
    RingGrid g(256);
    const auto uniform = DensityField::uniform(g);

    SECTION("identical fields have zero distance") {
        const auto m = metrics(uniform, uniform);
        CHECK(m.l2 == 0.0);
        CHECK(m.l1 == 0.0);
        CHECK(m.w1 == 0.0);
    }
    SECTION("rotating the uniform density changes nothing") {
        // rotation of the uniform density is the uniform density
        std::vector<double> v(256, 1.0 / kTwoPi);
        std::rotate(v.begin(), v.begin() + 40, v.end());
        const auto m = metrics(uniform, DensityField(g, v));
        CHECK(m.w1 == Approx(0.0).margin(1e-12));
    }
    SECTION("cosine perturbation has the analytic L2 distance") {
        const auto rho = DensityField::from_function(
            g, [](double x) { return (1.0 + 0.1 * std::cos(x)) / kTwoPi; });
        const auto m = metrics(uniform, rho);
        CHECK(m.l2 == Approx(0.1 / std::sqrt(2.0 * kTwoPi)).epsilon(1e-6));
    }
    SECTION("circular variance limits") {
        CHECK(circular_variance(uniform) == Approx(1.0).margin(1e-12));
        std::vector<double> spike(256, 0.0);
        spike[17] = 4.0;
        CHECK(circular_variance(DensityField(g, spike)) == Approx(0.0).margin(1e-3));
    }
}

TEST_CASE("config parsing and validation") {
    SECTION("defaults parse and validate") {
        const auto cfg = parse_config(minimal_direct_config());
        CHECK(cfg.scenario == ScenarioKind::direct);
        CHECK(cfg.validate().empty());
    }
    SECTION("unknown scenario is rejected") {
        auto doc = minimal_direct_config();
        doc["scenario"] = "teleportation";
        CHECK_THROWS_AS(parse_config(doc), std::invalid_argument);
    }
    SECTION("violations are reported together") {
        auto doc = minimal_direct_config();
        doc["control"] = {{"k_p", -1.0}, {"u_max", -2.0}};
        doc["time"] = {{"dt", 0.002}, {"horizon", 0.0}};
        const auto cfg = parse_config(doc);
        const auto violations = cfg.validate();
        CHECK(violations.size() >= 3);
    }
    SECTION("CFL-infeasible dt is flagged with the admissible value") {
        auto doc = minimal_direct_config();
        doc["time"] = {{"dt", 0.05}, {"horizon", 1.0}};
        const auto violations = parse_config(doc).validate();
        REQUIRE_FALSE(violations.empty());
        bool found = false;
        for (const auto& v : violations) found = found || v.find("admissible") != std::string::npos;
        CHECK(found);
    }
    SECTION("sensing radius accepts the infinite marker") {
        auto doc = minimal_direct_config();
        doc["control"] = {{"sensing_radius", "infinite"}};
        CHECK(parse_config(doc).control.sensing_radius == kInfiniteRadius);
        doc["control"] = {{"sensing_radius", 0.5}};
        CHECK(parse_config(doc).control.sensing_radius == 0.5);
    }
}

TEST_CASE("run records enforce their invariants") {
    RunRecord rec;
    rec.columns = {"t", "mass"};
    rec.append({0.0, 1.0});
    CHECK_THROWS_AS(rec.append({0.0, 1.0}), std::invalid_argument);   // t not increasing
    CHECK_THROWS_AS(rec.append({1.0, -0.5}), std::invalid_argument);  // mass not positive
    rec.append({1.0, 1.0});
    CHECK(rec.rows.size() == 2);
}

TEST_CASE("runs are deterministic and atomic on disk") {
    const auto dir = std::filesystem::temp_directory_path() / "swarmfield_harness_test";
    std::filesystem::remove_all(dir);
    auto doc = minimal_direct_config();
    doc["output"] = {{"directory", (dir / "runs").string()}, {"metrics_stride", 5}};
    const auto cfg = parse_config(doc);

    const auto rec1 = run_scenario(cfg);
    const auto rec2 = run_scenario(cfg);
    CHECK(detail::to_csv(rec1) == detail::to_csv(rec2));

    const auto run_dir = dir / "runs" / "direct-seed3";
    REQUIRE(std::filesystem::exists(run_dir / "metrics.csv"));
    REQUIRE(std::filesystem::exists(run_dir / "summary.json"));
    REQUIRE(std::filesystem::exists(run_dir / "config.resolved"));
    CHECK_FALSE(std::filesystem::exists(run_dir / "metrics.csv.tmp"));

    std::ifstream in(run_dir / "metrics.csv", std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == detail::to_csv(rec2));
    std::filesystem::remove_all(dir);
}

TEST_CASE("different seeds change stochastic runs") {
    auto doc = minimal_direct_config();
    doc["micro"] = {{"n_agents", 40}, {"dt", 0.002}};
    auto cfg_a = parse_config(doc);
    doc["seed"] = 4;
    auto cfg_b = parse_config(doc);
    const auto rec_a = run_scenario_in_memory(cfg_a);
    const auto rec_b = run_scenario_in_memory(cfg_b);
    CHECK(detail::to_csv(rec_a) != detail::to_csv(rec_b));
}

TEST_CASE("sweeps") {
    auto doc = minimal_direct_config();
    const auto base = parse_config(doc);

    SECTION("cartesian cardinality") {
        const auto sweep =
            run_sweep(base, "control.k_p", {json(2.0), json(4.0), json(8.0), json(16.0)}, 3);
        CHECK(sweep.runs.size() == 12);
    }
    SECTION("degenerate sweep equals a plain run") {
        const auto sweep = run_sweep(base, "control.k_p", {json(10.0)}, 1);
        REQUIRE(sweep.runs.size() == 1);
        const auto rec = run_scenario_in_memory(base);
        CHECK(sweep.runs[0]["summary"]["steady_state_l2_error"].get<double>() ==
              rec.summary["steady_state_l2_error"].get<double>());
    }
    SECTION("empty sweeps are rejected") {
        CHECK_THROWS_AS(run_sweep(base, "control.k_p", {}, 1), std::invalid_argument);
    }
}

TEST_CASE("shepherd scenario end to end") {
    json doc{{"schema_version", 1},
             {"scenario", "shepherd"},
             {"seed", 2},
             {"shepherd",
              {{"n_targets", 1}, {"n_herders", 1}, {"horizon", 150.0}, {"dt", 0.05}}}};
    const auto cfg = parse_config(doc);
    const auto rec = run_scenario_in_memory(cfg);
    CHECK(rec.summary["success"].get<bool>());  // the two-body case is herdable
}

TEST_CASE("estimator graphs can be given as an explicit edge list") {
    json doc = minimal_direct_config();
    doc["scenario"] = "direct-distributed";
    doc["micro"] = {{"n_agents", 3}, {"dt", 0.002}};
    doc["control"] = {{"u_max", 2.0}};
    doc["estimator"] = {{"graph",
                         {{"family", "edges"},
                          {"edges", {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0},
                                     {2, 0, 1.0}, {0, 2, 1.0}}}}}};
    const auto cfg = parse_config(doc);
    const auto graph = cfg.estimator.graph.build(3);
    CHECK(graph.strongly_connected);
    CHECK(graph.edges.size() == 6);
    CHECK_NOTHROW(run_scenario_in_memory(cfg));
}

TEST_CASE("run summaries carry the resolved-config hash") {
    const auto cfg = parse_config(minimal_direct_config());
    const auto rec = run_scenario(cfg);  // no output dir: in-memory, hash still set
    REQUIRE(rec.summary.contains("config_hash"));
    CHECK(rec.summary["config_hash"].get<std::string>().size() == 16);
    const auto again = run_scenario(cfg);
    CHECK(rec.summary["config_hash"] == again.summary["config_hash"]);
}

TEST_CASE("scaling runs are invariant to the worker count") {
    json doc{{"schema_version", 1},
             {"scenario", "shepherd-scaling"},
             {"seed", 5},
             {"shepherd",
              {{"targets_grid", {4, 8}}, {"seeds_per_point", 3}, {"m_max", 8},
               {"horizon", 60.0}, {"dt", 0.05}, {"jobs", 1}}}};
    const auto one = run_scenario_in_memory(parse_config(doc));
    doc["shepherd"]["jobs"] = 4;
    const auto four = run_scenario_in_memory(parse_config(doc));
    CHECK(detail::to_csv(one) == detail::to_csv(four));
}

TEST_CASE("divergence is reported as such") {
    // an absurd gain drives the macro loop unstable within a few steps
    auto doc = minimal_direct_config();
    doc["control"] = {{"k_p", 1e6}, {"u_max", 1e9}, {"rho_floor_factor", 1e-12}};
    doc["time"] = {{"dt", 0.002}, {"horizon", 5.0}};
    const auto cfg = parse_config(doc);
    CHECK_THROWS(run_scenario_in_memory(cfg));
}
