#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "swarmfield/control.hpp"
#include "swarmfield/estimation.hpp"
#include "swarmfield/kernel.hpp"
#include "swarmfield/ring.hpp"
#include "swarmfield/shepherding.hpp"

namespace swarmfield {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class ScenarioKind {
    direct,
    direct_finite_sensing,
    direct_distributed,
    direct_ot,
    leader_follower_ff,
    leader_follower_rg,
    shepherd,
    shepherd_scaling,
    fields,
};

inline const std::vector<std::pair<ScenarioKind, std::string>>& scenario_names() {
    static const std::vector<std::pair<ScenarioKind, std::string>> names = {
        {ScenarioKind::direct, "direct"},
        {ScenarioKind::direct_finite_sensing, "direct-finite-sensing"},
        {ScenarioKind::direct_distributed, "direct-distributed"},
        {ScenarioKind::direct_ot, "direct-ot"},
        {ScenarioKind::leader_follower_ff, "leader-follower-ff"},
        {ScenarioKind::leader_follower_rg, "leader-follower-rg"},
        {ScenarioKind::shepherd, "shepherd"},
        {ScenarioKind::shepherd_scaling, "shepherd-scaling"},
        {ScenarioKind::fields, "fields"},
    };
    return names;
}

inline std::string to_string(ScenarioKind kind) {
    for (const auto& [k, name] : scenario_names())
        if (k == kind) return name;
    return "unknown";
}

inline std::optional<ScenarioKind> scenario_from_string(const std::string& name) {
    for (const auto& [k, n] : scenario_names())
        if (n == name) return k;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Typed configuration. Parsed from JSON with defaults; validation reports
// every violation rather than stopping at the first.
// ---------------------------------------------------------------------------

struct TargetDensitySpec {
    struct Component {
        double mu = M_PI;
        double kappa = 4.0;
        double weight = 1.0;
    };
    std::string family = "von-mises-mixture";  // uniform | von-mises | von-mises-mixture
    std::vector<Component> components = {{0.5 * M_PI, 4.0, 1.0}, {1.5 * M_PI, 4.0, 1.0}};
};

struct InitialDensitySpec {
    std::string family = "perturbed-uniform";  // perturbed-uniform | uniform | target
    double amplitude = 0.2;
    int modes = 3;
};

struct DisturbanceSpec {
    double amplitude = 0.0;
    int wavenumber = 1;
    double speed = 0.7;
};

struct MicroSpec {
    int n_agents = 0;       // 0 = macro plant
    double dt = 0.01;
    double noise_std = 0.0;
    double kde_bandwidth = 0.2;
    bool control_enabled = true;
};

struct GraphSpec {
    std::string family = "random-regular";  // complete | ring-lattice | random-regular | edges
    int degree = 4;                          // random-regular
    int lattice_k = 2;                       // ring-lattice
    std::uint64_t seed = 1;
    std::vector<std::array<double, 3>> edges;  // (from, to, weight) when family == edges

    CommGraph build(int n_nodes) const {
        if (family == "complete") return CommGraph::complete(n_nodes);
        if (family == "ring-lattice") return CommGraph::ring_lattice(n_nodes, lattice_k);
        if (family == "random-regular") return CommGraph::random_regular(n_nodes, degree, seed);
        if (family == "edges") {
            std::vector<CommGraph::Edge> e;
            for (const auto& row : edges)
                e.push_back({static_cast<int>(row[0]), static_cast<int>(row[1]), row[2]});
            return CommGraph::from_edges(n_nodes, std::move(e));
        }
        throw std::invalid_argument("unknown graph family: " + family);
    }
};

struct EstimatorSpec {
    GraphSpec graph;
    double k_p = 5.0;
    double k_i = 5.0;
    int rounds_per_step = 1;  // consensus rounds per control period
};

struct GovernorSpec {
    double k_alpha = 2.0;
    double deadband = 1e-3;
    double w_scale = 0.12;
};

struct LeaderFollowerSpec {
    double diffusion = 0.05;
    double mass_margin = 1.1;          // leader mass = margin * min_leader_mass
    double follower_amplitude = 0.2;   // target profile (1 + a cos 2x)/2pi
    double kernel_perturbation = 0.0;  // plant kernel strength factor - 1
    GovernorSpec governor;
};

struct OtSpec {
    double replan_dt = 0.5;
};

struct ShepherdSpec {
    int n_targets = 20;
    int n_herders = 3;
    ShepherdParams params;
    double dt = 0.05;
    double horizon = 250.0;
    double success_fraction = 0.9;
    double hold_time = 5.0;
    double spawn_radius = 10.0;
    std::vector<int> targets_grid = {10, 20, 40, 80, 160};
    int seeds_per_point = 10;
    int m_max = 64;
    double success_probability = 0.8;
    int jobs = 2;
};

struct FieldsSpec {
    double d_t0 = 0.02, d_t1 = 0.0;
    double d_h0 = 0.0, d_h1 = 0.0;
    double k_tilde = 0.5;
    double v1_amplitude = 0.0;
    double v2_amplitude = 0.0;
    double goal_position = M_PI;
    double herder_mu = M_PI;
    double herder_kappa = 6.0;
};

struct OutputSpec {
    std::string directory = "";  // empty = no files written
    std::string run_name = "";
    bool write_fields = false;
    bool write_trajectory = false;
    int metrics_stride = 5;  // record every n-th step
};

struct ScenarioConfig {
    ScenarioKind scenario = ScenarioKind::direct;
    std::uint64_t seed = 1;
    RingGrid grid{256, kTwoPi};
    double dt = 0.002;
    double horizon = 5.0;
    InteractionKernel kernel = InteractionKernel::repulsive(1.0, kTwoPi / 4.0);
    TargetDensitySpec target_density;
    InitialDensitySpec initial_density;
    DirectControlConfig control;
    DisturbanceSpec disturbance;
    MicroSpec micro;
    EstimatorSpec estimator;
    LeaderFollowerSpec leader_follower;
    OtSpec ot;
    ShepherdSpec shepherd;
    FieldsSpec fields;
    OutputSpec output;
    json resolved;  // the fully resolved document, for config.resolved dumps

    std::vector<std::string> validate() const;
};

namespace detail {

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (j.contains(key)) return j.at(key).get<T>();
    return fallback;
}

inline double get_radius(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "infinite" || s == "inf") return kInfiniteRadius;
        throw std::invalid_argument("bad radius string: " + s);
    }
    if (v.is_null()) return kInfiniteRadius;
    return v.get<double>();
}

}  // namespace detail

inline ScenarioConfig parse_config(const json& doc) {
    ScenarioConfig cfg;
    if (doc.contains("schema_version")) {
        const int v = doc.at("schema_version").get<int>();
        detail::require(v == kSchemaVersion, "unsupported schema_version");
    }
    {
        const auto name = detail::get_or<std::string>(doc, "scenario", "direct");
        const auto kind = scenario_from_string(name);
        detail::require(kind.has_value(), "unknown scenario: " + name);
        cfg.scenario = *kind;
    }
    cfg.seed = detail::get_or<std::uint64_t>(doc, "seed", 1);

    if (doc.contains("grid")) {
        const auto& g = doc.at("grid");
        cfg.grid = RingGrid(detail::get_or<int>(g, "n_cells", 256),
                            detail::get_or<double>(g, "length", kTwoPi));
    }
    if (doc.contains("time")) {
        const auto& t = doc.at("time");
        cfg.dt = detail::get_or<double>(t, "dt", cfg.dt);
        cfg.horizon = detail::get_or<double>(t, "horizon", cfg.horizon);
    }
    if (doc.contains("kernel")) {
        const auto& k = doc.at("kernel");
        const auto family = detail::get_or<std::string>(k, "family", "repulsive-exponential");
        const double strength = detail::get_or<double>(k, "strength", 1.0);
        const double decay = detail::get_or<double>(k, "decay_length", kTwoPi / 4.0);
        if (family == "zero")
            cfg.kernel = InteractionKernel::zero();
        else if (family == "repulsive-exponential")
            cfg.kernel = InteractionKernel::repulsive(strength, decay);
        else if (family == "attractive-exponential")
            cfg.kernel = InteractionKernel::attractive(strength, decay);
        else
            throw std::invalid_argument("unknown kernel family: " + family);
    }
    if (doc.contains("target_density")) {
        const auto& t = doc.at("target_density");
        cfg.target_density.family = detail::get_or<std::string>(t, "family", cfg.target_density.family);
        if (t.contains("components")) {
            cfg.target_density.components.clear();
            for (const auto& c : t.at("components"))
                cfg.target_density.components.push_back({detail::get_or<double>(c, "mu", M_PI),
                                                         detail::get_or<double>(c, "kappa", 4.0),
                                                         detail::get_or<double>(c, "weight", 1.0)});
        }
    }
    if (doc.contains("initial_density")) {
        const auto& t = doc.at("initial_density");
        cfg.initial_density.family = detail::get_or<std::string>(t, "family", cfg.initial_density.family);
        cfg.initial_density.amplitude = detail::get_or<double>(t, "amplitude", cfg.initial_density.amplitude);
        cfg.initial_density.modes = detail::get_or<int>(t, "modes", cfg.initial_density.modes);
    }
    if (doc.contains("control")) {
        const auto& c = doc.at("control");
        cfg.control.k_p = detail::get_or<double>(c, "k_p", cfg.control.k_p);
        cfg.control.sensing_radius = detail::get_radius(c, "sensing_radius", cfg.control.sensing_radius);
        cfg.control.u_max = detail::get_or<double>(c, "u_max", cfg.control.u_max);
        cfg.control.rho_floor_factor =
            detail::get_or<double>(c, "rho_floor_factor", cfg.control.rho_floor_factor);
    }
    if (doc.contains("disturbance")) {
        const auto& d = doc.at("disturbance");
        cfg.disturbance.amplitude = detail::get_or<double>(d, "amplitude", 0.0);
        cfg.disturbance.wavenumber = detail::get_or<int>(d, "wavenumber", 1);
        cfg.disturbance.speed = detail::get_or<double>(d, "speed", 0.7);
    }
    if (doc.contains("micro")) {
        const auto& m = doc.at("micro");
        cfg.micro.n_agents = detail::get_or<int>(m, "n_agents", 0);
        cfg.micro.dt = detail::get_or<double>(m, "dt", cfg.micro.dt);
        cfg.micro.noise_std = detail::get_or<double>(m, "noise_std", 0.0);
        cfg.micro.kde_bandwidth = detail::get_or<double>(m, "kde_bandwidth", 0.2);
        cfg.micro.control_enabled = detail::get_or<bool>(m, "control_enabled", true);
    }
    if (doc.contains("estimator")) {
        const auto& e = doc.at("estimator");
        if (e.contains("graph")) {
            const auto& g = e.at("graph");
            cfg.estimator.graph.family = detail::get_or<std::string>(g, "family", "random-regular");
            cfg.estimator.graph.degree = detail::get_or<int>(g, "degree", 4);
            cfg.estimator.graph.lattice_k = detail::get_or<int>(g, "lattice_k", 2);
            cfg.estimator.graph.seed = detail::get_or<std::uint64_t>(g, "seed", 1);
            if (g.contains("edges"))
                for (const auto& row : g.at("edges"))
                    cfg.estimator.graph.edges.push_back(
                        {row.at(0).get<double>(), row.at(1).get<double>(), row.at(2).get<double>()});
        }
        cfg.estimator.k_p = detail::get_or<double>(e, "k_p", 5.0);
        cfg.estimator.k_i = detail::get_or<double>(e, "k_i", 5.0);
        cfg.estimator.rounds_per_step = detail::get_or<int>(e, "rounds_per_step", 1);
    }
    if (doc.contains("leader_follower")) {
        const auto& l = doc.at("leader_follower");
        cfg.leader_follower.diffusion = detail::get_or<double>(l, "diffusion", 0.05);
        cfg.leader_follower.mass_margin = detail::get_or<double>(l, "mass_margin", 1.1);
        cfg.leader_follower.follower_amplitude =
            detail::get_or<double>(l, "follower_amplitude", 0.2);
        cfg.leader_follower.kernel_perturbation =
            detail::get_or<double>(l, "kernel_perturbation", 0.0);
        if (l.contains("governor")) {
            const auto& g = l.at("governor");
            cfg.leader_follower.governor.k_alpha = detail::get_or<double>(g, "k_alpha", 2.0);
            cfg.leader_follower.governor.deadband = detail::get_or<double>(g, "deadband", 1e-3);
            cfg.leader_follower.governor.w_scale = detail::get_or<double>(g, "w_scale", 0.12);
        }
    }
    if (doc.contains("ot")) cfg.ot.replan_dt = detail::get_or<double>(doc.at("ot"), "replan_dt", 0.5);
    if (doc.contains("shepherd")) {
        const auto& s = doc.at("shepherd");
        auto& sp = cfg.shepherd;
        sp.n_targets = detail::get_or<int>(s, "n_targets", sp.n_targets);
        sp.n_herders = detail::get_or<int>(s, "n_herders", sp.n_herders);
        sp.params.gamma = detail::get_or<double>(s, "gamma", sp.params.gamma);
        sp.params.delta = detail::get_or<double>(s, "delta", sp.params.delta);
        sp.params.xi = detail::get_or<double>(s, "xi", sp.params.xi);
        sp.params.lambda = detail::get_or<double>(s, "lambda", sp.params.lambda);
        sp.params.repulsion_strength =
            detail::get_or<double>(s, "repulsion_strength", sp.params.repulsion_strength);
        sp.params.target_noise = detail::get_or<double>(s, "target_noise", sp.params.target_noise);
        sp.params.herder_speed_cap =
            detail::get_or<double>(s, "herder_speed_cap", sp.params.herder_speed_cap);
        sp.params.idle_speed = detail::get_or<double>(s, "idle_speed", sp.params.idle_speed);
        sp.params.goal_radius = detail::get_or<double>(s, "goal_radius", sp.params.goal_radius);
        sp.params.arena_radius = detail::get_or<double>(s, "arena_radius", sp.params.arena_radius);
        sp.params.containment_factor =
            detail::get_or<double>(s, "containment_factor", sp.params.containment_factor);
        sp.dt = detail::get_or<double>(s, "dt", sp.dt);
        sp.horizon = detail::get_or<double>(s, "horizon", sp.horizon);
        sp.success_fraction = detail::get_or<double>(s, "success_fraction", sp.success_fraction);
        sp.hold_time = detail::get_or<double>(s, "hold_time", sp.hold_time);
        sp.spawn_radius = detail::get_or<double>(s, "spawn_radius", sp.spawn_radius);
        if (s.contains("targets_grid")) sp.targets_grid = s.at("targets_grid").get<std::vector<int>>();
        sp.seeds_per_point = detail::get_or<int>(s, "seeds_per_point", sp.seeds_per_point);
        sp.m_max = detail::get_or<int>(s, "m_max", sp.m_max);
        sp.success_probability =
            detail::get_or<double>(s, "success_probability", sp.success_probability);
        sp.jobs = detail::get_or<int>(s, "jobs", sp.jobs);
    }
    if (doc.contains("fields")) {
        const auto& f = doc.at("fields");
        cfg.fields.d_t0 = detail::get_or<double>(f, "d_t0", cfg.fields.d_t0);
        cfg.fields.d_t1 = detail::get_or<double>(f, "d_t1", cfg.fields.d_t1);
        cfg.fields.d_h0 = detail::get_or<double>(f, "d_h0", cfg.fields.d_h0);
        cfg.fields.d_h1 = detail::get_or<double>(f, "d_h1", cfg.fields.d_h1);
        cfg.fields.k_tilde = detail::get_or<double>(f, "k_tilde", cfg.fields.k_tilde);
        cfg.fields.v1_amplitude = detail::get_or<double>(f, "v1_amplitude", cfg.fields.v1_amplitude);
        cfg.fields.v2_amplitude = detail::get_or<double>(f, "v2_amplitude", cfg.fields.v2_amplitude);
        cfg.fields.goal_position = detail::get_or<double>(f, "goal_position", cfg.fields.goal_position);
        cfg.fields.herder_mu = detail::get_or<double>(f, "herder_mu", cfg.fields.herder_mu);
        cfg.fields.herder_kappa = detail::get_or<double>(f, "herder_kappa", cfg.fields.herder_kappa);
    }
    if (doc.contains("output")) {
        const auto& o = doc.at("output");
        cfg.output.directory = detail::get_or<std::string>(o, "directory", "");
        cfg.output.run_name = detail::get_or<std::string>(o, "run_name", "");
        cfg.output.write_fields = detail::get_or<bool>(o, "write_fields", false);
        cfg.output.write_trajectory = detail::get_or<bool>(o, "write_trajectory", false);
        cfg.output.metrics_stride = detail::get_or<int>(o, "metrics_stride", 5);
    }
    cfg.resolved = doc;
    cfg.resolved["schema_version"] = kSchemaVersion;
    cfg.resolved["scenario"] = to_string(cfg.scenario);
    cfg.resolved["seed"] = cfg.seed;
    return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    detail::require(in.good(), "cannot open config file: " + path);
    json doc = json::parse(in);
    return parse_config(doc);
}

// ---------------------------------------------------------------------------
// Density builders shared by the scenario drivers
// ---------------------------------------------------------------------------

inline DensityField build_target_density(const RingGrid& grid, const TargetDensitySpec& spec) {
    if (spec.family == "uniform") return DensityField::uniform(grid);
    detail::require(spec.family == "von-mises" || spec.family == "von-mises-mixture",
                    "unknown target density family: " + spec.family);
    detail::require(!spec.components.empty(), "target density needs at least one component");
    const double freq = kTwoPi / grid.length;
    auto rho = DensityField::from_function(grid, [&](double x) {
        double v = 0.0;
        for (const auto& c : spec.components)
            v += c.weight * std::exp(c.kappa * std::cos(freq * (x - c.mu)));
        return v;
    });
    rho.scale_to_mass(1.0);
    return rho;
}

// mass-matched perturbed-uniform start; random phases and per-mode weights
// from the seed
inline DensityField build_initial_density(const RingGrid& grid, const InitialDensitySpec& spec,
                                          const TargetDensitySpec& target, std::uint64_t seed) {
    if (spec.family == "uniform") return DensityField::uniform(grid);
    if (spec.family == "target") return build_target_density(grid, target);
    detail::require(spec.family == "perturbed-uniform",
                    "unknown initial density family: " + spec.family);
    Rng rng(derive_seed(seed, 0x1c0d));
    std::vector<double> amp(static_cast<std::size_t>(spec.modes));
    std::vector<double> phase(static_cast<std::size_t>(spec.modes));
    for (int m = 0; m < spec.modes; ++m) {
        amp[static_cast<std::size_t>(m)] = spec.amplitude * rng.uniform(0.5, 1.0) / (m + 1);
        phase[static_cast<std::size_t>(m)] = rng.uniform(0.0, kTwoPi);
    }
    const double freq = kTwoPi / grid.length;
    auto rho = DensityField::from_function(grid, [&](double x) {
        double v = 1.0;
        for (int m = 0; m < spec.modes; ++m)
            v += amp[static_cast<std::size_t>(m)] *
                 std::cos((m + 1) * freq * x + phase[static_cast<std::size_t>(m)]);
        return std::max(v, 1e-6);
    });
    rho.scale_to_mass(1.0);
    return rho;
}

inline std::vector<std::string> ScenarioConfig::validate() const {
    std::vector<std::string> violations;
    const auto check = [&](bool ok, const std::string& msg) {
        if (!ok) violations.push_back(msg);
    };
    check(grid.n_cells >= 4, "grid.n_cells must be >= 4");
    check(grid.length > 0.0, "grid.length must be > 0");
    check(dt > 0.0, "time.dt must be > 0");
    check(horizon > dt, "time.horizon must exceed time.dt");
    check(control.k_p > 0.0, "control.k_p must be > 0");
    check(control.u_max > 0.0, "control.u_max must be > 0");
    check(control.sensing_radius > 0.0 &&
              (control.sensing_radius == kInfiniteRadius ||
               control.sensing_radius <= 0.5 * grid.length),
          "control.sensing_radius must lie in (0, length/2] or be infinite");
    check(initial_density.amplitude >= 0.0 && initial_density.amplitude <= 0.3,
          "initial_density.amplitude must lie in [0, 0.3]");
    check(initial_density.modes >= 1 && initial_density.modes <= 8,
          "initial_density.modes must lie in [1, 8]");
    for (const auto& c : target_density.components) {
        check(c.kappa >= 0.0, "target_density kappa must be >= 0");
        check(c.weight > 0.0, "target_density weights must be > 0");
    }
    check(micro.n_agents >= 0, "micro.n_agents must be >= 0");
    check(micro.dt > 0.0, "micro.dt must be > 0");
    check(micro.noise_std >= 0.0, "micro.noise_std must be >= 0");
    check(micro.kde_bandwidth > 0.0, "micro.kde_bandwidth must be > 0");
    check(estimator.k_p > 0.0 && estimator.k_i > 0.0, "estimator gains must be > 0");
    check(estimator.rounds_per_step >= 1, "estimator.rounds_per_step must be >= 1");
    check(leader_follower.diffusion > 0.0, "leader_follower.diffusion must be > 0");
    check(leader_follower.mass_margin >= 1.0, "leader_follower.mass_margin must be >= 1");
    check(leader_follower.follower_amplitude > 0.0 && leader_follower.follower_amplitude < 1.0,
          "leader_follower.follower_amplitude must lie in (0, 1)");
    check(ot.replan_dt > 0.0, "ot.replan_dt must be > 0");
    check(shepherd.n_targets >= 1 && shepherd.n_herders >= 1,
          "shepherd populations must be >= 1");
    check(shepherd.dt > 0.0 && shepherd.horizon > shepherd.dt, "shepherd time settings invalid");
    check(shepherd.spawn_radius > shepherd.params.goal_radius &&
              shepherd.spawn_radius <= shepherd.params.arena_radius,
          "shepherd.spawn_radius must lie in (goal_radius, arena_radius]");
    try {
        shepherd.params.validate();
    } catch (const std::exception& err) {
        violations.push_back(err.what());
    }
    check(fields.d_t0 >= 0.0 && fields.d_h0 >= 0.0, "fields diffusivities must be >= 0");
    check(output.metrics_stride >= 1, "output.metrics_stride must be >= 1");

    // CFL feasibility against the static bounds of the configured scenario
    const double dx = grid.dx();
    double v_bound = 0.0, d_bound = 0.0;
    switch (scenario) {
        case ScenarioKind::direct:
        case ScenarioKind::direct_finite_sensing: {
            if (micro.n_agents > 0) break;  // agent stepping has no CFL bound
            double kernel_sup = kernel.family == KernelFamily::zero ? 0.0 : std::abs(kernel.strength);
            v_bound = control.u_max + kernel_sup + disturbance.amplitude;
            break;
        }
        case ScenarioKind::direct_distributed:
            break;  // always a micro plant
        case ScenarioKind::direct_ot:
            v_bound = 0.0;  // the driver substeps each replan window adaptively
            break;
        case ScenarioKind::leader_follower_ff:
        case ScenarioKind::leader_follower_rg:
            v_bound = control.u_max + std::abs(kernel.strength);
            d_bound = leader_follower.diffusion;
            break;
        case ScenarioKind::fields:
            d_bound = std::max(fields.d_t0 + fields.d_t1, fields.d_h0 + fields.d_h1);
            break;
        default:
            break;
    }
    if (v_bound > 0.0 || d_bound > 0.0) {
        const double admissible = 0.9 / (v_bound / dx + 2.0 * d_bound / (dx * dx));
        if (dt > admissible) {
            std::ostringstream msg;
            msg << "time.dt=" << dt << " violates the CFL bound for this scenario (admissible dt="
                << admissible << ")";
            violations.push_back(msg.str());
        }
    }
    return violations;
}

}  // namespace swarmfield
