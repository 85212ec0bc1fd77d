#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <string>
#include <vector>

#include "swarmfield/control.hpp"
#include "swarmfield/estimation.hpp"
#include "swarmfield/leader_follower.hpp"
#include "swarmfield/metrics.hpp"
#include "swarmfield/micro.hpp"
#include "swarmfield/pde.hpp"
#include "swarmfield/scenario.hpp"
#include "swarmfield/shepherding.hpp"
#include "swarmfield/transport.hpp"

namespace swarmfield {

// thrown when a run produces non-finite state; the CLI maps it to exit 3
struct DivergenceError : std::runtime_error {
    json snapshot;  // whatever state the driver could capture at failure
    explicit DivergenceError(const std::string& msg, json snap = {})
        : std::runtime_error(msg), snapshot(std::move(snap)) {}
};

// ---------------------------------------------------------------------------
// Run record: a time series of named columns plus a terminal summary.
// Rows must be strictly increasing in t and mass columns must stay positive.
// ---------------------------------------------------------------------------
struct RunRecord {
    std::vector<std::string> columns;  // first column is "t"
    std::vector<std::vector<double>> rows;
    json summary;

    void append(const std::vector<double>& row) {
        detail::require(row.size() == columns.size(), "RunRecord: row width mismatch");
        if (!rows.empty())
            detail::require(row[0] > rows.back()[0], "RunRecord: rows must be strictly increasing in t");
        for (std::size_t c = 0; c < columns.size(); ++c) {
            detail::require(std::isfinite(row[c]), "RunRecord: non-finite value in column " + columns[c]);
            if (columns[c].rfind("mass", 0) == 0)
                detail::require(row[c] > 0.0, "RunRecord: mass column must stay positive");
        }
        rows.push_back(row);
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// write-then-rename so interrupted runs never leave partial files
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot open for writing: " + tmp);
        out << content;
        out.flush();
        require(out.good(), "write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::string to_csv(const RunRecord& record) {
    std::string out;
    for (std::size_t c = 0; c < record.columns.size(); ++c) {
        out += record.columns[c];
        out += (c + 1 < record.columns.size()) ? ',' : '\n';
    }
    for (const auto& row : record.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += format_double(row[c]);
            out += (c + 1 < row.size()) ? ',' : '\n';
        }
    }
    return out;
}

inline void check_finite_field(const DensityField& rho, double t, const std::string& name) {
    for (double v : rho.values)
        if (!std::isfinite(v)) {
            json snap;
            snap["t"] = t;
            snap["field"] = name;
            snap["values"] = rho.values;
            throw DivergenceError("non-finite " + name + " at t=" + format_double(t),
                                  std::move(snap));
        }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario drivers
// ---------------------------------------------------------------------------
namespace drivers {

struct FieldDump {
    std::vector<std::string> names;
    std::vector<std::pair<double, std::vector<std::vector<double>>>> snapshots;  // (t, fields)
};

// macro direct-control loop (also the finite-sensing and disturbance cases):
// plant rho_t + [rho (f*rho + U + d)]_x = 0 with U recovered from the
// continuification source each step
inline RunRecord run_direct_macro(const ScenarioConfig& cfg, FieldDump* dump = nullptr) {
    const RingGrid& grid = cfg.grid;
    const auto rho_d = build_target_density(grid, cfg.target_density);
    DensityField rho = build_initial_density(grid, cfg.initial_density, cfg.target_density, cfg.seed);
    const double floor = cfg.control.rho_floor_factor * rho.mass / grid.length;

    RunRecord rec;
    rec.columns = {"t", "l2_error", "l1_error", "w1_error", "mass", "lyapunov"};
    FvDiagnostics diag;
    const auto steps = static_cast<long long>(std::llround(cfg.horizon / cfg.dt));
    double lyap_prev = lyapunov_value(rho, rho_d);
    bool lyap_monotone = true;
    for (long long s = 0; s <= steps; ++s) {
        const double t = s * cfg.dt;
        if (s % cfg.output.metrics_stride == 0 || s == steps) {
            const auto m = metrics(rho, rho_d);
            rec.append({t, m.l2, m.l1, m.w1, rho.mass, lyapunov_value(rho, rho_d)});
            if (dump) dump->snapshots.push_back({t, {rho.values}});
        }
        if (s == steps) break;
        const auto q = control_source(rho, rho_d, cfg.kernel, cfg.control);
        VelocityField u = recover_velocity(rho, q, floor);
        const auto v_int = convolve_periodic(grid, rho.values, cfg.kernel);
        std::vector<double> w(static_cast<std::size_t>(grid.n_cells));
        for (int k = 0; k < grid.n_cells; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            double val = std::clamp(u.values[kk], -cfg.control.u_max, cfg.control.u_max) + v_int[kk];
            if (cfg.disturbance.amplitude != 0.0)
                val += cfg.disturbance.amplitude *
                       std::sin(cfg.disturbance.wavenumber * (grid.center(k) - cfg.disturbance.speed * t));
            w[kk] = val;
        }
        rho = step_conservation(rho, AdvectionDiffusionSpec(std::move(w), 0.0), cfg.dt, &diag);
        detail::check_finite_field(rho, t, "density");
        const double lyap = lyapunov_value(rho, rho_d);
        if (lyap > lyap_prev + 1e-3 * cfg.dt) lyap_monotone = false;
        lyap_prev = lyap;
    }
    const auto final_metrics = metrics(rho, rho_d);
    rec.summary["steady_state_l2_error"] = final_metrics.l2;
    rec.summary["steady_state_w1_error"] = final_metrics.w1;
    rec.summary["lyapunov_nonincreasing"] = lyap_monotone;
    rec.summary["clamped_mass"] = diag.clamped_mass;
    rec.summary["success"] = final_metrics.l2 < 1e-3;
    if (dump) dump->names = {"rho"};
    return rec;
}

// micro direct control: N agents, centralised KDE in the loop or per-agent
// distributed estimates; the controller runs at the macro dt with
// sample-and-hold between micro substeps
inline RunRecord run_direct_micro(const ScenarioConfig& cfg) {
    const RingGrid& grid = cfg.grid;
    const bool distributed = cfg.scenario == ScenarioKind::direct_distributed;
    const auto rho_d = build_target_density(grid, cfg.target_density);
    const auto rho0 = build_initial_density(grid, cfg.initial_density, cfg.target_density, cfg.seed);
    auto pop = sample_initial_positions(cfg.micro.n_agents, rho0, cfg.seed);
    const int n = pop.size();
    const double floor = cfg.control.rho_floor_factor / grid.length;

    std::optional<DistributedEstimator> estimator;
    std::optional<CommGraph> graph;
    if (distributed) {
        estimator.emplace(grid, n, cfg.estimator.k_p, cfg.estimator.k_i);
        graph = cfg.estimator.graph.build(n);
        detail::require(graph->strongly_connected,
                        "direct-distributed requires a strongly connected graph");
    }

    RunRecord rec;
    rec.columns = {"t", "l2_error", "l1_error", "w1_error", "mass", "lyapunov"};
    if (distributed) {
        rec.columns.push_back("max_estimate_error");
        rec.columns.push_back("mean_estimate_error");
    }

    const int substeps = std::max(1, static_cast<int>(std::llround(cfg.dt / cfg.micro.dt)));
    const double micro_dt = cfg.dt / substeps;
    const auto periods = static_cast<long long>(std::llround(cfg.horizon / cfg.dt));
    std::vector<double> inputs(static_cast<std::size_t>(n), 0.0);
    double max_est_err = 0.0, mean_est_err = 0.0;

    for (long long s = 0; s <= periods; ++s) {
        const double t = s * cfg.dt;
        const DensityField kde = kde_estimate(pop, grid, cfg.micro.kde_bandwidth);
        if (distributed) {
            std::vector<std::vector<double>> signals;
            signals.reserve(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i)
                signals.push_back(local_signal(i, pop, grid, cfg.micro.kde_bandwidth));
            for (int round = 0; round < cfg.estimator.rounds_per_step; ++round)
                consensus_step(*estimator, *graph, signals, cfg.dt);
            const auto errs = estimation_error(*estimator, kde);
            max_est_err = *std::max_element(errs.begin(), errs.end());
            mean_est_err = 0.0;
            for (double e : errs) mean_est_err += e / n;
        }
        if (s % cfg.output.metrics_stride == 0 || s == periods) {
            const auto m = metrics(kde, rho_d);
            std::vector<double> row{t, m.l2, m.l1, m.w1, kde.mass, lyapunov_value(kde, rho_d)};
            if (distributed) {
                row.push_back(max_est_err);
                row.push_back(mean_est_err);
            }
            rec.append(row);
        }
        if (s == periods) break;

        if (!cfg.micro.control_enabled) {
            std::fill(inputs.begin(), inputs.end(), 0.0);
        } else if (!distributed) {
            const auto q = control_source(kde, rho_d, cfg.kernel, cfg.control);
            const VelocityField u = recover_velocity(kde, q, floor);
            inputs = discretise_inputs(u, pop.positions);
        } else {
            // each agent computes its own control from its clamped estimate
            for (int i = 0; i < n; ++i) {
                DensityField est = estimator->clamped_estimate(i);
                if (est.mass <= 1e-12) {
                    inputs[static_cast<std::size_t>(i)] = 0.0;
                    continue;
                }
                est.scale_to_mass(1.0);  // agents know the population is counted
                const auto q = control_source(est, rho_d, cfg.kernel, cfg.control);
                const VelocityField u = recover_velocity(est, q, floor);
                const auto ui = discretise_inputs(
                    u, std::span<const double>(&pop.positions[static_cast<std::size_t>(i)], 1));
                inputs[static_cast<std::size_t>(i)] = ui[0];
            }
        }
        for (double& v : inputs) v = std::clamp(v, -cfg.control.u_max, cfg.control.u_max);
        for (int sub = 0; sub < substeps; ++sub)
            step_agents(pop, cfg.kernel, inputs, micro_dt, cfg.micro.noise_std);
        for (double x : pop.positions)
            if (!std::isfinite(x)) throw DivergenceError("non-finite agent position");
    }
    const DensityField kde = kde_estimate(pop, grid, cfg.micro.kde_bandwidth);
    rec.summary["steady_state_l2_error"] = l2_distance(kde, rho_d);
    rec.summary["max_estimate_error"] = max_est_err;
    rec.summary["success"] = true;
    return rec;
}

// OT-velocity steering toward a static target: replan the circular map every
// replan window, substep the advection CFL-admissibly inside the window
inline RunRecord run_direct_ot(const ScenarioConfig& cfg, FieldDump* dump = nullptr) {
    const RingGrid& grid = cfg.grid;
    const auto rho_d = build_target_density(grid, cfg.target_density);
    DensityField rho = build_initial_density(grid, cfg.initial_density, cfg.target_density, cfg.seed);

    RunRecord rec;
    rec.columns = {"t", "l2_error", "l1_error", "w1_error", "mass", "kinetic_energy"};
    FvDiagnostics diag;
    const auto windows = static_cast<long long>(std::llround(cfg.horizon / cfg.ot.replan_dt));
    double t = 0.0;
    for (long long w = 0; w <= windows; ++w) {
        const auto m = metrics(rho, rho_d);
        double ke = 0.0;
        VelocityField u(grid, std::vector<double>(static_cast<std::size_t>(grid.n_cells), 0.0));
        if (w < windows) {
            u = ot_velocity_field(rho, rho_d, cfg.ot.replan_dt);
            for (int k = 0; k < grid.n_cells; ++k)
                ke += rho.values[static_cast<std::size_t>(k)] *
                      u.values[static_cast<std::size_t>(k)] * u.values[static_cast<std::size_t>(k)] *
                      grid.dx();
        }
        rec.append({t, m.l2, m.l1, m.w1, rho.mass, ke});
        if (dump) dump->snapshots.push_back({t, {rho.values}});
        if (w == windows) break;
        const double dt_cfl = 0.9 * cfl_admissible_dt(grid, u.values, 0.0);
        const int sub = std::max(1, static_cast<int>(std::ceil(cfg.ot.replan_dt / dt_cfl)));
        const AdvectionDiffusionSpec spec(u.values, 0.0);
        for (int q = 0; q < sub; ++q)
            rho = step_conservation(rho, spec, cfg.ot.replan_dt / sub, &diag);
        detail::check_finite_field(rho, t, "density");
        t += cfg.ot.replan_dt;
    }
    const auto final_metrics = metrics(rho, rho_d);
    rec.summary["steady_state_w1_error"] = final_metrics.w1;
    rec.summary["steady_state_l2_error"] = final_metrics.l2;
    rec.summary["clamped_mass"] = diag.clamped_mass;
    rec.summary["success"] = final_metrics.w1 < 2.0 * grid.dx();
    if (dump) dump->names = {"rho"};
    return rec;
}

// leader-follower pair: feedforward or reference-governor leader control,
// follower transported by the (possibly perturbed) plant kernel
inline RunRecord run_leader_follower(const ScenarioConfig& cfg, FieldDump* dump = nullptr) {
    const RingGrid& grid = cfg.grid;
    const bool governed = cfg.scenario == ScenarioKind::leader_follower_rg;
    const double D = cfg.leader_follower.diffusion;
    const double freq = kTwoPi / grid.length;

    auto rho_F_bar = DensityField::from_function(grid, [&](double x) {
        return 1.0 + cfg.leader_follower.follower_amplitude * std::cos(2.0 * freq * x);
    });
    rho_F_bar.scale_to_mass(1.0);

    const double m_min = min_leader_mass(rho_F_bar, cfg.kernel, D);
    const auto ref = leader_reference(rho_F_bar, cfg.kernel, D,
                                      cfg.leader_follower.mass_margin * m_min);
    const auto rho_L_bar = ref.as_density();
    Governor governor = make_governor(ref, cfg.leader_follower.governor.k_alpha,
                                      cfg.leader_follower.governor.w_scale,
                                      cfg.leader_follower.governor.deadband);

    // the followers respond to a possibly perturbed plant kernel
    InteractionKernel plant_kernel = cfg.kernel;
    const double perturbation_factor = 1.0 + cfg.leader_follower.kernel_perturbation;
    plant_kernel.strength *= perturbation_factor;
    for (double& v : plant_kernel.table) v *= perturbation_factor;

    // seeded perturbed starts for leaders and followers
    InitialDensitySpec ic;
    ic.amplitude = 0.1;
    ic.modes = 2;
    DensityField rho_F = build_initial_density(grid, ic, cfg.target_density, derive_seed(cfg.seed, 1));
    DensityField rho_L = build_initial_density(grid, ic, cfg.target_density, derive_seed(cfg.seed, 2));
    rho_L.scale_to_mass(rho_L_bar.mass);

    RunRecord rec;
    rec.columns = {"t",           "follower_l2_error", "leader_l2_error",
                   "mass_follower", "mass_leader",     "alpha"};
    FvDiagnostics diag;
    const auto steps = static_cast<long long>(std::llround(cfg.horizon / cfg.dt));
    for (long long s = 0; s <= steps; ++s) {
        const double t = s * cfg.dt;
        const double follower_err = l2_distance(rho_F, rho_F_bar);
        if (s % cfg.output.metrics_stride == 0 || s == steps) {
            rec.append({t, follower_err, l2_distance(rho_L, rho_L_bar), rho_F.mass, rho_L.mass,
                        governor.alpha});
            if (dump) dump->snapshots.push_back({t, {rho_F.values, rho_L.values}});
        }
        if (s == steps) break;
        const DensityField target = governed ? governed_reference(governor, rho_L_bar) : rho_L_bar;
        const VelocityField u =
            feedforward_leader_velocity(rho_L, target, InteractionKernel::zero(), cfg.control);
        rho_L = step_conservation(rho_L, AdvectionDiffusionSpec(u.values, 0.0), cfg.dt, &diag);
        rho_F = step_follower(rho_F, rho_L, plant_kernel, D, cfg.dt, &diag);
        detail::check_finite_field(rho_L, t, "leader density");
        detail::check_finite_field(rho_F, t, "follower density");
        if (governed) governor_update(governor, follower_err, cfg.dt);
    }
    const double final_err = l2_distance(rho_F, rho_F_bar);
    rec.summary["steady_state_follower_error"] = final_err;
    rec.summary["relative_follower_error"] = final_err / l2_norm(rho_F_bar);
    rec.summary["leader_mass"] = rho_L_bar.mass;
    rec.summary["min_leader_mass"] = m_min;
    rec.summary["alpha_final"] = governor.alpha;
    rec.summary["clamped_mass"] = diag.clamped_mass;
    rec.summary["success"] = final_err < 0.05 * l2_norm(rho_F_bar);
    if (dump) dump->names = {"rho_F", "rho_L"};
    return rec;
}

// single shepherding trial, optionally recording the trajectory
inline RunRecord run_shepherd(const ScenarioConfig& cfg, ShepherdTrajectory* trajectory = nullptr) {
    const auto& sp = cfg.shepherd;
    ShepherdTrialSpec spec;
    spec.dt = sp.dt;
    spec.horizon = sp.horizon;
    spec.success_fraction = sp.success_fraction;
    spec.hold_time = sp.hold_time;
    spec.spawn_radius = sp.spawn_radius;
    spec.record_herders = true;
    const bool keep = trajectory != nullptr || cfg.output.write_trajectory;
    const auto result =
        run_shepherd_trial(sp.n_targets, sp.n_herders, sp.params, spec, cfg.seed, keep);

    RunRecord rec;
    rec.columns = {"t", "fraction_in_goal", "mean_goal_distance"};
    if (keep) {
        for (std::size_t s = 0; s < result.trajectory.target_snapshots.size(); ++s) {
            if (s % static_cast<std::size_t>(cfg.output.metrics_stride) != 0) continue;
            const auto& snap = result.trajectory.target_snapshots[s];
            int inside = 0;
            double mean_dist = 0.0;
            for (const Vec2& t : snap) {
                if (t.norm() <= sp.params.goal_radius) ++inside;
                mean_dist += t.norm() / static_cast<double>(snap.size());
            }
            rec.append({(static_cast<double>(s) + 1.0) * spec.dt,
                        static_cast<double>(inside) / static_cast<double>(snap.size()), mean_dist});
        }
    }
    rec.summary["success"] = result.success;
    rec.summary["time_to_success"] = result.time_to_success;
    rec.summary["final_fraction_in_goal"] = result.final_fraction_in_goal;
    if (trajectory) *trajectory = result.trajectory;
    return rec;
}

// herdability scaling experiment: min_herders over the target grid plus the
// fitted power law
inline RunRecord run_shepherd_scaling(const ScenarioConfig& cfg) {
    const auto& sp = cfg.shepherd;
    MinHerdersBudget budget;
    budget.seeds = sp.seeds_per_point;
    budget.m_max = sp.m_max;
    budget.success_probability = sp.success_probability;
    budget.trial.dt = sp.dt;
    budget.trial.horizon = sp.horizon;
    budget.trial.success_fraction = sp.success_fraction;
    budget.trial.hold_time = sp.hold_time;
    budget.trial.spawn_radius = sp.spawn_radius;
    budget.jobs = sp.jobs;

    RunRecord rec;
    rec.columns = {"t", "n_targets", "m_star", "herdable"};
    std::vector<double> nt, ms;
    json curves = json::array();
    for (std::size_t idx = 0; idx < sp.targets_grid.size(); ++idx) {
        const int n_targets = sp.targets_grid[idx];
        const auto res = min_herders(n_targets, sp.params, budget, cfg.seed);
        rec.append({static_cast<double>(idx + 1), static_cast<double>(n_targets),
                    static_cast<double>(res.m_star), res.herdable ? 1.0 : 0.0});
        json curve = json::array();
        for (const auto& [m, rate] : res.probe_curve) curve.push_back({{"m", m}, {"rate", rate}});
        curves.push_back({{"n_targets", n_targets}, {"m_star", res.m_star}, {"curve", curve}});
        if (res.herdable) {
            nt.push_back(n_targets);
            ms.push_back(res.m_star);
        }
    }
    rec.summary["curves"] = curves;
    if (nt.size() == sp.targets_grid.size() && nt.size() >= 2) {
        const auto fit = fit_power_law(nt, ms);
        rec.summary["alpha"] = fit.alpha;
        rec.summary["alpha_stderr"] = fit.alpha_stderr;
        rec.summary["alpha_ci95_low"] = fit.alpha - 1.96 * fit.alpha_stderr;
        rec.summary["alpha_ci95_high"] = fit.alpha + 1.96 * fit.alpha_stderr;
        rec.summary["log_prefactor"] = fit.log_c;
        rec.summary["r_squared"] = fit.r_squared;
        rec.summary["success"] = fit.alpha > 0.0 && fit.alpha < 1.0 && fit.r_squared >= 0.8;
    } else {
        rec.summary["success"] = false;
    }
    return rec;
}

// coupled nonreciprocal field equations with a frozen herder bump
inline RunRecord run_fields(const ScenarioConfig& cfg, FieldDump* dump = nullptr) {
    const RingGrid& grid = cfg.grid;
    const auto& f = cfg.fields;
    NonreciprocalSpec spec;
    spec.D_T0 = f.d_t0;
    spec.D_T1 = f.d_t1;
    spec.D_H0 = f.d_h0;
    spec.D_H1 = f.d_h1;
    spec.k_tilde_T = f.k_tilde;
    spec.goal_position = f.goal_position;
    const double freq = kTwoPi / grid.length;
    if (f.v1_amplitude != 0.0) {
        spec.v1.assign(static_cast<std::size_t>(grid.n_cells), f.v1_amplitude);
    }
    if (f.v2_amplitude != 0.0)
        spec.v2.assign(static_cast<std::size_t>(grid.n_cells), f.v2_amplitude);

    DensityField rho_T = DensityField::uniform(grid);
    auto rho_H = DensityField::from_function(
        grid, [&](double x) { return std::exp(f.herder_kappa * std::cos(freq * (x - f.herder_mu))); });
    rho_H.scale_to_mass(1.0);
    const double mass_T0 = rho_T.mass, mass_H0 = rho_H.mass;

    RunRecord rec;
    rec.columns = {"t", "mass_target", "mass_herder", "circular_variance_target", "clamp_deficit"};
    FvDiagnostics diag;
    const auto steps = static_cast<long long>(std::llround(cfg.horizon / cfg.dt));
    for (long long s = 0; s <= steps; ++s) {
        const double t = s * cfg.dt;
        if (s % cfg.output.metrics_stride == 0 || s == steps) {
            rec.append({t, mass_of(rho_T), mass_of(rho_H), circular_variance(rho_T),
                        diag.clamped_mass});
            if (dump) dump->snapshots.push_back({t, {rho_T.values, rho_H.values}});
        }
        if (s == steps) break;
        auto [next_T, next_H] = step_nonreciprocal(rho_T, rho_H, spec, cfg.dt, &diag);
        rho_T = std::move(next_T);
        rho_H = std::move(next_H);
        detail::check_finite_field(rho_T, t, "target field");
        detail::check_finite_field(rho_H, t, "herder field");
    }
    rec.summary["mass_drift_target"] = std::abs(mass_of(rho_T) - mass_T0);
    rec.summary["mass_drift_herder"] = std::abs(mass_of(rho_H) - mass_H0);
    rec.summary["circular_variance_target"] = circular_variance(rho_T);
    rec.summary["clamped_mass"] = diag.clamped_mass;
    rec.summary["success"] = std::abs(mass_of(rho_T) - mass_T0) <= 1e-10 * mass_T0 &&
                             std::abs(mass_of(rho_H) - mass_H0) <= 1e-10 * mass_H0;
    if (dump) dump->names = {"rho_T", "rho_H"};
    return rec;
}

}  // namespace drivers

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

inline RunRecord run_scenario_in_memory(const ScenarioConfig& cfg,
                                        drivers::FieldDump* dump = nullptr,
                                        ShepherdTrajectory* trajectory = nullptr) {
    const auto violations = cfg.validate();
    if (!violations.empty()) {
        std::string msg = "invalid config:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw std::invalid_argument(msg);
    }
    switch (cfg.scenario) {
        case ScenarioKind::direct:
        case ScenarioKind::direct_finite_sensing:
            return cfg.micro.n_agents > 0 ? drivers::run_direct_micro(cfg)
                                          : drivers::run_direct_macro(cfg, dump);
        case ScenarioKind::direct_distributed: {
            ScenarioConfig c = cfg;
            if (c.micro.n_agents == 0) c.micro.n_agents = 50;
            return drivers::run_direct_micro(c);
        }
        case ScenarioKind::direct_ot:
            return drivers::run_direct_ot(cfg, dump);
        case ScenarioKind::leader_follower_ff:
        case ScenarioKind::leader_follower_rg:
            return drivers::run_leader_follower(cfg, dump);
        case ScenarioKind::shepherd:
            return drivers::run_shepherd(cfg, trajectory);
        case ScenarioKind::shepherd_scaling:
            return drivers::run_shepherd_scaling(cfg);
        case ScenarioKind::fields:
            return drivers::run_fields(cfg, dump);
    }
    throw std::invalid_argument("unhandled scenario");
}

namespace detail {

inline std::string trajectory_csv(const ShepherdTrajectory& traj) {
    std::string out = "t,agent_id,kind,x,y\n";
    for (std::size_t s = 0; s < traj.target_snapshots.size(); ++s) {
        const double t = (static_cast<double>(s) + 1.0) * traj.dt;
        const auto& targets = traj.target_snapshots[s];
        for (std::size_t a = 0; a < targets.size(); ++a) {
            out += format_double(t) + "," + std::to_string(a) + ",target," +
                   format_double(targets[a].x) + "," + format_double(targets[a].y) + "\n";
        }
        if (s < traj.herder_snapshots.size()) {
            const auto& herders = traj.herder_snapshots[s];
            for (std::size_t i = 0; i < herders.size(); ++i)
                out += format_double(t) + "," + std::to_string(i) + ",herder," +
                       format_double(herders[i].x) + "," + format_double(herders[i].y) + "\n";
        }
    }
    return out;
}

inline std::string fields_csv(const RingGrid& grid, const drivers::FieldDump& dump) {
    std::string out = "t,x";
    for (const auto& name : dump.names) out += "," + name;
    out += "\n";
    for (const auto& [t, fields] : dump.snapshots) {
        for (int k = 0; k < grid.n_cells; ++k) {
            out += format_double(t) + "," + format_double(grid.center(k));
            for (const auto& field : fields)
                out += "," + format_double(field[static_cast<std::size_t>(k)]);
            out += "\n";
        }
    }
    return out;
}

}  // namespace detail

// Runs a scenario and, when an output directory is configured, writes
// config.resolved, metrics.csv, summary.json and the optional dumps
// atomically into one directory per run.
namespace detail {

// FNV-1a over the canonical resolved-config dump; recorded with every run
inline std::string config_hash(const json& resolved) {
    const std::string dump = resolved.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace detail

inline RunRecord run_scenario(const ScenarioConfig& cfg) {
    drivers::FieldDump dump;
    ShepherdTrajectory trajectory;
    const bool want_fields = cfg.output.write_fields && !cfg.output.directory.empty();
    const bool want_traj = cfg.output.write_trajectory && !cfg.output.directory.empty() &&
                           cfg.scenario == ScenarioKind::shepherd;
    const std::string run_name = cfg.output.run_name.empty()
                                     ? to_string(cfg.scenario) + "-seed" + std::to_string(cfg.seed)
                                     : cfg.output.run_name;
    const std::filesystem::path dir = std::filesystem::path(cfg.output.directory) / run_name;

    RunRecord rec;
    try {
        rec = run_scenario_in_memory(cfg, want_fields ? &dump : nullptr,
                                     want_traj ? &trajectory : nullptr);
    } catch (const DivergenceError& err) {
        if (!cfg.output.directory.empty()) {
            std::filesystem::create_directories(dir);
            json diagnostic = err.snapshot;
            diagnostic["error"] = err.what();
            diagnostic["scenario"] = to_string(cfg.scenario);
            diagnostic["seed"] = cfg.seed;
            detail::atomic_write(dir / "diagnostic.json", diagnostic.dump(2) + "\n");
        }
        throw;
    }
    rec.summary["config_hash"] = detail::config_hash(cfg.resolved);
    rec.summary["code_version"] = kVersion;
    if (cfg.output.directory.empty()) return rec;

    std::filesystem::create_directories(dir);
    detail::atomic_write(dir / "config.resolved", cfg.resolved.dump(2) + "\n");
    detail::atomic_write(dir / "metrics.csv", detail::to_csv(rec));
    json summary = rec.summary;
    summary["scenario"] = to_string(cfg.scenario);
    summary["seed"] = cfg.seed;
    detail::atomic_write(dir / "summary.json", summary.dump(2) + "\n");
    if (want_fields && !dump.snapshots.empty())
        detail::atomic_write(dir / "fields.csv", detail::fields_csv(cfg.grid, dump));
    if (want_traj) detail::atomic_write(dir / "trajectory.csv", detail::trajectory_csv(trajectory));
    return rec;
}

// ---------------------------------------------------------------------------
// Parameter sweeps: cartesian product of one dotted parameter path and a
// seed range; one run directory per run plus an aggregate CSV with fitted
// summaries where they apply.
// ---------------------------------------------------------------------------

struct SweepResult {
    std::vector<json> runs;  // one entry per run: parameter value, seed, summary
    json aggregate;
};

namespace detail {

inline void set_json_path(json& doc, const std::string& dotted, const json& value) {
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
        require(!key.empty(), "empty key in parameter path: " + dotted);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

}  // namespace detail

inline SweepResult run_sweep(const ScenarioConfig& base, const std::string& param_path,
                             const std::vector<json>& values, int seeds) {
    detail::require(!values.empty(), "run_sweep: empty sweep");
    detail::require(seeds >= 1, "run_sweep: need at least one seed");
    SweepResult result;
    std::vector<double> numeric_values, mean_errors;
    for (const auto& value : values) {
        double err_acc = 0.0;
        int err_count = 0;
        for (int s = 0; s < seeds; ++s) {
            json doc = base.resolved;
            detail::set_json_path(doc, param_path, value);
            doc["seed"] = base.seed + static_cast<std::uint64_t>(s);
            ScenarioConfig cfg = parse_config(doc);
            if (!cfg.output.directory.empty()) {
                std::string vname = value.dump();
                for (char& c : vname)
                    if (c == '.' || c == '"') c = '_';
                cfg.output.run_name = to_string(cfg.scenario) + "-" + param_path + "=" + vname +
                                      "-seed" + std::to_string(cfg.seed);
                cfg.resolved["output"]["run_name"] = cfg.output.run_name;
            }
            const RunRecord rec = run_scenario(cfg);
            json row;
            row["param"] = param_path;
            row["value"] = value;
            row["seed"] = cfg.seed;
            row["summary"] = rec.summary;
            result.runs.push_back(row);
            if (rec.summary.contains("steady_state_l2_error")) {
                err_acc += rec.summary["steady_state_l2_error"].get<double>();
                ++err_count;
            }
        }
        if (value.is_number() && err_count > 0) {
            numeric_values.push_back(value.get<double>());
            mean_errors.push_back(err_acc / err_count);
        }
    }
    result.aggregate["param"] = param_path;
    result.aggregate["n_runs"] = result.runs.size();
    if (numeric_values.size() == values.size() && numeric_values.size() >= 2) {
        bool positive = true;
        for (double v : numeric_values) positive = positive && v > 0.0;
        for (double e : mean_errors) positive = positive && e > 0.0;
        if (positive) {
            const auto fit = fit_power_law(numeric_values, mean_errors);
            result.aggregate["loglog_slope"] = fit.alpha;
            result.aggregate["loglog_r_squared"] = fit.r_squared;
        }
        json means = json::array();
        for (std::size_t i = 0; i < numeric_values.size(); ++i)
            means.push_back({{"value", numeric_values[i]}, {"mean_l2_error", mean_errors[i]}});
        result.aggregate["mean_errors"] = means;
    }
    return result;
}

inline std::string sweep_csv(const SweepResult& sweep) {
    std::string out = "param,value,seed,steady_state_l2_error,success\n";
    for (const auto& row : sweep.runs) {
        out += row["param"].get<std::string>() + ",";
        out += row["value"].dump() + ",";
        out += std::to_string(row["seed"].get<std::uint64_t>()) + ",";
        const auto& summary = row["summary"];
        out += summary.contains("steady_state_l2_error")
                   ? detail::format_double(summary["steady_state_l2_error"].get<double>())
                   : "";
        out += ",";
        out += summary.contains("success") ? (summary["success"].get<bool>() ? "1" : "0") : "";
        out += "\n";
    }
    return out;
}

}  // namespace swarmfield
