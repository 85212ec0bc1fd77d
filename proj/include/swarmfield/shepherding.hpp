#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "swarmfield/ring.hpp"  // detail::require
#include "swarmfield/rng.hpp"

namespace swarmfield {

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double c) const { return {x * c, y * c}; }
    double norm() const { return std::hypot(x, y); }
};

struct ShepherdParams {
    double gamma = 5.0;              // selection specificity (0 = centre of mass)
    double delta = 1.0;              // goal-directed offset behind the target
    double xi = 10.0;                // herder sensing radius (arena_radius / 2)
    double lambda = 2.0;             // target repulsion radius
    double repulsion_strength = 0.5; // target speed scale when pushed
    double repulsion_softening = 0.1;// keeps the 1/d^2 push bounded at contact
    double target_noise = 0.01;      // Brownian noise on targets
    double herder_speed_cap = 2.0;
    double idle_speed = 1.5;         // patrol speed when no candidate target is in range
    double goal_radius = 2.0;        // goal region around the origin
    double containment_factor = 0.7; // herders ignore targets inside this fraction of the goal
    double arena_radius = 20.0;      // reflecting boundary

    void validate() const {
        detail::require(gamma >= 0.0 && delta >= 0.0, "ShepherdParams: gamma, delta must be >= 0");
        detail::require(xi > 0.0 && lambda > 0.0, "ShepherdParams: xi, lambda must be > 0");
        detail::require(repulsion_strength > 0.0, "ShepherdParams: repulsion_strength must be > 0");
        detail::require(repulsion_softening > 0.0, "ShepherdParams: repulsion_softening must be > 0");
        detail::require(target_noise >= 0.0, "ShepherdParams: target_noise must be >= 0");
        detail::require(herder_speed_cap > 0.0, "ShepherdParams: herder_speed_cap must be > 0");
        detail::require(goal_radius > 0.0 && arena_radius > goal_radius,
                        "ShepherdParams: need 0 < goal_radius < arena_radius");
        detail::require(containment_factor >= 0.0 && containment_factor <= 1.0,
                        "ShepherdParams: containment_factor must lie in [0, 1]");
    }
};

// Herders and targets in the plane; the goal is the origin by convention.
// herder_claims carries the per-herder committed target index (-1 when
// unassigned); the stepper maintains it.
struct ShepherdState {
    std::vector<Vec2> herders;
    std::vector<Vec2> targets;
    std::vector<int> herder_claims;
};

// Soft-max target selection over the neighbourhood within xi:
//   T* = sum_a w_a T_a / sum_a w_a,  w_a = exp(gamma * (|T_a| - |H_i|)),
// computed with max-weight subtraction. |.| is distance from the goal, so
// large gamma picks the target farthest from the goal; gamma = 0 averages.
// Empty neighbourhood -> nullopt. Targets closer to the goal than
// exclude_within are not candidates (used for containment).
inline std::optional<Vec2> select_target(int i, const ShepherdState& state,
                                         const ShepherdParams& params,
                                         double exclude_within = -1.0) {
    const Vec2 h = state.herders[static_cast<std::size_t>(i)];
    double best_arg = -std::numeric_limits<double>::infinity();
    const double h_norm = h.norm();
    const auto candidate = [&](const Vec2& t) {
        return (t - h).norm() <= params.xi && t.norm() > exclude_within;
    };
    for (const Vec2& t : state.targets) {
        if (candidate(t)) best_arg = std::max(best_arg, params.gamma * (t.norm() - h_norm));
    }
    if (best_arg == -std::numeric_limits<double>::infinity()) return std::nullopt;
    Vec2 acc{0.0, 0.0};
    double wsum = 0.0;
    for (const Vec2& t : state.targets) {
        if (!candidate(t)) continue;
        const double w = std::exp(params.gamma * (t.norm() - h_norm) - best_arg);
        acc = acc + t * w;
        wsum += w;
    }
    return acc * (1.0 / wsum);
}

// Herder feedback law: move to the point delta behind the selected target
// (relative to the goal), speed capped:
//   u_i = -(H_i - T* - delta * That),  That = T*/|T*| (zero near the origin).
inline Vec2 herder_input(int i, const Vec2& selected, const ShepherdState& state,
                         const ShepherdParams& params) {
    const Vec2 h = state.herders[static_cast<std::size_t>(i)];
    const double tn = selected.norm();
    const Vec2 that = tn < 1e-9 ? Vec2{0.0, 0.0} : selected * (1.0 / tn);
    Vec2 u = (selected + that * params.delta - h);
    const double n = u.norm();
    if (n > params.herder_speed_cap) u = u * (params.herder_speed_cap / n);
    return u;
}

namespace detail {
inline Vec2 reflect_into_arena(Vec2 p, double arena_radius) {
    const double r = p.norm();
    if (r <= arena_radius || r == 0.0) return p;
    const double rr = std::max(2.0 * arena_radius - r, 0.0);
    return p * (rr / r);
}

// Unit direction from h toward dest that keeps a clearance disk around an
// obstacle point: straight when the disk is not in the way, otherwise the
// tangent around the disk on the destination side (plus an outward push when
// already inside the clearance). Keeps herders from bulldozing targets they
// are trying to get behind.
inline Vec2 detour_direction(const Vec2& h, const Vec2& dest, const Vec2& obstacle,
                             double clearance) {
    const Vec2 to_dest = dest - h;
    const double dist_dest = to_dest.norm();
    if (dist_dest < 1e-12) return {0.0, 0.0};
    const Vec2 dir = to_dest * (1.0 / dist_dest);
    const Vec2 r = h - obstacle;
    const double d = r.norm();
    const double along = -(r.x * dir.x + r.y * dir.y);
    // only a disk strictly between h and dest forces a detour; a destination
    // inside the clearance (the pushing position) stays reachable
    const bool disk_between = along > 0.0 && along < dist_dest;
    const double perp2 = d * d - along * along;
    if (!disk_between || perp2 > clearance * clearance) return dir;
    const Vec2 rhat = d > 1e-12 ? r * (1.0 / d) : Vec2{1.0, 0.0};
    const double cross = r.x * dir.y - r.y * dir.x;
    const double sgn = cross >= 0.0 ? 1.0 : -1.0;
    Vec2 v{-sgn * rhat.y, sgn * rhat.x};
    if (d < clearance) v = v + rhat * ((clearance - d) / clearance);
    const double n = v.norm();
    return n > 1e-12 ? v * (1.0 / n) : Vec2{-sgn * rhat.y, sgn * rhat.x};
}
}  // namespace detail

// Synchronous Euler-Maruyama update of all agents. Targets feel a summed
// (softened) radial repulsion from herders within lambda plus Brownian
// noise. Each herder commits to one target: the soft-max rule ranks the
// candidates that are not yet contained and not claimed by another herder,
// and the claim is held until that target reaches the containment zone.
// Travel to the pushing point goes around the flock (orbit outside the
// target radius) so the herder wake pushes bystanders inward, never out.
// Unassigned herders patrol outside the containment zone. Deterministic
// given the rng state.
inline void step_shepherding(ShepherdState& state, const ShepherdParams& params, double dt,
                             Rng& rng) {
    detail::require(dt > 0.0, "step_shepherding: dt must be > 0");
    params.validate();
    const std::size_t n_h = state.herders.size();
    const std::size_t n_t = state.targets.size();
    const double contained = params.containment_factor * params.goal_radius;
    if (state.herder_claims.size() != n_h) state.herder_claims.assign(n_h, -1);

    // release stale claims, then let free herders claim the best candidate
    std::vector<int> claimed_by(n_t, -1);
    for (std::size_t i = 0; i < n_h; ++i) {
        int& claim = state.herder_claims[i];
        if (claim >= 0) {
            const Vec2& t = state.targets[static_cast<std::size_t>(claim)];
            const bool done = t.norm() <= contained;
            const bool lost = (t - state.herders[i]).norm() > 1.5 * params.xi;
            if (done || lost) claim = -1;
        }
        if (claim >= 0) claimed_by[static_cast<std::size_t>(claim)] = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < n_h; ++i) {
        int& claim = state.herder_claims[i];
        if (claim >= 0) continue;
        // soft-max over unclaimed candidates; fall back to all candidates so
        // surplus herders still help
        ShepherdState view;
        view.herders = {state.herders[i]};
        for (std::size_t a = 0; a < n_t; ++a)
            if (claimed_by[a] < 0) view.targets.push_back(state.targets[a]);
        std::optional<Vec2> sel = view.targets.empty()
                                      ? std::nullopt
                                      : select_target(0, view, params, contained);
        if (!sel.has_value()) {
            view.targets = state.targets;
            sel = select_target(0, view, params, contained);
        }
        if (!sel.has_value()) continue;
        // commit to the nearest actual target to the soft-max point
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < n_t; ++a) {
            if (state.targets[a].norm() <= contained) continue;
            const double d = (state.targets[a] - *sel).norm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(a);
            }
        }
        if (best >= 0) {
            claim = best;
            if (claimed_by[static_cast<std::size_t>(best)] < 0)
                claimed_by[static_cast<std::size_t>(best)] = static_cast<int>(i);
        }
    }

    std::vector<Vec2> herder_vel(n_h);
    const double patrol_radius = params.goal_radius + params.lambda;
    for (std::size_t i = 0; i < n_h; ++i) {
        const int claim = state.herder_claims[i];
        if (claim >= 0) {
            const Vec2 h = state.herders[i];
            const Vec2 target = state.targets[static_cast<std::size_t>(claim)];
            const double tn = target.norm();
            const Vec2 that = tn < 1e-9 ? Vec2{0.0, 0.0} : target * (1.0 / tn);
            const Vec2 chase = target + that * params.delta;
            const double r_chase = chase.norm();
            const double r_h = h.norm();
            const double cos_gap = r_h > 1e-9 && r_chase > 1e-9
                                       ? (h.x * chase.x + h.y * chase.y) / (r_h * r_chase)
                                       : 1.0;
            if (cos_gap < 0.7) {
                // long way round: orbit beyond the wake band toward the bearing
                const Vec2 rhat = h * (1.0 / std::max(r_h, 1e-9));
                const double sgn = (h.x * chase.y - h.y * chase.x) >= 0.0 ? 1.0 : -1.0;
                const Vec2 tangent{-sgn * rhat.y, sgn * rhat.x};
                const double r_want = r_chase + 1.5 * params.lambda;
                Vec2 dir = tangent + rhat * std::clamp(r_want - r_h, -1.0, 1.0);
                const double dn = dir.norm();
                if (dn > 1e-12) dir = dir * (1.0 / dn);
                herder_vel[i] = dir * params.herder_speed_cap;
            } else {
                // final approach: straight to the pushing point, swerving
                // around the claimed target rather than through it
                const Vec2 via_target =
                    detail::detour_direction(h, chase, target, 1.05 * params.lambda);
                const Vec2 straight = chase - h;
                const double dist = straight.norm();
                const bool swerve = dist > 1e-12 &&
                    (via_target.x * straight.x + via_target.y * straight.y) / dist < 0.999;
                herder_vel[i] = swerve ? via_target * params.herder_speed_cap
                                       : herder_input(static_cast<int>(i), target, state, params);
            }
        } else {
            // patrol: orbit the goal just outside the containment zone, which
            // sweeps the sensing disk over the arena without disturbing
            // already-contained targets
            const Vec2 h = state.herders[i];
            const double hn = h.norm();
            const Vec2 radial = hn > 1e-9 ? h * (1.0 / hn) : Vec2{1.0, 0.0};
            const Vec2 tangent{-radial.y, radial.x};
            Vec2 dir = tangent + radial * std::clamp(patrol_radius - hn, -1.0, 1.0);
            const double dn = dir.norm();
            if (dn > 1e-12) dir = dir * (1.0 / dn);
            herder_vel[i] = dir * params.idle_speed +
                            Vec2{0.3 * params.idle_speed * rng.normal(),
                                 0.3 * params.idle_speed * rng.normal()};
        }
    }

    std::vector<Vec2> target_vel(n_t);
    const double soft2 = params.repulsion_softening * params.repulsion_softening;
    for (std::size_t a = 0; a < n_t; ++a) {
        Vec2 v{0.0, 0.0};
        for (std::size_t i = 0; i < n_h; ++i) {
            const Vec2 d = state.targets[a] - state.herders[i];
            const double dist = d.norm();
            if (dist <= params.lambda && dist > 1e-12)
                v = v + d * (params.repulsion_strength / (dist * dist + soft2));
        }
        target_vel[a] = v;
    }

    const double noise_scale =
        params.target_noise > 0.0 ? std::sqrt(2.0 * params.target_noise * params.target_noise * dt)
                                  : 0.0;
    for (std::size_t i = 0; i < n_h; ++i)
        state.herders[i] =
            detail::reflect_into_arena(state.herders[i] + herder_vel[i] * dt, params.arena_radius);
    for (std::size_t a = 0; a < n_t; ++a) {
        Vec2 p = state.targets[a] + target_vel[a] * dt;
        if (noise_scale > 0.0) {
            p.x += noise_scale * rng.normal();
            p.y += noise_scale * rng.normal();
        }
        state.targets[a] = detail::reflect_into_arena(p, params.arena_radius);
    }
}

// Recorded target positions, one snapshot per step.
struct ShepherdTrajectory {
    double dt = 0.0;
    std::vector<std::vector<Vec2>> target_snapshots;
    std::vector<std::vector<Vec2>> herder_snapshots;  // optional, for dumps
};

// True iff at least `fraction` of the targets stay inside goal_radius
// continuously for hold_time somewhere along the trajectory.
// fraction <= 0 is vacuously true.
inline bool herding_success(const ShepherdTrajectory& traj, double goal_radius, double fraction,
                            double hold_time) {
    if (fraction <= 0.0) return true;
    if (traj.target_snapshots.empty()) return false;
    double held = 0.0;
    for (const auto& snap : traj.target_snapshots) {
        int inside = 0;
        for (const Vec2& t : snap)
            if (t.norm() <= goal_radius) ++inside;
        const bool ok = inside >= fraction * static_cast<double>(snap.size());
        held = ok ? held + traj.dt : 0.0;
        if (ok && held >= hold_time) return true;
    }
    return false;
}

struct ShepherdTrialSpec {
    double dt = 0.05;
    double horizon = 300.0;
    double success_fraction = 0.9;
    double hold_time = 5.0;
    double spawn_radius = 10.0;  // targets sampled in [goal_radius, spawn_radius]
    bool record_herders = false;
};

struct ShepherdTrialResult {
    bool success = false;
    double time_to_success = -1.0;
    double final_fraction_in_goal = 0.0;
    ShepherdTrajectory trajectory;
};

// Seed-deterministic trial: spawn, run, apply the success metric.
inline ShepherdTrialResult run_shepherd_trial(int n_targets, int n_herders,
                                              const ShepherdParams& params,
                                              const ShepherdTrialSpec& spec, std::uint64_t seed,
                                              bool keep_trajectory = false) {
    detail::require(n_targets >= 1 && n_herders >= 1, "run_shepherd_trial: need agents");
    params.validate();
    Rng rng(derive_seed(seed, 0x51e9));
    ShepherdState state;
    state.targets.reserve(static_cast<std::size_t>(n_targets));
    for (int a = 0; a < n_targets; ++a) {
        const double r = std::sqrt(rng.uniform()) * (spec.spawn_radius - params.goal_radius) +
                         params.goal_radius;
        const double th = rng.uniform() * kTwoPi;
        state.targets.push_back({r * std::cos(th), r * std::sin(th)});
    }
    state.herders.reserve(static_cast<std::size_t>(n_herders));
    for (int i = 0; i < n_herders; ++i) {
        const double r = spec.spawn_radius + 2.0;
        const double th = rng.uniform() * kTwoPi;
        state.herders.push_back({r * std::cos(th), r * std::sin(th)});
    }

    const auto steps = static_cast<long long>(std::ceil(spec.horizon / spec.dt));
    ShepherdTrajectory traj;
    traj.dt = spec.dt;
    double held = 0.0;
    ShepherdTrialResult result;
    for (long long s = 0; s < steps; ++s) {
        step_shepherding(state, params, spec.dt, rng);
        int inside = 0;
        for (const Vec2& t : state.targets)
            if (t.norm() <= params.goal_radius) ++inside;
        const double frac = static_cast<double>(inside) / n_targets;
        const bool ok = frac >= spec.success_fraction;
        held = ok ? held + spec.dt : 0.0;
        if (ok && held >= spec.hold_time && !result.success) {
            result.success = true;
            result.time_to_success = (s + 1) * spec.dt;
            if (!keep_trajectory) break;
        }
        if (keep_trajectory) {
            traj.target_snapshots.push_back(state.targets);
            if (spec.record_herders) traj.herder_snapshots.push_back(state.herders);
        }
        result.final_fraction_in_goal = frac;
    }
    result.trajectory = std::move(traj);
    return result;
}

struct MinHerdersBudget {
    int seeds = 10;
    int m_max = 64;
    double success_probability = 0.8;
    ShepherdTrialSpec trial;
    int jobs = 1;
};

struct MinHerdersResult {
    bool herdable = false;
    int m_star = -1;
    std::vector<std::pair<int, double>> probe_curve;  // (M, success rate) in probe order
};

namespace detail {

inline double shepherd_success_rate(int n_targets, int m, const ShepherdParams& params,
                                    const MinHerdersBudget& budget, std::uint64_t base_seed) {
    const int seeds = budget.seeds;
    std::vector<int> outcome(static_cast<std::size_t>(seeds), 0);
    const int jobs = std::max(1, budget.jobs);
    std::vector<std::future<void>> futures;
    std::atomic<int> next{0};
    for (int w = 0; w < jobs; ++w) {
        futures.push_back(std::async(std::launch::async, [&]() {
            for (int s = next.fetch_add(1); s < seeds; s = next.fetch_add(1)) {
                const auto seed = derive_seed(base_seed, static_cast<std::uint64_t>(m),
                                              static_cast<std::uint64_t>(s));
                const auto res = run_shepherd_trial(n_targets, m, params, budget.trial, seed);
                outcome[static_cast<std::size_t>(s)] = res.success ? 1 : 0;
            }
        }));
    }
    for (auto& f : futures) f.get();
    int wins = 0;
    for (int v : outcome) wins += v;
    return static_cast<double>(wins) / seeds;
}

}  // namespace detail

// Smallest herder count whose success rate over the seed budget reaches the
// required probability, by doubling then bisection. Success probability is
// only statistically monotone in M, so the bracket is treated as empirical.
inline MinHerdersResult min_herders(int n_targets, const ShepherdParams& params,
                                    const MinHerdersBudget& budget, std::uint64_t base_seed = 0) {
    detail::require(budget.seeds >= 1, "min_herders: need at least one seed per M");
    MinHerdersResult result;
    const auto probe = [&](int m) {
        const double rate = detail::shepherd_success_rate(n_targets, m, params, budget, base_seed);
        result.probe_curve.push_back({m, rate});
        return rate;
    };

    int lo = 0;           // known failing (0 herders cannot herd)
    int hi = -1;          // first known passing
    for (int m = 1; m <= budget.m_max; m *= 2) {
        if (probe(m) >= budget.success_probability) {
            hi = m;
            break;
        }
        lo = m;
    }
    if (hi < 0) return result;  // not herdable within m_max
    while (hi - lo > 1) {
        const int mid = lo + (hi - lo) / 2;
        if (probe(mid) >= budget.success_probability)
            hi = mid;
        else
            lo = mid;
    }
    result.herdable = true;
    result.m_star = hi;
    return result;
}

// least-squares fit of log y = alpha log x + c
struct PowerLawFit {
    double alpha = 0.0;
    double log_c = 0.0;
    double r_squared = 0.0;
    double alpha_stderr = 0.0;
};

inline PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
    detail::require(x.size() == y.size() && x.size() >= 2, "fit_power_law: need >= 2 points");
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        detail::require(x[i] > 0.0 && y[i] > 0.0, "fit_power_law: data must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    PowerLawFit fit;
    fit.alpha = (n * sxy - sx * sy) / denom;
    fit.log_c = (sy - fit.alpha * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_ly = sy / n;
    for (std::size_t i = 0; i < n; ++i) {
        const double ly = std::log(y[i]);
        const double pred = fit.alpha * std::log(x[i]) + fit.log_c;
        ss_res += (ly - pred) * (ly - pred);
        ss_tot += (ly - mean_ly) * (ly - mean_ly);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    if (n > 2) fit.alpha_stderr = std::sqrt(ss_res / (n - 2) / (sxx - sx * sx / n));
    return fit;
}

}  // namespace swarmfield
