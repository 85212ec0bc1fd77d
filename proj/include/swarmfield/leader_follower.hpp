#pragma once

#include <cmath>
#include <complex>
#include <deque>
#include <span>
#include <vector>

#include "swarmfield/control.hpp"
#include "swarmfield/fourier.hpp"
#include "swarmfield/kernel.hpp"
#include "swarmfield/ring.hpp"

namespace swarmfield {

// Leader density profile required for a desired follower steady state. May dip
// below zero for small leader mass; feasibility is judged by min_leader_mass.
struct LeaderReference {
    RingGrid grid;
    std::vector<double> values;
    double min_value = 0.0;

    // valid density field once the profile is nonnegative
    DensityField as_density() const {
        detail::require(min_value >= 0.0, "LeaderReference: profile is negative (infeasible mass)");
        return DensityField(grid, values);
    }
};

namespace detail {

// zero-mean leader profile solving f * rho_L = D (ln rho_F)_x by Fourier
// deconvolution through the kernel symbol
inline std::vector<double> deconvolved_leader_shape(const DensityField& rho_F_bar,
                                                    const InteractionKernel& kernel, double D) {
    require(D > 0.0, "leader_reference: diffusion must be > 0");
    const RingGrid& grid = rho_F_bar.grid;
    const int n = grid.n_cells;
    for (double v : rho_F_bar.values)
        require(v > 0.0, "leader_reference: follower target must be strictly positive");

    std::vector<double> log_rho(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        log_rho[static_cast<std::size_t>(k)] = std::log(rho_F_bar.values[static_cast<std::size_t>(k)]);
    std::vector<double> v_bar = derivative_x(grid, log_rho);
    for (double& v : v_bar) v *= D;

    const std::vector<std::complex<double>> symbol = kernel_symbol(grid, kernel);
    std::vector<std::complex<double>> v_hat = dft(v_bar);
    std::vector<std::complex<double>> rho_hat(static_cast<std::size_t>(n), 0.0);
    for (int m = 1; m < n; ++m) {
        const auto mm = static_cast<std::size_t>(m);
        const double sym_mag = std::abs(symbol[mm]);
        const double mode_energy = std::abs(v_hat[mm]) / n;  // Fourier coefficient magnitude
        if (sym_mag < 1e-10) {
            require(mode_energy <= 1e-8,
                    "leader_reference: kernel symbol vanishes on an excited mode (infeasible deconvolution)");
            continue;
        }
        rho_hat[mm] = v_hat[mm] / symbol[mm];
    }
    return idft_real(rho_hat);  // mode 0 left at zero => zero-mean shape
}

}  // namespace detail

// Steady-state leader reference for the follower equation: the zero-flux
// condition rho_F (f * rho_L) = D rho_F_x pins the leader field up to its
// uniform part, which carries the requested mass.
inline LeaderReference leader_reference(const DensityField& rho_F_bar,
                                        const InteractionKernel& kernel, double D,
                                        double leader_mass) {
    detail::require(leader_mass >= 0.0, "leader_reference: leader mass must be >= 0");
    std::vector<double> shape = detail::deconvolved_leader_shape(rho_F_bar, kernel, D);
    const double uniform_part = leader_mass / rho_F_bar.grid.length;
    double min_v = std::numeric_limits<double>::infinity();
    for (double& v : shape) {
        v += uniform_part;
        min_v = std::min(min_v, v);
    }
    return LeaderReference{rho_F_bar.grid, std::move(shape), min_v};
}

// Smallest leader mass whose uniform part keeps the reference nonnegative.
inline double min_leader_mass(const DensityField& rho_F_bar, const InteractionKernel& kernel,
                              double D) {
    const std::vector<double> shape = detail::deconvolved_leader_shape(rho_F_bar, kernel, D);
    double min_v = 0.0;
    for (double v : shape) min_v = std::min(min_v, v);
    return std::max(0.0, -rho_F_bar.grid.length * min_v);
}

// Leaders are directly actuated and interaction-free (their transport is pure
// advection), so the continuification law applied to (rho_L, target) gives
// their velocity field.
inline VelocityField feedforward_leader_velocity(const DensityField& rho_L,
                                                 const DensityField& rho_L_target,
                                                 const InteractionKernel& kernel,
                                                 const DirectControlConfig& cfg) {
    const std::vector<double> q = control_source(rho_L, rho_L_target, kernel, cfg);
    const double floor = cfg.rho_floor_factor * rho_L.mass / rho_L.grid.length;
    VelocityField u = recover_velocity(rho_L, q, floor);
    for (double& v : u.values) v = std::clamp(v, -cfg.u_max, cfg.u_max);
    return u;
}

// Reference-governor state: leader target rho_L_bar + alpha * W with a
// zero-mass correction shape W, alpha driven by the follower tracking error
// through a clamped integrator with a deadband.
struct Governor {
    double alpha = 0.0;
    double k_alpha = 0.5;
    double deadband = 1e-3;
    std::vector<double> correction;        // W, zero discrete mass
    std::deque<double> error_history;      // recent follower errors, bounded
    std::size_t history_capacity = 64;

    void validate(const RingGrid& grid) const {
        detail::require(k_alpha > 0.0, "Governor: k_alpha must be > 0");
        detail::require(correction.size() == static_cast<std::size_t>(grid.n_cells),
                        "Governor: correction size mismatch");
        const double w_mass = integrate(grid, correction);
        detail::require(std::abs(w_mass) <= 1e-10, "Governor: correction shape must have zero mass");
    }
};

// Default correction shape: the leading Fourier mode of the deconvolved
// leader shape, scaled by -w_scale so alpha in [0,1] spans a reduction of
// the leader modulation, then rescaled if needed to keep rho_L_bar + W >= 0.
inline Governor make_governor(const LeaderReference& rho_L_bar, double k_alpha, double w_scale,
                              double deadband = 1e-3) {
    detail::require(rho_L_bar.min_value >= 0.0, "make_governor: leader reference must be feasible");
    const RingGrid& grid = rho_L_bar.grid;
    const int n = grid.n_cells;
    std::vector<double> zero_mean = rho_L_bar.values;
    const double mean = integrate(grid, zero_mean) / grid.length;
    for (double& v : zero_mean) v -= mean;

    std::vector<std::complex<double>> hat = dft(zero_mean);
    int lead = 1;
    for (int m = 1; m <= n / 2; ++m)
        if (std::abs(hat[static_cast<std::size_t>(m)]) > std::abs(hat[static_cast<std::size_t>(lead)]))
            lead = m;
    std::vector<std::complex<double>> keep(static_cast<std::size_t>(n), 0.0);
    keep[static_cast<std::size_t>(lead)] = hat[static_cast<std::size_t>(lead)];
    if (lead != 0 && n - lead < n)
        keep[static_cast<std::size_t>(n - lead)] = hat[static_cast<std::size_t>(n - lead)];
    std::vector<double> w = idft_real(keep);
    for (double& v : w) v *= -w_scale;

    // keep the corrected reference nonnegative at full alpha
    double scale = 1.0;
    for (int k = 0; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        if (w[kk] < 0.0 && rho_L_bar.values[kk] + w[kk] < 0.0)
            scale = std::min(scale, rho_L_bar.values[kk] / -w[kk]);
    }
    for (double& v : w) v *= scale;

    Governor g;
    g.k_alpha = k_alpha;
    g.deadband = deadband;
    g.correction = std::move(w);
    g.validate(grid);
    return g;
}

// alpha <- clamp(alpha + dt * k_alpha * (error - deadband), 0, 1)
inline void governor_update(Governor& state, double follower_error, double dt) {
    detail::require(dt > 0.0, "governor_update: dt must be > 0");
    detail::require(follower_error >= 0.0, "governor_update: error must be >= 0");
    state.alpha = std::clamp(state.alpha + dt * state.k_alpha * (follower_error - state.deadband),
                             0.0, 1.0);
    state.error_history.push_back(follower_error);
    while (state.error_history.size() > state.history_capacity) state.error_history.pop_front();
}

// adapted leader target rho_L_bar + alpha * W; mass equals mass(rho_L_bar)
inline DensityField governed_reference(const Governor& state, const DensityField& rho_L_bar) {
    state.validate(rho_L_bar.grid);
    std::vector<double> v = rho_L_bar.values;
    for (int k = 0; k < rho_L_bar.grid.n_cells; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        v[kk] = std::max(0.0, v[kk] + state.alpha * state.correction[kk]);
    }
    return DensityField(rho_L_bar.grid, std::move(v));
}

// Analytic follower steady state under a frozen leader field:
//   rho_F_inf ~ exp( (1/D) int_0^x (f * rho_L) ds ), normalised to the mass.
inline DensityField follower_steady_profile(const DensityField& rho_L,
                                            const InteractionKernel& kernel, double D,
                                            double follower_mass = 1.0) {
    detail::require(D > 0.0, "follower_steady_profile: D must be > 0");
    const RingGrid& grid = rho_L.grid;
    const int n = grid.n_cells;
    const std::vector<double> v = convolve_periodic(grid, rho_L.values, kernel);
    std::vector<double> logp(static_cast<std::size_t>(n));
    double run = 0.0;
    for (int k = 0; k < n; ++k) {
        logp[static_cast<std::size_t>(k)] = (run + 0.5 * v[static_cast<std::size_t>(k)] * grid.dx()) / D;
        run += v[static_cast<std::size_t>(k)] * grid.dx();
    }
    double max_lp = logp[0];
    for (double lp : logp) max_lp = std::max(max_lp, lp);
    std::vector<double> p(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        p[static_cast<std::size_t>(k)] = std::exp(logp[static_cast<std::size_t>(k)] - max_lp);
    DensityField out(grid, std::move(p));
    out.scale_to_mass(follower_mass);
    return out;
}

}  // namespace swarmfield
