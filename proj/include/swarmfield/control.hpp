#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "swarmfield/kernel.hpp"
#include "swarmfield/ring.hpp"

namespace swarmfield {

struct DirectControlConfig {
    double k_p = 10.0;
    double sensing_radius = kInfiniteRadius;  // in (0, length/2] or infinity
    double rho_floor_factor = 1e-4;           // floor = factor * mass / length
    double u_max = 10.0;                      // agent input clamp, applied by drivers

    void validate(const RingGrid& grid) const {
        detail::require(k_p > 0.0, "DirectControlConfig: K_p must be > 0");
        detail::require(sensing_radius > 0.0 &&
                            (sensing_radius == kInfiniteRadius || sensing_radius <= 0.5 * grid.length),
                        "DirectControlConfig: sensing radius must lie in (0, length/2] or be infinite");
        detail::require(rho_floor_factor > 0.0, "DirectControlConfig: rho_floor_factor must be > 0");
        detail::require(u_max > 0.0, "DirectControlConfig: u_max must be > 0");
    }
};

// Density-level control source
//
//   q = K_p e - [e V^d]_x - [rho V^e]_x + [rho^d V^d]_x,
//   e = rho^d - rho,  V^d = f * rho^d,  V^e = f * e,
//
// with all convolutions truncated at the sensing radius. The last term
// cancels the target's own interaction flux; without it the closed loop
// parks at e = [rho^d V^d]_x / K_p instead of zero. Every non-proportional
// term is an exact derivative and e has zero mass, so q integrates to zero.
inline std::vector<double> control_source(const DensityField& rho, const DensityField& rho_d,
                                          const InteractionKernel& kernel,
                                          const DirectControlConfig& cfg) {
    detail::require(rho.grid == rho_d.grid, "control_source: grid mismatch");
    cfg.validate(rho.grid);
    detail::require(std::abs(rho.mass - rho_d.mass) <= 1e-9 * std::max(rho.mass, 1.0),
                    "control_source: rho and rho_d masses must match to 1e-9");
    const RingGrid& grid = rho.grid;
    const int n = grid.n_cells;

    std::vector<double> e(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        e[static_cast<std::size_t>(k)] =
            rho_d.values[static_cast<std::size_t>(k)] - rho.values[static_cast<std::size_t>(k)];

    const std::vector<double> v_d = convolve_periodic(grid, rho_d.values, kernel, cfg.sensing_radius);
    const std::vector<double> v_e = convolve_periodic(grid, e, kernel, cfg.sensing_radius);

    std::vector<double> flux_e(static_cast<std::size_t>(n)), flux_rho(static_cast<std::size_t>(n)),
        flux_ff(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        flux_e[kk] = e[kk] * v_d[kk];
        flux_rho[kk] = rho.values[kk] * v_e[kk];
        flux_ff[kk] = rho_d.values[kk] * v_d[kk];
    }
    const std::vector<double> d_flux_e = derivative_x(grid, flux_e);
    const std::vector<double> d_flux_rho = derivative_x(grid, flux_rho);
    const std::vector<double> d_flux_ff = derivative_x(grid, flux_ff);

    std::vector<double> q(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        q[kk] = cfg.k_p * e[kk] - d_flux_e[kk] - d_flux_rho[kk] + d_flux_ff[kk];
    }
    return q;
}

// Velocity recovery from [rho U]_x = -q on the ring:
//   F(x) = -int_0^x q ds + C,  C fixed by zero-mean F (no net momentum),
//   U = F / max(rho, rho_floor).
// Requires q to integrate to zero (F would not be periodic otherwise).
inline VelocityField recover_velocity(const DensityField& rho, std::span<const double> q,
                                      double rho_floor) {
    detail::require(rho_floor > 0.0, "recover_velocity: rho_floor must be > 0");
    detail::require(q.size() == static_cast<std::size_t>(rho.grid.n_cells),
                    "recover_velocity: size mismatch");
    const RingGrid& grid = rho.grid;
    const int n = grid.n_cells;
    const double dx = grid.dx();

    const double q_mass = integrate(grid, q);
    detail::require(std::abs(q_mass) <= 1e-8, "recover_velocity: source must integrate to zero");

    // midpoint cumulative integral up to each cell center
    std::vector<double> flux(static_cast<std::size_t>(n));
    double run = 0.0;
    for (int k = 0; k < n; ++k) {
        flux[static_cast<std::size_t>(k)] = -(run + 0.5 * q[static_cast<std::size_t>(k)] * dx);
        run += q[static_cast<std::size_t>(k)] * dx;
    }
    double mean = 0.0;
    for (double f : flux) mean += f;
    mean /= n;

    std::vector<double> u(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        u[kk] = (flux[kk] - mean) / std::max(rho.values[kk], rho_floor);
    }
    return VelocityField(grid, std::move(u));
}

// Step 3 of the pipeline: u_i = U(x_i) by periodic linear interpolation
// between cell centers.
inline std::vector<double> discretise_inputs(const VelocityField& u,
                                             std::span<const double> positions) {
    const RingGrid& grid = u.grid;
    const int n = grid.n_cells;
    const double dx = grid.dx();
    std::vector<double> out(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const double x = wrap_position(positions[i], grid.length);
        double s = x / dx - 0.5;
        if (s < 0.0) s += n;
        const int k0 = static_cast<int>(std::floor(s)) % n;
        const double frac = s - std::floor(s);
        const int k1 = (k0 + 1 == n) ? 0 : k0 + 1;
        out[i] = u.values[static_cast<std::size_t>(k0)] * (1.0 - frac) +
                 u.values[static_cast<std::size_t>(k1)] * frac;
    }
    return out;
}

// V = 1/2 * int e^2 dx with e = rho^d - rho
inline double lyapunov_value(const DensityField& rho, const DensityField& rho_d) {
    detail::require(rho.grid == rho_d.grid, "lyapunov_value: grid mismatch");
    double acc = 0.0;
    for (int k = 0; k < rho.grid.n_cells; ++k) {
        const double e = rho_d.values[static_cast<std::size_t>(k)] -
                         rho.values[static_cast<std::size_t>(k)];
        acc += e * e;
    }
    return 0.5 * acc * rho.grid.dx();
}

}  // namespace swarmfield
