#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "swarmfield/kernel.hpp"
#include "swarmfield/ring.hpp"

namespace swarmfield {

// Accumulated stepper bookkeeping. clamped_mass is the total mass added back
// when rounding pushed a cell below zero; it must stay tiny over a whole run.
struct FvDiagnostics {
    double clamped_mass = 0.0;
    long long steps = 0;
};

struct AdvectionDiffusionSpec {
    std::vector<double> velocity;  // cell-centered; empty means zero
    double diffusion = 0.0;
    std::vector<double> source;    // cell values; empty means none

    AdvectionDiffusionSpec() = default;
    AdvectionDiffusionSpec(std::vector<double> vel, double D, std::vector<double> src = {})
        : velocity(std::move(vel)), diffusion(D), source(std::move(src)) {
        detail::require(diffusion >= 0.0, "AdvectionDiffusionSpec: diffusion must be >= 0");
    }
};

namespace detail {

// One explicit finite-volume step in flux form on the ring.
// w[k] and dif[k] live at interface k+1/2 (between cells k and k+1):
//   flux_{k+1/2} = w * upwind(rho) - dif * (rho_{k+1} - rho_k)/dx
//   rho_k <- rho_k - dt/dx * (flux_{k+1/2} - flux_{k-1/2}) + dt * source_k
// Interface fluxes telescope, so mass changes only through the source and
// the positivity clamp.
inline void fv_flux_step(const RingGrid& grid, std::vector<double>& rho,
                         std::span<const double> w, std::span<const double> dif,
                         std::span<const double> source, double dt, FvDiagnostics* diag) {
    const int n = grid.n_cells;
    const double dx = grid.dx();

    double w_max = 0.0, d_max = 0.0;
    for (int k = 0; k < n; ++k) {
        w_max = std::max(w_max, std::abs(w[static_cast<std::size_t>(k)]));
        d_max = std::max(d_max, dif[static_cast<std::size_t>(k)]);
    }
    const double rate = w_max / dx + 2.0 * d_max / (dx * dx);
    if (dt * rate > 0.9) {
        std::ostringstream msg;
        msg << "CFL violation: dt=" << dt << " exceeds admissible dt=" << 0.9 / rate
            << " (max interface speed " << w_max << ", max diffusivity " << d_max << ")";
        throw std::invalid_argument(msg.str());
    }

    std::vector<double> flux(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const int kp = (k + 1 == n) ? 0 : k + 1;
        const double wk = w[static_cast<std::size_t>(k)];
        const double up = wk > 0.0 ? rho[static_cast<std::size_t>(k)] : rho[static_cast<std::size_t>(kp)];
        flux[static_cast<std::size_t>(k)] =
            wk * up - dif[static_cast<std::size_t>(k)] *
                          (rho[static_cast<std::size_t>(kp)] - rho[static_cast<std::size_t>(k)]) / dx;
    }
    const double c = dt / dx;
    for (int k = 0; k < n; ++k) {
        const int km = (k == 0) ? n - 1 : k - 1;
        double v = rho[static_cast<std::size_t>(k)] -
                   c * (flux[static_cast<std::size_t>(k)] - flux[static_cast<std::size_t>(km)]);
        if (!source.empty()) v += dt * source[static_cast<std::size_t>(k)];
        if (v < 0.0) {
            if (diag) diag->clamped_mass += -v * dx;
            v = 0.0;
        }
        rho[static_cast<std::size_t>(k)] = v;
    }
    if (diag) diag->steps += 1;
}

inline std::vector<double> interface_average(const RingGrid& grid, std::span<const double> cellwise) {
    const int n = grid.n_cells;
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    if (cellwise.empty()) return w;
    for (int k = 0; k < n; ++k) {
        const int kp = (k + 1 == n) ? 0 : k + 1;
        w[static_cast<std::size_t>(k)] =
            0.5 * (cellwise[static_cast<std::size_t>(k)] + cellwise[static_cast<std::size_t>(kp)]);
    }
    return w;
}

}  // namespace detail

// largest dt the stepper will accept for a cell-centered velocity and diffusion
inline double cfl_admissible_dt(const RingGrid& grid, std::span<const double> velocity, double D) {
    double v_max = 0.0;
    for (double v : velocity) v_max = std::max(v_max, std::abs(v));
    const double dx = grid.dx();
    const double rate = v_max / dx + 2.0 * D / (dx * dx);
    return rate > 0.0 ? 0.9 / rate : std::numeric_limits<double>::infinity();
}

// First-order upwind advection + explicit central diffusion + explicit source
// for rho_t + [rho v]_x = D rho_xx + q. Errors on CFL violation, naming the
// admissible dt.
inline DensityField step_conservation(const DensityField& rho, const AdvectionDiffusionSpec& spec,
                                      double dt, FvDiagnostics* diag = nullptr) {
    detail::require(dt > 0.0, "step_conservation: dt must be > 0");
    if (!spec.velocity.empty())
        detail::require(spec.velocity.size() == static_cast<std::size_t>(rho.grid.n_cells),
                        "step_conservation: velocity size mismatch");
    if (!spec.source.empty())
        detail::require(spec.source.size() == static_cast<std::size_t>(rho.grid.n_cells),
                        "step_conservation: source size mismatch");
    const int n = rho.grid.n_cells;
    const std::vector<double> w = detail::interface_average(rho.grid, spec.velocity);
    const std::vector<double> dif(static_cast<std::size_t>(n), spec.diffusion);
    std::vector<double> values = rho.values;
    detail::fv_flux_step(rho.grid, values, w, dif, spec.source, dt, diag);
    return DensityField(rho.grid, std::move(values));
}

// Follower transport of the leader-follower pair: the advecting velocity is
// the kernel field generated by the leader density.
inline DensityField step_follower(const DensityField& rho_F, const DensityField& rho_L,
                                  const InteractionKernel& kernel, double D, double dt,
                                  FvDiagnostics* diag = nullptr) {
    detail::require(rho_F.grid == rho_L.grid, "step_follower: grid mismatch");
    AdvectionDiffusionSpec spec(convolve_periodic(rho_L.grid, rho_L.values, kernel), D);
    return step_conservation(rho_F, spec, dt, diag);
}

// Coupled nonreciprocal field equations in 1D flux form.
//
//   target: d_t rho_T = d_x [ D_T(rho_T) d_x rho_T + ktilde * rho_T d_x rho_H ]
//   herder: d_t rho_H = d_x [ D_H(rho_H) d_x rho_H - v1(x) rho_H rho_T ghat(x)
//                                                   - v2(x) rho_H d_x rho_T ]
//
// with affine diffusivities D_A(rho) = D_A0 + D_A1 * rho and
// ghat(x) = sign(wrap(x - goal_position)) embedding the bilinear term as a
// flux whose sign flips across the goal. v2 must keep one sign everywhere.
struct NonreciprocalSpec {
    double D_T0 = 0.05, D_T1 = 0.0;
    double D_H0 = 0.05, D_H1 = 0.0;
    double k_tilde_T = 0.0;
    std::vector<double> v1;  // cell-centered profile; empty means zero
    std::vector<double> v2;  // cell-centered profile of constant sign; empty means zero
    double goal_position = 0.0;

    void validate(const RingGrid& grid) const {
        detail::require(D_T0 >= 0.0 && D_H0 >= 0.0, "NonreciprocalSpec: base diffusivities must be >= 0");
        if (!v1.empty())
            detail::require(v1.size() == static_cast<std::size_t>(grid.n_cells),
                            "NonreciprocalSpec: v1 size mismatch");
        if (!v2.empty()) {
            detail::require(v2.size() == static_cast<std::size_t>(grid.n_cells),
                            "NonreciprocalSpec: v2 size mismatch");
            bool any_pos = false, any_neg = false;
            for (double v : v2) {
                if (v > 0.0) any_pos = true;
                if (v < 0.0) any_neg = true;
            }
            detail::require(!(any_pos && any_neg), "NonreciprocalSpec: v2 must have one sign everywhere");
        }
    }
};

inline std::pair<DensityField, DensityField> step_nonreciprocal(const DensityField& rho_T,
                                                                const DensityField& rho_H,
                                                                const NonreciprocalSpec& spec,
                                                                double dt,
                                                                FvDiagnostics* diag = nullptr) {
    detail::require(rho_T.grid == rho_H.grid, "step_nonreciprocal: grid mismatch");
    detail::require(dt > 0.0, "step_nonreciprocal: dt must be > 0");
    spec.validate(rho_T.grid);
    const RingGrid& grid = rho_T.grid;
    const int n = grid.n_cells;
    const double dx = grid.dx();

    // In transport form rho_t + d_x(c rho) = d_x(D d_x rho) the target is
    // advected with c_T = -ktilde d_x rho_H and the herder with
    // c_H = v1 rho_T ghat + v2 d_x rho_T (both evaluated at interfaces).
    std::vector<double> w_T(static_cast<std::size_t>(n)), dif_T(static_cast<std::size_t>(n));
    std::vector<double> w_H(static_cast<std::size_t>(n)), dif_H(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const int kp = (k + 1 == n) ? 0 : k + 1;
        const auto kk = static_cast<std::size_t>(k);
        const auto kkp = static_cast<std::size_t>(kp);
        const double grad_T = (rho_T.values[kkp] - rho_T.values[kk]) / dx;
        const double grad_H = (rho_H.values[kkp] - rho_H.values[kk]) / dx;
        const double mid_T = 0.5 * (rho_T.values[kk] + rho_T.values[kkp]);
        const double mid_H = 0.5 * (rho_H.values[kk] + rho_H.values[kkp]);
        dif_T[kk] = spec.D_T0 + spec.D_T1 * mid_T;
        dif_H[kk] = spec.D_H0 + spec.D_H1 * mid_H;
        w_T[kk] = -spec.k_tilde_T * grad_H;
        double c_H = 0.0;
        if (!spec.v1.empty()) {
            const double v1_int = 0.5 * (spec.v1[kk] + spec.v1[kkp]);
            const double x_int = grid.edge(kp == 0 ? n : kp);
            const double ghat = wrap_displacement(x_int, spec.goal_position, grid.length) >= 0.0 ? 1.0 : -1.0;
            c_H += v1_int * mid_T * ghat;
        }
        if (!spec.v2.empty()) {
            const double v2_int = 0.5 * (spec.v2[kk] + spec.v2[kkp]);
            c_H += v2_int * grad_T;
        }
        w_H[kk] = c_H;
    }

    std::vector<double> values_T = rho_T.values;
    std::vector<double> values_H = rho_H.values;
    detail::fv_flux_step(grid, values_T, w_T, dif_T, {}, dt, diag);
    detail::fv_flux_step(grid, values_H, w_H, dif_H, {}, dt, diag);
    return {DensityField(grid, std::move(values_T)), DensityField(grid, std::move(values_H))};
}

// midpoint-rule mass integral
inline double mass_of(const DensityField& field) { return integrate(field.grid, field.values); }

}  // namespace swarmfield
