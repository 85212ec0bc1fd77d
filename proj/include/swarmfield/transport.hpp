#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "swarmfield/ring.hpp"

namespace swarmfield {

namespace detail {

// index of the atom (cell) whose mass interval contains the interior point u
inline int atom_of(const CdfQuantile& cq, double u) {
    const auto it = std::upper_bound(cq.cum.begin() + 1, cq.cum.end(), u);
    int k = static_cast<int>(it - cq.cum.begin()) - 1;
    if (k >= cq.grid.n_cells) k = cq.grid.n_cells - 1;
    return k;
}

// Squared-displacement cost (per unit mass) of the monotone coupling of the
// cell atoms under a mass shift of the target CDF:
// mass between consecutive merged CDF breakpoints couples one source atom to
// one target atom; target positions are unwrapped by full turns so circular
// displacements take the short way dictated by the shift.
inline double quantile_coupling_cost(const CdfQuantile& a, const CdfQuantile& b, double shift) {
    std::vector<double> breaks;
    breaks.reserve(a.cum.size() + b.cum.size() + 2);
    for (double c : a.cum)
        if (c > 0.0 && c < 1.0) breaks.push_back(c);
    for (double c : b.cum) {
        double u = c + shift;
        u -= std::floor(u);
        if (u > 0.0 && u < 1.0) breaks.push_back(u);
    }
    breaks.push_back(0.0);
    breaks.push_back(1.0);
    std::sort(breaks.begin(), breaks.end());

    double cost = 0.0;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        const double u0 = breaks[s], u1 = breaks[s + 1];
        const double h = u1 - u0;
        if (h <= 0.0) continue;
        const double umid = 0.5 * (u0 + u1);
        const int i = atom_of(a, umid);
        const double v = umid - shift;
        const double turn = std::floor(v);
        const int j = atom_of(b, v - turn);
        const double d = a.grid.center(i) - (b.grid.center(j) + turn * b.grid.length);
        cost += h * d * d;
    }
    return cost;
}

// Right derivative of the coupling cost in the shift. The cost is convex and
// piecewise linear; raising the shift by d\theta re-couples a mass sliver
// d\theta at every target atom boundary from the atom above to the atom
// below, so the derivative is the sum of the squared-displacement changes.
inline double coupling_cost_shift_derivative(const CdfQuantile& a, const CdfQuantile& b,
                                             double shift) {
    const int m = b.grid.n_cells;
    double deriv = 0.0;
    for (int j = 0; j < m; ++j) {
        const double cum_j = b.cum[static_cast<std::size_t>(j)];
        const double raw = cum_j + shift;
        const double fl = std::floor(raw);
        const double u = raw - fl;  // boundary position on the u-circle
        const int i = atom_of(a, u);
        const double x = a.grid.center(i);
        double y_below, y_above;
        if (j == 0) {
            // turn boundary: atom m-1 one turn lower meets atom 0
            y_below = b.grid.center(m - 1) + (-fl - 1.0) * b.grid.length;
            y_above = b.grid.center(0) + (-fl) * b.grid.length;
        } else {
            y_below = b.grid.center(j - 1) + (-fl) * b.grid.length;
            y_above = b.grid.center(j) + (-fl) * b.grid.length;
        }
        deriv += (x - y_below) * (x - y_below) - (x - y_above) * (x - y_above);
    }
    return deriv;
}

// minimiser of the convex piecewise-linear cost(shift): bisection on the
// nondecreasing subgradient lands on the exact kink (or the left edge of a
// flat optimum), which keeps the cut canonical under rotations
inline double optimal_circle_shift(const CdfQuantile& a, const CdfQuantile& b) {
    double lo = -1.0, hi = 1.0;
    for (int it = 0; it < 120 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (coupling_cost_shift_derivative(a, b, mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Monge map between two densities, sampled at cell centers, plus the exact
// squared-displacement cost of the underlying coupling (per unit mass).
// Map values may leave [0, length) on the circle: displacements are real.
struct TransportMap1D {
    RingGrid grid;
    std::vector<double> map_values;
    double cost = 0.0;
    double shift = 0.0;  // mass shift of the cut (0 for the interval map)
};

// Interval (non-circular) optimal map T = Q_target(F_source(x)); monotone
// nondecreasing by construction. The marginals may live on different
// intervals; positions are read as plain coordinates.
inline TransportMap1D ot_map_1d(const DensityField& rho, const DensityField& rho_d) {
    detail::require(std::abs(rho.mass - rho_d.mass) <= 1e-9 * std::max(rho.mass, 1.0),
                    "ot_map_1d: masses must match to 1e-9");
    const CdfQuantile a = cdf_and_quantile(rho);
    const CdfQuantile b = cdf_and_quantile(rho_d);
    const int n = rho.grid.n_cells;
    std::vector<double> map(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        map[static_cast<std::size_t>(k)] = b.quantile(a.cdf(rho.grid.center(k)));
    return TransportMap1D{rho.grid, std::move(map), detail::quantile_coupling_cost(a, b, 0.0) * rho.mass,
                          0.0};
}

// Circular optimal map for squared displacement cost: the interval map after
// cutting the circle at the optimal CDF shift. The optimal shift makes the
// coupling cheaper than (or equal to) the interval map at any fixed cut.
inline TransportMap1D ot_map_circle(const DensityField& rho, const DensityField& rho_d) {
    detail::require(std::abs(rho.grid.length - rho_d.grid.length) < 1e-12,
                    "ot_map_circle: marginals must live on the same circle");
    detail::require(std::abs(rho.mass - rho_d.mass) <= 1e-9 * std::max(rho.mass, 1.0),
                    "ot_map_circle: masses must match to 1e-9");
    const CdfQuantile a = cdf_and_quantile(rho);
    const CdfQuantile b = cdf_and_quantile(rho_d);
    const double shift = detail::optimal_circle_shift(a, b);
    const int n = rho.grid.n_cells;
    std::vector<double> map(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        map[static_cast<std::size_t>(k)] = b.quantile_ext(a.cdf(rho.grid.center(k)) - shift);
    return TransportMap1D{rho.grid, std::move(map),
                          detail::quantile_coupling_cost(a, b, shift) * rho.mass, shift};
}

// Entropy-regularised coupling between discrete mass vectors.
struct TransportPlan {
    int n = 0, m = 0;
    std::vector<double> coupling;  // row-major n x m
    double epsilon = 0.0;
    int iterations = 0;
    double marginal_violation = 0.0;
    bool converged = false;

    double operator()(int i, int j) const {
        return coupling[static_cast<std::size_t>(i) * static_cast<std::size_t>(m) +
                        static_cast<std::size_t>(j)];
    }

    double transport_cost(std::span<const double> cost) const {
        double acc = 0.0;
        for (std::size_t p = 0; p < coupling.size(); ++p) acc += coupling[p] * cost[p];
        return acc;
    }
};

// Log-domain Sinkhorn iterations; stable down to very small epsilon. Returns
// the achieved marginal violation and iteration count; a run that exhausts
// max_iter is flagged, never silently returned as converged.
inline TransportPlan sinkhorn_plan(std::span<const double> source, std::span<const double> target,
                                   std::span<const double> cost, double epsilon, int max_iter = 20000,
                                   double tol = 1e-9) {
    const int n = static_cast<int>(source.size());
    const int m = static_cast<int>(target.size());
    detail::require(n >= 1 && m >= 1, "sinkhorn_plan: empty marginals");
    detail::require(epsilon > 0.0, "sinkhorn_plan: epsilon must be > 0");
    detail::require(cost.size() == static_cast<std::size_t>(n) * static_cast<std::size_t>(m),
                    "sinkhorn_plan: cost matrix size mismatch");
    double mass_a = 0.0, mass_b = 0.0;
    for (double v : source) {
        detail::require(v > 0.0, "sinkhorn_plan: source marginal must be positive");
        mass_a += v;
    }
    for (double v : target) {
        detail::require(v > 0.0, "sinkhorn_plan: target marginal must be positive");
        mass_b += v;
    }
    detail::require(std::abs(mass_a - mass_b) <= 1e-9 * std::max(mass_a, 1.0),
                    "sinkhorn_plan: marginal masses must match");

    const auto C = [&](int i, int j) {
        return cost[static_cast<std::size_t>(i) * static_cast<std::size_t>(m) +
                    static_cast<std::size_t>(j)];
    };
    std::vector<double> f(static_cast<std::size_t>(n), 0.0), g(static_cast<std::size_t>(m), 0.0);
    std::vector<double> log_a(static_cast<std::size_t>(n)), log_b(static_cast<std::size_t>(m));
    for (int i = 0; i < n; ++i) log_a[static_cast<std::size_t>(i)] = std::log(source[static_cast<std::size_t>(i)]);
    for (int j = 0; j < m; ++j) log_b[static_cast<std::size_t>(j)] = std::log(target[static_cast<std::size_t>(j)]);

    const auto lse_row = [&](int i) {  // log sum_j exp((g_j - C_ij)/eps)
        double best = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j)
            best = std::max(best, (g[static_cast<std::size_t>(j)] - C(i, j)) / epsilon);
        double acc = 0.0;
        for (int j = 0; j < m; ++j)
            acc += std::exp((g[static_cast<std::size_t>(j)] - C(i, j)) / epsilon - best);
        return best + std::log(acc);
    };
    const auto lse_col = [&](int j) {
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            best = std::max(best, (f[static_cast<std::size_t>(i)] - C(i, j)) / epsilon);
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            acc += std::exp((f[static_cast<std::size_t>(i)] - C(i, j)) / epsilon - best);
        return best + std::log(acc);
    };

    TransportPlan plan;
    plan.n = n;
    plan.m = m;
    plan.epsilon = epsilon;
    plan.coupling.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(m), 0.0);

    double violation = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < max_iter; ++it) {
        for (int i = 0; i < n; ++i)
            f[static_cast<std::size_t>(i)] = epsilon * (log_a[static_cast<std::size_t>(i)] - lse_row(i));
        for (int j = 0; j < m; ++j)
            g[static_cast<std::size_t>(j)] = epsilon * (log_b[static_cast<std::size_t>(j)] - lse_col(j));
        // columns are exact after the g update; track the row violation
        violation = 0.0;
        for (int i = 0; i < n; ++i) {
            double row = 0.0;
            for (int j = 0; j < m; ++j)
                row += std::exp((f[static_cast<std::size_t>(i)] + g[static_cast<std::size_t>(j)] - C(i, j)) /
                                epsilon);
            violation = std::max(violation, std::abs(row - source[static_cast<std::size_t>(i)]));
        }
        if (violation <= tol) {
            ++it;
            break;
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            plan.coupling[static_cast<std::size_t>(i) * static_cast<std::size_t>(m) +
                          static_cast<std::size_t>(j)] =
                std::exp((f[static_cast<std::size_t>(i)] + g[static_cast<std::size_t>(j)] - C(i, j)) /
                         epsilon);
    plan.iterations = it;
    plan.marginal_violation = violation;
    plan.converged = violation <= tol;
    return plan;
}

// OT velocity toward the next target snapshot: U = (T(x) - x) / dt with the
// circular map, so displacements take the cheap way around.
inline VelocityField ot_velocity_field(const DensityField& rho, const DensityField& rho_d_next,
                                       double dt) {
    detail::require(dt > 0.0, "ot_velocity_field: dt must be > 0");
    const TransportMap1D map = ot_map_circle(rho, rho_d_next);
    const int n = rho.grid.n_cells;
    std::vector<double> u(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        u[static_cast<std::size_t>(k)] =
            (map.map_values[static_cast<std::size_t>(k)] - rho.grid.center(k)) / dt;
    return VelocityField(rho.grid, std::move(u));
}

}  // namespace swarmfield
