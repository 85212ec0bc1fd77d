#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "swarmfield/ring.hpp"

namespace swarmfield {

inline double l2_distance(const DensityField& a, const DensityField& b) {
    detail::require(a.grid == b.grid, "l2_distance: grid mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        const double d = a.values[k] - b.values[k];
        acc += d * d;
    }
    return std::sqrt(acc * a.grid.dx());
}

inline double l1_distance(const DensityField& a, const DensityField& b) {
    detail::require(a.grid == b.grid, "l1_distance: grid mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) acc += std::abs(a.values[k] - b.values[k]);
    return acc * a.grid.dx();
}

inline double l2_norm(const DensityField& a) {
    double acc = 0.0;
    for (double v : a.values) acc += v * v;
    return std::sqrt(acc * a.grid.dx());
}

// Circular Wasserstein-1 distance: int |F_a - F_b - med| dx with med the
// (Lebesgue) median of the CDF difference, which is the exact minimiser
// over the cut position. Cell-midpoint quadrature of the CDF difference.
inline double w1_circular(const DensityField& a, const DensityField& b) {
    detail::require(a.grid == b.grid, "w1_circular: grid mismatch");
    detail::require(a.mass > 0.0 && b.mass > 0.0, "w1_circular: zero-mass field");
    const int n = a.grid.n_cells;
    const double dx = a.grid.dx();
    std::vector<double> g(static_cast<std::size_t>(n));
    double cum_a = 0.0, cum_b = 0.0;
    for (int k = 0; k < n; ++k) {
        const double half_a = 0.5 * a.values[static_cast<std::size_t>(k)] * dx / a.mass;
        const double half_b = 0.5 * b.values[static_cast<std::size_t>(k)] * dx / b.mass;
        g[static_cast<std::size_t>(k)] = (cum_a + half_a) - (cum_b + half_b);
        cum_a += 2.0 * half_a;
        cum_b += 2.0 * half_b;
    }
    std::vector<double> sorted = g;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    const double med = sorted[static_cast<std::size_t>(n / 2)];
    double acc = 0.0;
    for (double v : g) acc += std::abs(v - med);
    return acc * dx;
}

struct ErrorMetrics {
    double l2 = 0.0;
    double l1 = 0.0;
    double w1 = 0.0;
};

inline ErrorMetrics metrics(const DensityField& rho, const DensityField& rho_d) {
    return ErrorMetrics{l2_distance(rho, rho_d), l1_distance(rho, rho_d), w1_circular(rho, rho_d)};
}

// 1 - |first circular moment| of the normalised density: 0 for a point mass,
// 1 for the uniform distribution. Used as the confinement measure.
inline double circular_variance(const DensityField& rho) {
    detail::require(rho.mass > 0.0, "circular_variance: zero-mass field");
    std::complex<double> moment = 0.0;
    const double dx = rho.grid.dx();
    for (int k = 0; k < rho.grid.n_cells; ++k) {
        const double a = kTwoPi * rho.grid.center(k) / rho.grid.length;
        moment += rho.values[static_cast<std::size_t>(k)] * dx *
                  std::complex<double>(std::cos(a), std::sin(a));
    }
    return 1.0 - std::abs(moment) / rho.mass;
}

}  // namespace swarmfield
