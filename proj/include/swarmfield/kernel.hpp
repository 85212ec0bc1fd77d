#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "swarmfield/ring.hpp"

namespace swarmfield {

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

enum class KernelFamily { zero, repulsive_exponential, attractive_exponential, custom_table };

// Odd pairwise velocity kernel f(z) on wrapped displacements z = x_eval - x_source.
// Sign convention: with v = f(x_i - x_j), "repulsive" pushes i away from j,
// i.e. f(z) has the sign of z.
struct InteractionKernel {
    KernelFamily family = KernelFamily::repulsive_exponential;
    double strength = 1.0;
    double decay_length = kTwoPi / 4.0;  // pi/2
    std::vector<double> table;           // custom: samples at z = -table_length/2 + k*dz
    double table_length = kTwoPi;

    double operator()(double z) const {
        switch (family) {
            case KernelFamily::zero:
                return 0.0;
            case KernelFamily::repulsive_exponential:
                return z == 0.0 ? 0.0 : strength * sgn(z) * std::exp(-std::abs(z) / decay_length);
            case KernelFamily::attractive_exponential:
                return z == 0.0 ? 0.0 : -strength * sgn(z) * std::exp(-std::abs(z) / decay_length);
            case KernelFamily::custom_table:
                return eval_table(z);
        }
        return 0.0;
    }

    bool is_exponential() const {
        return family == KernelFamily::repulsive_exponential ||
               family == KernelFamily::attractive_exponential;
    }

    // signed strength as seen from f(z) = s * sgn(z) * exp(-|z|/ell)
    double signed_strength() const {
        return family == KernelFamily::attractive_exponential ? -strength : strength;
    }

    static InteractionKernel zero() { return InteractionKernel{KernelFamily::zero, 0.0, 1.0, {}, kTwoPi}; }

    static InteractionKernel repulsive(double strength, double decay_length) {
        detail::require(decay_length > 0.0, "InteractionKernel: decay_length must be > 0");
        return InteractionKernel{KernelFamily::repulsive_exponential, strength, decay_length, {}, kTwoPi};
    }

    static InteractionKernel attractive(double strength, double decay_length) {
        detail::require(decay_length > 0.0, "InteractionKernel: decay_length must be > 0");
        return InteractionKernel{KernelFamily::attractive_exponential, strength, decay_length, {}, kTwoPi};
    }

    // samples of f on [-length/2, length/2); must be odd to 1e-9
    static InteractionKernel from_table(std::vector<double> samples, double length) {
        detail::require(samples.size() >= 4, "InteractionKernel: table too small");
        detail::require(length > 0.0, "InteractionKernel: table length must be > 0");
        const std::size_t m = samples.size();
        for (std::size_t k = 1; k < m; ++k) {
            // z_k = -L/2 + k*dz mirrors to z_{m-k}; z_0 = -L/2 has no mirror
            const double odd_defect = samples[k] + samples[m - k];
            detail::require(std::abs(odd_defect) <= 1e-9, "InteractionKernel: custom table is not odd");
        }
        InteractionKernel kern;
        kern.family = KernelFamily::custom_table;
        kern.table = std::move(samples);
        kern.table_length = length;
        return kern;
    }

  private:
    static double sgn(double z) { return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0); }

    double eval_table(double z) const {
        const double half = 0.5 * table_length;
        z = wrap_displacement(z, 0.0, table_length);
        const double dz = table_length / static_cast<double>(table.size());
        double s = (z + half) / dz;
        const auto m = static_cast<std::ptrdiff_t>(table.size());
        auto k0 = static_cast<std::ptrdiff_t>(std::floor(s));
        const double frac = s - static_cast<double>(k0);
        if (k0 < 0) k0 = 0;
        const std::ptrdiff_t k1 = (k0 + 1 >= m) ? 0 : k0 + 1;  // wraps around the seam
        return table[static_cast<std::size_t>(k0)] * (1.0 - frac) +
               table[static_cast<std::size_t>(k1)] * frac;
    }
};

// Kernel samples per displacement class wrap(l*dx), scaled by dx and cut at
// the sensing radius. The antipodal class (exactly -length/2) is forced to
// zero: an odd periodic kernel must vanish there, and the half-open wrap
// interval would otherwise leave that sample without its mirror.
inline std::vector<double> kernel_displacement_table(const RingGrid& grid,
                                                     const InteractionKernel& kernel,
                                                     double radius = kInfiniteRadius) {
    detail::require(radius > 0.0, "kernel_displacement_table: radius must be > 0");
    const int n = grid.n_cells;
    const double dx = grid.dx();
    const double r = std::min(radius, 0.5 * grid.length);
    std::vector<double> f_tab(static_cast<std::size_t>(n), 0.0);
    for (int l = 0; l < n; ++l) {
        const double z = wrap_displacement(l * dx, 0.0, grid.length);
        if (z == -0.5 * grid.length) continue;
        if (std::abs(z) <= r) f_tab[static_cast<std::size_t>(l)] = kernel(z) * dx;
    }
    return f_tab;
}

// Discrete periodic convolution with midpoint quadrature:
//   out[k] = sum_j f(wrap(x_k - x_j)) * values[j] * dx,   |wrap(x_k - x_j)| <= radius.
// radius = infinity means length/2 (every cell contributes once).
inline std::vector<double> convolve_periodic(const RingGrid& grid, std::span<const double> values,
                                             const InteractionKernel& kernel,
                                             double radius = kInfiniteRadius) {
    detail::require(values.size() == static_cast<std::size_t>(grid.n_cells),
                    "convolve_periodic: size mismatch");
    const int n = grid.n_cells;
    const std::vector<double> f_tab = kernel_displacement_table(grid, kernel, radius);
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            int l = k - j;
            if (l < 0) l += n;
            acc += f_tab[static_cast<std::size_t>(l)] * values[static_cast<std::size_t>(j)];
        }
        out[static_cast<std::size_t>(k)] = acc;
    }
    return out;
}

inline VelocityField convolve_periodic(const DensityField& field, const InteractionKernel& kernel,
                                       double radius = kInfiniteRadius) {
    return VelocityField(field.grid, convolve_periodic(field.grid, field.values, kernel, radius));
}

}  // namespace swarmfield
