#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmfield {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr const char* kVersion = "1.0.0";

namespace detail {
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}
inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}
}  // namespace detail

// Uniform cell-centered grid on the periodic interval [0, length).
// cell k covers [k*dx, (k+1)*dx), center at (k + 1/2)*dx.
struct RingGrid {
    int n_cells = 256;
    double length = kTwoPi;

    RingGrid() = default;
    RingGrid(int n, double len = kTwoPi) : n_cells(n), length(len) {
        detail::require(n_cells >= 4, "RingGrid: n_cells must be >= 4");
        detail::require(std::isfinite(length) && length > 0.0, "RingGrid: length must be positive");
    }

    double dx() const { return length / n_cells; }
    double center(int k) const { return (k + 0.5) * dx(); }
    double edge(int k) const { return k * dx(); }

    std::vector<double> centers() const {
        std::vector<double> c(static_cast<std::size_t>(n_cells));
        for (int k = 0; k < n_cells; ++k) c[static_cast<std::size_t>(k)] = center(k);
        return c;
    }

    // cell index containing position x in [0, length)
    int cell_of(double x) const {
        int k = static_cast<int>(std::floor(x / dx()));
        if (k < 0) k = 0;
        if (k >= n_cells) k = n_cells - 1;
        return k;
    }

    bool operator==(const RingGrid&) const = default;
};

// position folded into [0, length)
inline double wrap_position(double x, double length) {
    detail::require(std::isfinite(x) && length > 0.0, "wrap_position: non-finite input");
    double r = std::fmod(x, length);
    if (r < 0.0) r += length;
    if (r >= length) r = 0.0;  // fmod rounding at the seam
    return r;
}

// signed displacement a - b folded into [-length/2, length/2)
inline double wrap_displacement(double a, double b, double length) {
    detail::require(std::isfinite(a) && std::isfinite(b) && std::isfinite(length) && length > 0.0,
                    "wrap_displacement: non-finite input");
    double r = std::fmod(a - b, length);
    if (r < -0.5 * length) r += length;
    if (r >= 0.5 * length) r -= length;
    return r;
}

inline double integrate(const RingGrid& grid, std::span<const double> values) {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.dx();
}

// Nonnegative grid function with probability-density units and a tracked mass.
struct DensityField {
    RingGrid grid;
    std::vector<double> values;
    double mass = 0.0;

    DensityField() = default;

    DensityField(RingGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {
        detail::require(values.size() == static_cast<std::size_t>(grid.n_cells),
                        "DensityField: values size does not match grid");
        detail::require(detail::all_finite(values), "DensityField: non-finite values");
        for (double x : values)
            detail::require(x >= 0.0, "DensityField: negative density value");
        mass = integrate(grid, values);
    }

    static DensityField uniform(RingGrid g, double total_mass = 1.0) {
        detail::require(total_mass >= 0.0, "DensityField::uniform: negative mass");
        std::vector<double> v(static_cast<std::size_t>(g.n_cells), total_mass / g.length);
        return DensityField(g, std::move(v));
    }

    template <class F>
    static DensityField from_function(RingGrid g, F&& f) {
        std::vector<double> v(static_cast<std::size_t>(g.n_cells));
        for (int k = 0; k < g.n_cells; ++k) v[static_cast<std::size_t>(k)] = f(g.center(k));
        return DensityField(g, std::move(v));
    }

    double refresh_mass() {
        mass = integrate(grid, values);
        return mass;
    }

    void scale_to_mass(double target_mass) {
        detail::require(mass > 0.0, "DensityField: cannot rescale a zero-mass field");
        const double c = target_mass / mass;
        for (double& v : values) v *= c;
        mass = integrate(grid, values);
    }
};

struct VelocityField {
    RingGrid grid;
    std::vector<double> values;

    VelocityField() = default;
    VelocityField(RingGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {
        detail::require(values.size() == static_cast<std::size_t>(grid.n_cells),
                        "VelocityField: values size does not match grid");
        detail::require(detail::all_finite(values), "VelocityField: non-finite values");
    }
};

// second-order central difference with periodic wraparound
inline std::vector<double> derivative_x(const RingGrid& grid, std::span<const double> values) {
    detail::require(values.size() == static_cast<std::size_t>(grid.n_cells),
                    "derivative_x: size mismatch");
    const int n = grid.n_cells;
    const double inv2dx = 1.0 / (2.0 * grid.dx());
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const int kp = (k + 1 == n) ? 0 : k + 1;
        const int km = (k == 0) ? n - 1 : k - 1;
        out[static_cast<std::size_t>(k)] =
            (values[static_cast<std::size_t>(kp)] - values[static_cast<std::size_t>(km)]) * inv2dx;
    }
    return out;
}

// Running integral of a density, normalised to 1, with its pseudo-inverse.
// cum has n+1 entries at the cell edges; cum[0] = 0, cum[n] = 1.
// The CDF is piecewise linear (density is piecewise constant), the quantile
// is the right-continuous pseudo-inverse Q(p) = inf{x : F(x) >= p}.
struct CdfQuantile {
    RingGrid grid;
    std::vector<double> cum;

    double cdf(double x) const {
        if (x <= 0.0) return 0.0;
        if (x >= grid.length) return 1.0;
        const int k = grid.cell_of(x);
        const double slope = (cum[static_cast<std::size_t>(k + 1)] - cum[static_cast<std::size_t>(k)]) / grid.dx();
        return cum[static_cast<std::size_t>(k)] + slope * (x - grid.edge(k));
    }

    // p in [0, 1] -> position in [0, length)
    double quantile(double p) const {
        if (p <= 0.0) p = 0.0;
        if (p >= 1.0) p = 1.0;
        // first k with cum[k + 1] >= p
        const auto it = std::lower_bound(cum.begin() + 1, cum.end(), p);
        const int k = static_cast<int>(it - cum.begin()) - 1;
        const double lo = cum[static_cast<std::size_t>(k)];
        const double hi = cum[static_cast<std::size_t>(k + 1)];
        double x;
        if (hi > lo)
            x = grid.edge(k) + (p - lo) / (hi - lo) * grid.dx();
        else
            x = grid.edge(k);
        if (x >= grid.length) x = std::nextafter(grid.length, 0.0);
        return x;
    }

    // quantile extended off [0,1) by full turns: Q(u + m) = Q(u) + m*length
    double quantile_ext(double u) const {
        const double turns = std::floor(u);
        return quantile(u - turns) + turns * grid.length;
    }
};

inline CdfQuantile cdf_and_quantile(const DensityField& field) {
    detail::require(field.mass > 0.0, "cdf_and_quantile: field has zero mass");
    const int n = field.grid.n_cells;
    std::vector<double> cum(static_cast<std::size_t>(n) + 1, 0.0);
    double run = 0.0;
    const double w = field.grid.dx() / field.mass;
    for (int k = 0; k < n; ++k) {
        run += field.values[static_cast<std::size_t>(k)] * w;
        cum[static_cast<std::size_t>(k + 1)] = run;
    }
    // force exact endpoint; interior entries clipped to [0, 1]
    for (double& c : cum) c = std::min(c, 1.0);
    cum[static_cast<std::size_t>(n)] = 1.0;
    return CdfQuantile{field.grid, std::move(cum)};
}

}  // namespace swarmfield
