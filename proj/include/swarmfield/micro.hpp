#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "swarmfield/kernel.hpp"
#include "swarmfield/ring.hpp"
#include "swarmfield/rng.hpp"

namespace swarmfield {

// N velocity-controlled point agents on the ring. The noise stream is part of
// the population so repeated stepping continues one reproducible sequence.
struct AgentPopulation {
    double length = kTwoPi;
    std::vector<double> positions;
    std::vector<double> inputs;
    Rng rng;

    AgentPopulation() = default;
    AgentPopulation(std::vector<double> pos, double len, std::uint64_t seed)
        : length(len), positions(std::move(pos)), inputs(positions.size(), 0.0), rng(seed) {
        detail::require(!positions.empty(), "AgentPopulation: N must be >= 1");
        detail::require(len > 0.0, "AgentPopulation: length must be > 0");
        for (double& x : positions) x = wrap_position(x, length);
    }

    int size() const { return static_cast<int>(positions.size()); }
};

namespace detail {

// Reference double loop; kept as the plain realisation of the mean-field sum.
inline std::vector<double> interaction_velocity_direct(const AgentPopulation& pop,
                                                       const InteractionKernel& kernel,
                                                       double radius) {
    const int n = pop.size();
    const double r = std::min(radius, 0.5 * pop.length);
    std::vector<double> v(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double z = wrap_displacement(pop.positions[static_cast<std::size_t>(i)],
                                               pop.positions[static_cast<std::size_t>(j)], pop.length);
            if (std::abs(z) <= r) acc += kernel(z);
        }
        v[static_cast<std::size_t>(i)] = acc / n;
    }
    return v;
}

// O(N log N) evaluation for exponential kernels via sorted prefix sums of
// exp(+-x/ell). Exactness of the exponential makes the window sums separable:
//   sum_j exp(-(x_i - x_j)/ell) = exp(-x_i/ell) * sum_j exp(x_j/ell).
// Requires exp(length/ell) to stay well inside double range.
inline std::vector<double> interaction_velocity_sorted_exp(const AgentPopulation& pop,
                                                           const InteractionKernel& kernel,
                                                           double radius) {
    const int n = pop.size();
    const double len = pop.length;
    const double ell = kernel.decay_length;
    const double s = kernel.signed_strength();
    const double half = 0.5 * len;
    const double r = std::min(radius, half);

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return pop.positions[static_cast<std::size_t>(a)] < pop.positions[static_cast<std::size_t>(b)];
    });
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        y[static_cast<std::size_t>(k)] = pop.positions[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];

    // Prefix sums for windows whose dominant terms sit at the high end, a
    // suffix sum for the ahead window whose dominant terms sit at the low
    // end; differencing against the dominant side avoids cancellation.
    std::vector<double> pref_pos(static_cast<std::size_t>(n) + 1, 0.0);  // exp(+y/ell)
    std::vector<double> pref_neg(static_cast<std::size_t>(n) + 1, 0.0);  // exp(-y/ell)
    std::vector<double> suf_neg(static_cast<std::size_t>(n) + 1, 0.0);   // exp(-y/ell), from the top
    for (int k = 0; k < n; ++k) {
        pref_pos[static_cast<std::size_t>(k) + 1] =
            pref_pos[static_cast<std::size_t>(k)] + std::exp(y[static_cast<std::size_t>(k)] / ell);
        pref_neg[static_cast<std::size_t>(k) + 1] =
            pref_neg[static_cast<std::size_t>(k)] + std::exp(-y[static_cast<std::size_t>(k)] / ell);
    }
    for (int k = n - 1; k >= 0; --k)
        suf_neg[static_cast<std::size_t>(k)] =
            suf_neg[static_cast<std::size_t>(k) + 1] + std::exp(-y[static_cast<std::size_t>(k)] / ell);
    const auto sum_pos = [&](int lo, int hi) {  // over sorted indices [lo, hi)
        return lo >= hi ? 0.0 : pref_pos[static_cast<std::size_t>(hi)] - pref_pos[static_cast<std::size_t>(lo)];
    };
    const auto sum_neg_low = [&](int lo, int hi) {  // window anchored at small y
        return lo >= hi ? 0.0 : pref_neg[static_cast<std::size_t>(hi)] - pref_neg[static_cast<std::size_t>(lo)];
    };
    const auto sum_neg_high = [&](int lo, int hi) {  // window anchored at index lo
        return lo >= hi ? 0.0 : suf_neg[static_cast<std::size_t>(lo)] - suf_neg[static_cast<std::size_t>(hi)];
    };
    const auto lb = [&](double x) { return static_cast<int>(std::lower_bound(y.begin(), y.end(), x) - y.begin()); };
    const auto ub = [&](double x) { return static_cast<int>(std::upper_bound(y.begin(), y.end(), x) - y.begin()); };

    std::vector<double> v(static_cast<std::size_t>(n), 0.0);
    const double decay_turn = std::exp(-len / ell);
    for (int k = 0; k < n; ++k) {
        const double yi = y[static_cast<std::size_t>(k)];
        // neighbours behind: displacement z = yi - yj in (0, r]; exclude the
        // antipode when r == half (it wraps to z = -half and counts as ahead)
        double behind = 0.0;
        {
            const double lo = yi - r;
            const int start = (r == half) ? ub(lo) : lb(lo);
            if (lo >= 0.0) {
                behind = std::exp(-yi / ell) * sum_pos(start, k);
            } else {
                behind = std::exp(-yi / ell) * sum_pos(0, k);
                const double wlo = lo + len;  // wrapped tail (wlo, len)
                const int wstart = (r == half) ? ub(wlo) : lb(wlo);
                behind += std::exp(-(yi + len) / ell) * sum_pos(wstart, n);
            }
        }
        // neighbours ahead: z = yj - yi in (0, r], inclusive of the antipode
        double ahead = 0.0;
        {
            const double hi = yi + r;
            if (hi < len) {
                ahead = std::exp(yi / ell) * sum_neg_high(k + 1, ub(hi));
            } else {
                ahead = std::exp(yi / ell) * sum_neg_high(k + 1, n);
                const double whi = hi - len;  // wrapped head [0, whi]
                ahead += std::exp(yi / ell) * decay_turn * sum_neg_low(0, ub(whi));
            }
        }
        // duplicate positions contribute exp(0) = 1 to the window sums but
        // f(0) = 0 in the direct sum; remove them
        const int dup_lo = lb(yi);
        const int dup_hi = ub(yi);
        const int dups = dup_hi - dup_lo - 1;
        if (dups > 0) {
            behind -= (k - dup_lo);
            ahead -= (dup_hi - 1 - k);
        }
        v[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = s * (behind - ahead) / n;
    }
    return v;
}

}  // namespace detail

// Mean-field interaction term of the agent dynamics:
//   v_i = (1/N) * sum_j f(wrap(x_i - x_j)),   |wrap| <= radius.
// The 1/N scaling makes the sum converge to f * rho as N grows.
inline std::vector<double> interaction_velocity(const AgentPopulation& pop,
                                                const InteractionKernel& kernel,
                                                double radius = kInfiniteRadius) {
    detail::require(pop.size() >= 1, "interaction_velocity: empty population");
    detail::require(radius > 0.0, "interaction_velocity: radius must be > 0");
    if (kernel.family == KernelFamily::zero)
        return std::vector<double>(static_cast<std::size_t>(pop.size()), 0.0);
    if (kernel.is_exponential() && pop.length / kernel.decay_length < 600.0)
        return detail::interaction_velocity_sorted_exp(pop, kernel, radius);
    return detail::interaction_velocity_direct(pop, kernel, radius);
}

// Euler-Maruyama step of dx_i = (interaction + input) dt + sqrt(2) sigma dW.
// Mutates the passed population (positions and its noise stream).
inline void step_agents(AgentPopulation& pop, const InteractionKernel& kernel,
                        std::span<const double> inputs, double dt, double noise_std,
                        double radius = kInfiniteRadius) {
    detail::require(dt > 0.0, "step_agents: dt must be > 0");
    detail::require(noise_std >= 0.0, "step_agents: noise_std must be >= 0");
    detail::require(inputs.size() == static_cast<std::size_t>(pop.size()),
                    "step_agents: inputs size mismatch");
    const int n = pop.size();
    const std::vector<double> v = interaction_velocity(pop, kernel, radius);
    const double noise_scale = noise_std > 0.0 ? std::sqrt(2.0 * noise_std * noise_std * dt) : 0.0;
    for (int i = 0; i < n; ++i) {
        double x = pop.positions[static_cast<std::size_t>(i)] +
                   dt * (v[static_cast<std::size_t>(i)] + inputs[static_cast<std::size_t>(i)]);
        if (noise_scale > 0.0) x += noise_scale * pop.rng.normal();
        pop.positions[static_cast<std::size_t>(i)] = wrap_position(x, pop.length);
    }
}

// i.i.d. inverse-CDF samples from a density; deterministic given the seed.
inline AgentPopulation sample_initial_positions(int n, const DensityField& density,
                                                std::uint64_t seed) {
    detail::require(n > 0, "sample_initial_positions: n must be >= 1");
    const CdfQuantile cq = cdf_and_quantile(density);
    Rng rng(derive_seed(seed, 0x5a3d));
    std::vector<double> pos(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pos[static_cast<std::size_t>(i)] = cq.quantile(rng.uniform());
    return AgentPopulation(std::move(pos), density.grid.length, seed);
}

}  // namespace swarmfield
