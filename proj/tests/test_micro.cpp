#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "swarmfield/micro.hpp"

using namespace swarmfield;

namespace {

// independent reference for the interaction sum
std::vector<double> brute_force_velocity(const std::vector<double>& pos, double length,
                                         const InteractionKernel& kern, double radius) {
    const int n = static_cast<int>(pos.size());
    std::vector<double> v(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double z = wrap_displacement(pos[static_cast<std::size_t>(i)],
                                               pos[static_cast<std::size_t>(j)], length);
            if (std::abs(z) <= std::min(radius, 0.5 * length)) acc += kern(z);
        }
        v[static_cast<std::size_t>(i)] = acc / n;
    }
    return v;
}

}  // namespace

TEST_CASE("interaction velocity basics") {
    SECTION("zero kernel gives zeros") {
        AgentPopulation pop({0.3, 1.0, 4.4}, kTwoPi, 1);
        for (double v : interaction_velocity(pop, InteractionKernel::zero())) CHECK(v == 0.0);
    }
    SECTION("two agents with an odd kernel move oppositely") {
        AgentPopulation pop({1.0, 2.5}, kTwoPi, 1);
        const auto v = interaction_velocity(pop, InteractionKernel::repulsive(1.0, 0.8));
        CHECK(v[0] == Approx(-v[1]).margin(1e-14));
        CHECK(v[1] > 0.0);  // the agent ahead is pushed further ahead
    }
    SECTION("five agents match the reference double loop") {
        const std::vector<double> pos{0.2, 0.9, 2.8, 3.1, 5.9};
        AgentPopulation pop(pos, kTwoPi, 1);
        const auto kern = InteractionKernel::repulsive(1.2, 0.9);
        const auto expect = brute_force_velocity(pos, kTwoPi, kern, 1e300);
        const auto got = interaction_velocity(pop, kern);
        for (int i = 0; i < 5; ++i)
            CHECK(got[static_cast<std::size_t>(i)] ==
                  Approx(expect[static_cast<std::size_t>(i)]).margin(1e-12));
    }
    SECTION("empty population is a construction error") {
        CHECK_THROWS_AS(AgentPopulation({}, kTwoPi, 1), std::invalid_argument);
    }
}

TEST_CASE("sorted fast path agrees with the direct sum") {
    Rng rng(42);
    for (const double radius : {kInfiniteRadius, 0.5 * kTwoPi, 1.3, 0.4}) {
        for (const double ell : {kTwoPi / 4.0, 0.23, 1.9}) {
            std::vector<double> pos(200);
            for (double& x : pos) x = rng.uniform(0.0, kTwoPi);
            pos[10] = pos[20];  // exercise duplicate handling
            AgentPopulation pop(pos, kTwoPi, 1);
            const auto kern = InteractionKernel::repulsive(1.1, ell);
            const auto direct = detail::interaction_velocity_direct(pop, kern, radius);
            const auto fast = detail::interaction_velocity_sorted_exp(pop, kern, radius);
            double vmax = 0.0;
            for (double v : direct) vmax = std::max(vmax, std::abs(v));
            for (std::size_t i = 0; i < pos.size(); ++i)
                CHECK(fast[i] == Approx(direct[i]).margin(1e-10 * std::max(vmax, 1.0)));
        }
    }
}

TEST_CASE("agent stepping") {
    SECTION("frozen dynamics leave positions unchanged") {
        AgentPopulation pop({0.1, 2.0, 5.5}, kTwoPi, 9);
        const auto before = pop.positions;
        std::vector<double> zero(3, 0.0);
        step_agents(pop, InteractionKernel::zero(), zero, 0.05, 0.0);
        CHECK(pop.positions == before);
    }
    SECTION("constant input translates everyone") {
        AgentPopulation pop({0.1, 2.0, 6.2}, kTwoPi, 9);
        const auto before = pop.positions;
        std::vector<double> c(3, 0.7);
        step_agents(pop, InteractionKernel::zero(), c, 0.25, 0.0);
        for (int i = 0; i < 3; ++i)
            CHECK(pop.positions[static_cast<std::size_t>(i)] ==
                  Approx(wrap_position(before[static_cast<std::size_t>(i)] + 0.7 * 0.25, kTwoPi))
                      .margin(1e-14));
    }
    SECTION("dt must be positive") {
        AgentPopulation pop({0.1}, kTwoPi, 9);
        std::vector<double> zero(1, 0.0);
        CHECK_THROWS_AS(step_agents(pop, InteractionKernel::zero(), zero, 0.0, 0.0),
                        std::invalid_argument);
    }
    SECTION("noise-only variance grows like 2 sigma^2 t") {
        const int n = 4000;
        const double sigma = 0.3, dt = 0.01;
        const int steps = 50;
        AgentPopulation pop(std::vector<double>(n, M_PI), kTwoPi, 1234);
        std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
        // accumulate per-step wrapped displacements = unwrapped motion
        std::vector<double> total(static_cast<std::size_t>(n), 0.0);
        for (int s = 0; s < steps; ++s) {
            const auto before = pop.positions;
            step_agents(pop, InteractionKernel::zero(), zero, dt, sigma);
            for (int i = 0; i < n; ++i)
                total[static_cast<std::size_t>(i)] +=
                    wrap_displacement(pop.positions[static_cast<std::size_t>(i)],
                                      before[static_cast<std::size_t>(i)], kTwoPi);
        }
        const double var = oracles::variance(total);
        const double expected = 2.0 * sigma * sigma * steps * dt;
        // chi-square 3-sigma band around the expected variance
        const double band = 3.0 * expected * std::sqrt(2.0 / (n - 1));
        CHECK(std::abs(var - expected) < band);
    }
}

TEST_CASE("momentum symmetry of odd kernels") {
    Rng rng(5);
    std::vector<double> pos(150);
    for (double& x : pos) x = rng.uniform(0.0, kTwoPi);
    AgentPopulation pop(pos, kTwoPi, 77);
    const auto before = pop.positions;
    std::vector<double> zero(150, 0.0);
    step_agents(pop, InteractionKernel::repulsive(1.0, kTwoPi / 4.0), zero, 0.01, 0.0);
    double sum = 0.0;
    for (int i = 0; i < 150; ++i)
        sum += wrap_displacement(pop.positions[static_cast<std::size_t>(i)],
                                 before[static_cast<std::size_t>(i)], kTwoPi);
    CHECK(std::abs(sum) < 1e-10);
}

TEST_CASE("initial position sampling") {
    RingGrid g(256);

    SECTION("uniform sampling passes a KS test at the 1% level") {
        const auto pop = sample_initial_positions(20000, DensityField::uniform(g), 99);
        const double d = oracles::ks_statistic_uniform(pop.positions, kTwoPi);
        CHECK(d < 1.63 / std::sqrt(20000.0));
    }
    SECTION("spike density lands every sample within one cell") {
        std::vector<double> v(256, 0.0);
        v[100] = 2.0;
        const auto pop = sample_initial_positions(500, DensityField(g, v), 7);
        for (double x : pop.positions) CHECK(std::abs(x - g.center(100)) <= g.dx());
    }
    SECTION("sampling is deterministic in the seed") {
        const auto rho =
            DensityField::from_function(g, [](double x) { return 1.0 + 0.4 * std::cos(x); });
        const auto a = sample_initial_positions(257, rho, 31);
        const auto b = sample_initial_positions(257, rho, 31);
        CHECK(a.positions == b.positions);
        CHECK_THROWS_AS(sample_initial_positions(0, rho, 1), std::invalid_argument);
    }
}

TEST_CASE("trajectories are seed-deterministic") {
    const auto rho = DensityField::from_function(RingGrid(128), [](double x) {
        return 1.0 + 0.3 * std::sin(x);
    });
    auto run = [&](std::uint64_t seed) {
        auto pop = sample_initial_positions(64, rho, seed);
        std::vector<double> zero(64, 0.0);
        for (int s = 0; s < 20; ++s)
            step_agents(pop, InteractionKernel::repulsive(1.0, 1.0), zero, 0.01, 0.2);
        return pop.positions;
    };
    CHECK(run(5) == run(5));
    CHECK(run(5) != run(6));
}
