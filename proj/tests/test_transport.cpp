#include <catch2/catch.hpp>

#include <cmath>

#include "oracles.hpp"
#include "swarmfield/control.hpp"
#include "swarmfield/metrics.hpp"
#include "swarmfield/pde.hpp"
#include "swarmfield/rng.hpp"
#include "swarmfield/transport.hpp"

using namespace swarmfield;

namespace {

DensityField random_density(const RingGrid& g, Rng& rng, double floor = 0.05) {
    std::vector<double> v(static_cast<std::size_t>(g.n_cells));
    for (double& x : v) x = floor + rng.uniform();
    DensityField rho(g, std::move(v));
    rho.scale_to_mass(1.0);
    return rho;
}

// wrapped and interval squared-distance cost matrices between cell centers
std::vector<double> interval_cost(const RingGrid& g) {
    const int n = g.n_cells;
    std::vector<double> c(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double d = g.center(i) - g.center(j);
            c[static_cast<std::size_t>(i) * n + j] = d * d;
        }
    return c;
}

std::vector<double> circular_cost(const RingGrid& g) {
    const int n = g.n_cells;
    std::vector<double> c(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double d = wrap_displacement(g.center(i), g.center(j), g.length);
            c[static_cast<std::size_t>(i) * n + j] = d * d;
        }
    return c;
}

std::vector<double> cell_masses(const DensityField& rho) {
    std::vector<double> m(rho.values.size());
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = rho.values[k] * rho.grid.dx();
    return m;
}

}  // namespace

TEST_CASE("interval optimal map") {
    RingGrid g(64);

    SECTION("identity on matched marginals") {
        Rng rng(1);
        const auto rho = random_density(g, rng);
        const auto map = ot_map_1d(rho, rho);
        for (int k = 0; k < g.n_cells; ++k)
            CHECK(map.map_values[static_cast<std::size_t>(k)] ==
                  Approx(g.center(k)).margin(1e-9));
        CHECK(map.cost < 1e-12);
    }
    SECTION("map is monotone nondecreasing") {
        Rng rng(2);
        const auto rho = random_density(g, rng);
        const auto rho_d = random_density(g, rng);
        const auto map = ot_map_1d(rho, rho_d);
        for (std::size_t k = 1; k < map.map_values.size(); ++k)
            CHECK(map.map_values[k] >= map.map_values[k - 1] - 1e-12);
    }
    SECTION("push-forward matches the target in CDF") {
        Rng rng(3);
        const auto rho = random_density(g, rng);
        const auto rho_d = random_density(g, rng);
        const auto map = ot_map_1d(rho, rho_d);
        const auto F_rho = cdf_and_quantile(rho);
        const auto F_tgt = cdf_and_quantile(rho_d);
        for (int k = 0; k < g.n_cells; ++k) {
            const double x = g.center(k);
            CHECK(std::abs(F_tgt.cdf(map.map_values[static_cast<std::size_t>(k)]) - F_rho.cdf(x)) <=
                  1.0 / g.n_cells + 1e-9);
        }
    }
    SECTION("mass mismatch is rejected") {
        Rng rng(4);
        auto rho = random_density(g, rng);
        auto rho_d = random_density(g, rng);
        rho_d.scale_to_mass(1.5);
        CHECK_THROWS_AS(ot_map_1d(rho, rho_d), std::invalid_argument);
    }
    SECTION("uniform to a stretched uniform is the affine map 2x") {
        const auto src = DensityField::uniform(RingGrid(8, 1.0));
        const auto dst = DensityField::uniform(RingGrid(16, 2.0));
        const auto map = ot_map_1d(src, dst);
        for (int k = 0; k < 8; ++k)
            CHECK(map.map_values[static_cast<std::size_t>(k)] ==
                  Approx(2.0 * src.grid.center(k)).margin(1e-12));
    }
}

TEST_CASE("interval map cost equals the LP optimum on small instances") {
    Rng rng(5);
    for (int n : {4, 6, 8}) {
        RingGrid g(n, 2.0);
        for (int rep = 0; rep < 4; ++rep) {
            const auto rho = random_density(g, rng, 0.1);
            const auto rho_d = random_density(g, rng, 0.1);
            const auto map = ot_map_1d(rho, rho_d);
            const double lp =
                oracles::min_cost_transport(cell_masses(rho), cell_masses(rho_d), interval_cost(g));
            CHECK(map.cost == Approx(lp).margin(1e-6));
        }
    }
}

TEST_CASE("circular optimal map") {
    RingGrid g(64);

    SECTION("identity on matched marginals") {
        Rng rng(6);
        const auto rho = random_density(g, rng);
        const auto map = ot_map_circle(rho, rho);
        CHECK(map.cost < 1e-10);
        for (int k = 0; k < g.n_cells; ++k)
            CHECK(std::abs(map.map_values[static_cast<std::size_t>(k)] - g.center(k)) < 1e-6);
    }

    SECTION("rotating a spike moves it the short way with cost s^2 m") {
        std::vector<double> v(64, 0.0);
        v[10] = 2.0;
        const DensityField rho(g, v);
        const int shift_cells = 20;  // s = 20 dx < L/2
        std::vector<double> w(64, 0.0);
        w[30] = 2.0;
        const DensityField rho_d(g, w);
        const auto map = ot_map_circle(rho, rho_d);
        const double s = shift_cells * g.dx();
        CHECK(map.cost == Approx(s * s * rho.mass).epsilon(1e-6));
        CHECK(map.map_values[10] - g.center(10) == Approx(s).margin(1e-6));
    }

    SECTION("cost never exceeds the interval map at any fixed cut") {
        Rng rng(7);
        for (int rep = 0; rep < 5; ++rep) {
            const auto rho = random_density(g, rng);
            const auto rho_d = random_density(g, rng);
            const auto circle = ot_map_circle(rho, rho_d);
            const auto interval = ot_map_1d(rho, rho_d);
            CHECK(circle.cost <= interval.cost + 1e-9);
        }
    }

    SECTION("circular map cost equals exhaustive LP with wrapped cost") {
        Rng rng(8);
        for (int n : {4, 6, 8}) {
            RingGrid gg(n, 2.0);
            for (int rep = 0; rep < 4; ++rep) {
                const auto rho = random_density(gg, rng, 0.1);
                const auto rho_d = random_density(gg, rng, 0.1);
                const auto map = ot_map_circle(rho, rho_d);
                const double lp = oracles::min_cost_transport(cell_masses(rho), cell_masses(rho_d),
                                                              circular_cost(gg));
                CHECK(map.cost == Approx(lp).margin(1e-6));
            }
        }
    }

    SECTION("translation equivariance on the circle") {
        RingGrid gg(64);
        Rng rng(9);
        std::vector<double> a(64), b(64);
        for (double& x : a) x = 0.1 + rng.uniform();
        for (double& x : b) x = 0.1 + rng.uniform();
        const int shift = 13;
        std::vector<double> ar(64), br(64);
        for (int k = 0; k < 64; ++k) {
            ar[static_cast<std::size_t>((k + shift) % 64)] = a[static_cast<std::size_t>(k)];
            br[static_cast<std::size_t>((k + shift) % 64)] = b[static_cast<std::size_t>(k)];
        }
        DensityField rho(gg, a), rho_d(gg, b), rho_r(gg, ar), rho_dr(gg, br);
        rho.scale_to_mass(1.0);
        rho_d.scale_to_mass(1.0);
        rho_r.scale_to_mass(1.0);
        rho_dr.scale_to_mass(1.0);
        const auto m0 = ot_map_circle(rho, rho_d);
        const auto m1 = ot_map_circle(rho_r, rho_dr);
        CHECK(m1.cost == Approx(m0.cost).margin(1e-9));
        const double s = shift * gg.dx();
        for (int k = 0; k < 64; ++k) {
            const int kr = (k + shift) % 64;
            const double displaced = m0.map_values[static_cast<std::size_t>(k)] + s;
            const double got = m1.map_values[static_cast<std::size_t>(kr)];
            CHECK(wrap_displacement(got, displaced, gg.length) == Approx(0.0).margin(1e-7));
        }
    }
}

TEST_CASE("sinkhorn plans") {
    SECTION("off-diagonal mass vanishes as epsilon decreases on matched marginals") {
        const int n = 6;
        std::vector<double> marg(n, 1.0 / n);
        RingGrid g(n, 1.0);
        const auto cost = interval_cost(g);
        double prev = 1e9;
        for (double eps : {0.1, 0.01, 0.001}) {
            const auto plan = sinkhorn_plan(marg, marg, cost, eps, 50000, 1e-10);
            CHECK(plan.converged);
            double off = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (i != j) off += plan(i, j);
            CHECK(off < prev);
            prev = off;
        }
        CHECK(prev < 1e-6);
    }

    SECTION("marginal violation respects the tolerance") {
        Rng rng(10);
        RingGrid g(5, 1.0);
        const auto rho = random_density(g, rng, 0.2);
        const auto rho_d = random_density(g, rng, 0.2);
        const auto plan = sinkhorn_plan(cell_masses(rho), cell_masses(rho_d), interval_cost(g),
                                        0.01, 50000, 1e-9);
        CHECK(plan.converged);
        CHECK(plan.marginal_violation <= 1e-9);
        // row and column sums reproduce the marginals
        const auto a = cell_masses(rho);
        const auto b = cell_masses(rho_d);
        for (int i = 0; i < 5; ++i) {
            double row = 0.0;
            for (int j = 0; j < 5; ++j) row += plan(i, j);
            CHECK(row == Approx(a[static_cast<std::size_t>(i)]).margin(1e-8));
        }
        for (int j = 0; j < 5; ++j) {
            double col = 0.0;
            for (int i = 0; i < 5; ++i) col += plan(i, j);
            CHECK(col == Approx(b[static_cast<std::size_t>(j)]).margin(1e-8));
        }
    }

    SECTION("5x5 plans approach the LP cost at small epsilon") {
        Rng rng(11);
        RingGrid g(5, 1.0);
        for (int rep = 0; rep < 3; ++rep) {
            const auto rho = random_density(g, rng, 0.2);
            const auto rho_d = random_density(g, rng, 0.2);
            const auto cost = interval_cost(g);
            const auto a = cell_masses(rho);
            const auto b = cell_masses(rho_d);
            const auto plan = sinkhorn_plan(a, b, cost, 0.001, 200000, 1e-10);
            const double lp = oracles::min_cost_transport(a, b, cost);
            CHECK(plan.transport_cost(cost) == Approx(lp).epsilon(0.02));
        }
    }

    SECTION("non-convergence is flagged") {
        std::vector<double> a{0.9, 0.1};
        std::vector<double> b{0.1, 0.9};
        std::vector<double> cost{0.0, 1.0, 1.0, 0.0};
        const auto plan = sinkhorn_plan(a, b, cost, 0.001, 2, 1e-14);
        CHECK_FALSE(plan.converged);
        CHECK(plan.iterations == 2);
    }

    SECTION("input validation") {
        std::vector<double> marg{0.5, 0.5};
        std::vector<double> bad{0.5, -0.1};
        std::vector<double> cost{0.0, 1.0, 1.0, 0.0};
        CHECK_THROWS_AS(sinkhorn_plan(marg, bad, cost, 0.01), std::invalid_argument);
        CHECK_THROWS_AS(sinkhorn_plan(marg, marg, cost, 0.0), std::invalid_argument);
    }
}

TEST_CASE("ot velocity field") {
    RingGrid g(128);

    SECTION("matched densities give a zero field") {
        Rng rng(12);
        const auto rho = random_density(g, rng);
        const auto u = ot_velocity_field(rho, rho, 0.1);
        for (double v : u.values) CHECK(std::abs(v) < 1e-5);
    }

    SECTION("translated spike target gives a constant field") {
        std::vector<double> v(128, 0.0), w(128, 0.0);
        v[20] = 3.0;
        w[52] = 3.0;
        const DensityField rho(g, v), rho_d(g, w);
        const double s = 32 * g.dx();
        const auto u = ot_velocity_field(rho, rho_d, 0.5);
        // only the source cell's velocity transports mass; it must be s/dt
        CHECK(u.values[20] == Approx(s / 0.5).margin(1e-4));
    }

    SECTION("one transport step shrinks the Wasserstein distance") {
        Rng rng(13);
        for (int rep = 0; rep < 3; ++rep) {
            const auto rho = random_density(g, rng);
            const auto rho_d = random_density(g, rng);
            const double dt = 0.05;
            const auto u = ot_velocity_field(rho, rho_d, 0.2);
            const double before = w1_circular(rho, rho_d);
            // CFL-admissible substepping of the one replan interval
            DensityField cur = rho;
            const double dt_cfl = 0.9 * cfl_admissible_dt(g, u.values, 0.0);
            int sub = static_cast<int>(std::ceil(dt / dt_cfl));
            for (int s = 0; s < sub; ++s)
                cur = step_conservation(cur, AdvectionDiffusionSpec(u.values, 0.0), dt / sub);
            const double after = w1_circular(cur, rho_d);
            CHECK(after < before);
        }
    }

    SECTION("ot velocity spends no more kinetic energy than flux recovery") {
        Rng rng(14);
        for (int rep = 0; rep < 5; ++rep) {
            const auto rho = random_density(g, rng);
            const auto rho_d = random_density(g, rng);
            const double dt = 0.1;
            const auto u_ot = ot_velocity_field(rho, rho_d, dt);
            // naive identity-plus-correction field from the continuity residual
            std::vector<double> q(static_cast<std::size_t>(g.n_cells));
            for (int k = 0; k < g.n_cells; ++k)
                q[static_cast<std::size_t>(k)] = (rho_d.values[static_cast<std::size_t>(k)] -
                                                  rho.values[static_cast<std::size_t>(k)]) /
                                                 dt;
            const auto u_naive = recover_velocity(rho, q, 1e-4);
            double ke_ot = 0.0, ke_naive = 0.0;
            for (int k = 0; k < g.n_cells; ++k) {
                const auto kk = static_cast<std::size_t>(k);
                ke_ot += rho.values[kk] * u_ot.values[kk] * u_ot.values[kk];
                ke_naive += rho.values[kk] * u_naive.values[kk] * u_naive.values[kk];
            }
            CHECK(ke_ot <= ke_naive + 1e-9);
        }
    }
}

TEST_CASE("push-forward histogram matches the target") {
    // 32 cells keep the multinomial noise floor of 1e5 samples well under
    // the asserted L1 budget
    RingGrid g(32);
    Rng rng(15);
    const auto rho = random_density(g, rng);
    const auto rho_d = random_density(g, rng);
    const auto map = ot_map_circle(rho, rho_d);
    const auto cq = cdf_and_quantile(rho);
    const auto tgt_cq = cdf_and_quantile(rho_d);

    Rng sampler(99);
    std::vector<double> counts(32, 0.0);
    const int n_samples = 100000;
    for (int s = 0; s < n_samples; ++s) {
        const double x = cq.quantile(sampler.uniform());
        // transport the sample with the map (interpolating in CDF space)
        const double y = wrap_position(tgt_cq.quantile_ext(cq.cdf(x) - map.shift), g.length);
        counts[static_cast<std::size_t>(g.cell_of(y))] += 1.0;
    }
    double l1 = 0.0;
    for (int k = 0; k < 32; ++k) {
        const double density = counts[static_cast<std::size_t>(k)] / n_samples / g.dx();
        l1 += std::abs(density - rho_d.values[static_cast<std::size_t>(k)]) * g.dx();
    }
    CHECK(l1 <= 0.02);
}
