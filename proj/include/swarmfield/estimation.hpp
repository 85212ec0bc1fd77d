#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "swarmfield/micro.hpp"
#include "swarmfield/ring.hpp"
#include "swarmfield/rng.hpp"

namespace swarmfield {

namespace detail {

// wrapped Gaussian bump K_h(wrap(x - x0)) sampled on the grid, three periodic
// images each side, then renormalised so its discrete mass is exactly 1
inline std::vector<double> wrapped_gaussian_bump(const RingGrid& grid, double x0, double bandwidth) {
    const int n = grid.n_cells;
    std::vector<double> bump(static_cast<std::size_t>(n), 0.0);
    const double inv_h = 1.0 / bandwidth;
    const double norm = 0.3989422804014326779399460599344 * inv_h;  // 1/(h*sqrt(2*pi))
    for (int k = 0; k < n; ++k) {
        const double z = wrap_displacement(grid.center(k), x0, grid.length);
        double acc = 0.0;
        for (int img = -3; img <= 3; ++img) {
            const double u = (z + img * grid.length) * inv_h;
            acc += std::exp(-0.5 * u * u);
        }
        bump[static_cast<std::size_t>(k)] = norm * acc;
    }
    const double m = integrate(grid, bump);
    for (double& v : bump) v /= m;
    return bump;
}

}  // namespace detail

// Per-agent density signal K_h centred at agent i; discrete mass exactly 1.
// The network average of these signals is the kernel density estimate.
inline std::vector<double> local_signal(int agent_index, const AgentPopulation& pop,
                                        const RingGrid& grid, double bandwidth) {
    detail::require(bandwidth > 0.0, "local_signal: bandwidth must be > 0");
    detail::require(agent_index >= 0 && agent_index < pop.size(), "local_signal: index out of range");
    detail::require(std::abs(grid.length - pop.length) < 1e-12, "local_signal: grid/population length mismatch");
    return detail::wrapped_gaussian_bump(grid, pop.positions[static_cast<std::size_t>(agent_index)], bandwidth);
}

// Wrapped-Gaussian KDE, defined as the exact average of the per-agent
// signals so that the distributed scheme's consensus target is the KDE.
inline DensityField kde_estimate(const AgentPopulation& pop, const RingGrid& grid, double bandwidth) {
    detail::require(bandwidth > 0.0, "kde_estimate: bandwidth must be > 0");
    detail::require(pop.size() >= 1, "kde_estimate: empty population");
    const int n = grid.n_cells;
    std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < pop.size(); ++i) {
        const std::vector<double> bump = local_signal(i, pop, grid, bandwidth);
        for (int k = 0; k < n; ++k) acc[static_cast<std::size_t>(k)] += bump[static_cast<std::size_t>(k)];
    }
    const double inv_n = 1.0 / pop.size();
    for (double& v : acc) v *= inv_n;
    return DensityField(grid, std::move(acc));
}

// Directed weighted communication topology. Strong connectivity is checked at
// construction and cached in the flag.
struct CommGraph {
    struct Edge {
        int from, to;
        double weight;
    };

    int n_nodes = 0;
    std::vector<Edge> edges;
    bool strongly_connected = false;
    std::vector<std::vector<std::pair<int, double>>> out_neighbors;  // per from-node: (to, w)

    static CommGraph from_edges(int n, std::vector<Edge> e) {
        detail::require(n >= 1, "CommGraph: n_nodes must be >= 1");
        for (const Edge& ed : e) {
            detail::require(ed.from >= 0 && ed.from < n && ed.to >= 0 && ed.to < n,
                            "CommGraph: edge endpoint out of range");
            detail::require(ed.weight > 0.0, "CommGraph: weights must be positive");
            detail::require(ed.from != ed.to, "CommGraph: self-loops not allowed");
        }
        CommGraph g;
        g.n_nodes = n;
        g.edges = std::move(e);
        g.build_adjacency();
        g.strongly_connected = g.check_strongly_connected();
        return g;
    }

    // complete graph, row sums normalised to 1
    static CommGraph complete(int n) {
        std::vector<Edge> e;
        const double w = n > 1 ? 1.0 / (n - 1) : 1.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) e.push_back({i, j, w});
        return from_edges(n, std::move(e));
    }

    // k nearest neighbours each side on a cycle, row sums normalised to 1
    static CommGraph ring_lattice(int n, int k) {
        detail::require(k >= 1 && 2 * k < n, "CommGraph::ring_lattice: need 1 <= k < n/2");
        std::vector<Edge> e;
        const double w = 1.0 / (2.0 * k);
        for (int i = 0; i < n; ++i) {
            for (int d = 1; d <= k; ++d) {
                e.push_back({i, (i + d) % n, w});
                e.push_back({i, (i - d + n) % n, w});
            }
        }
        return from_edges(n, std::move(e));
    }

    // random d-regular undirected graph via the pairing model, weights 1/d
    static CommGraph random_regular(int n, int d, std::uint64_t seed) {
        detail::require(d >= 1 && d < n, "CommGraph::random_regular: need 1 <= d < n");
        detail::require((n * d) % 2 == 0, "CommGraph::random_regular: n*d must be even");
        Rng rng(derive_seed(seed, 0x9e97));
        for (int attempt = 0; attempt < 1000; ++attempt) {
            std::vector<int> stubs;
            stubs.reserve(static_cast<std::size_t>(n) * d);
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < d; ++c) stubs.push_back(i);
            // Fisher-Yates
            for (int i = static_cast<int>(stubs.size()) - 1; i > 0; --i) {
                const int j = rng.uniform_int(0, i);
                std::swap(stubs[static_cast<std::size_t>(i)], stubs[static_cast<std::size_t>(j)]);
            }
            std::vector<std::vector<bool>> seen(static_cast<std::size_t>(n),
                                                std::vector<bool>(static_cast<std::size_t>(n), false));
            bool ok = true;
            std::vector<Edge> e;
            for (std::size_t p = 0; p + 1 < stubs.size(); p += 2) {
                const int a = stubs[p], b = stubs[p + 1];
                if (a == b || seen[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) {
                    ok = false;
                    break;
                }
                seen[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
                seen[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = true;
                e.push_back({a, b, 1.0 / d});
                e.push_back({b, a, 1.0 / d});
            }
            if (!ok) continue;
            CommGraph g = from_edges(n, std::move(e));
            if (g.strongly_connected) return g;
        }
        throw std::runtime_error("CommGraph::random_regular: failed to build a connected graph");
    }

  private:
    void build_adjacency() {
        out_neighbors.assign(static_cast<std::size_t>(n_nodes), {});
        for (const Edge& e : edges)
            out_neighbors[static_cast<std::size_t>(e.from)].push_back({e.to, e.weight});
    }

    bool check_strongly_connected() const {
        if (n_nodes == 1) return true;
        std::vector<std::vector<int>> fwd(static_cast<std::size_t>(n_nodes)),
            rev(static_cast<std::size_t>(n_nodes));
        for (const Edge& e : edges) {
            fwd[static_cast<std::size_t>(e.from)].push_back(e.to);
            rev[static_cast<std::size_t>(e.to)].push_back(e.from);
        }
        const auto reaches_all = [&](const std::vector<std::vector<int>>& adj) {
            std::vector<bool> vis(static_cast<std::size_t>(n_nodes), false);
            std::vector<int> stack{0};
            vis[0] = true;
            int count = 1;
            while (!stack.empty()) {
                const int u = stack.back();
                stack.pop_back();
                for (int v : adj[static_cast<std::size_t>(u)]) {
                    if (!vis[static_cast<std::size_t>(v)]) {
                        vis[static_cast<std::size_t>(v)] = true;
                        ++count;
                        stack.push_back(v);
                    }
                }
            }
            return count == n_nodes;
        };
        return reaches_all(fwd) && reaches_all(rev);
    }
};

// Proportional-integral dynamic average consensus over the graph, one scalar
// system per grid cell. Estimates may transiently undershoot zero; clamping
// is applied only when an estimate is read out for control use.
struct DistributedEstimator {
    RingGrid grid;
    double k_p_cons = 5.0;
    double k_i_cons = 5.0;
    std::vector<std::vector<double>> estimates;  // per node, size n_cells
    std::vector<std::vector<double>> integrals;  // per node, size n_cells

    DistributedEstimator(RingGrid g, int n_nodes, double kp, double ki)
        : grid(g), k_p_cons(kp), k_i_cons(ki) {
        detail::require(kp > 0.0 && ki > 0.0, "DistributedEstimator: gains must be > 0");
        detail::require(n_nodes >= 1, "DistributedEstimator: need at least one node");
        estimates.assign(static_cast<std::size_t>(n_nodes),
                         std::vector<double>(static_cast<std::size_t>(g.n_cells), 0.0));
        integrals = estimates;
    }

    int n_nodes() const { return static_cast<int>(estimates.size()); }

    // estimate clamped at 0, for feeding into control
    DensityField clamped_estimate(int i) const {
        std::vector<double> v = estimates[static_cast<std::size_t>(i)];
        for (double& x : v) x = std::max(x, 0.0);
        return DensityField(grid, std::move(v));
    }
};

// Synchronous PI consensus round:
//   est_i  += dt * ( -k_p * sum_j w_ij (est_i - est_j) + z_i + (signal_i - est_i) )
//   z_i    -= dt * k_i * sum_j w_ij (est_i - est_j)
inline void consensus_step(DistributedEstimator& state, const CommGraph& graph,
                           const std::vector<std::vector<double>>& signals, double dt) {
    detail::require(dt > 0.0, "consensus_step: dt must be > 0");
    detail::require(graph.strongly_connected, "consensus_step: graph must be strongly connected");
    detail::require(graph.n_nodes == state.n_nodes(), "consensus_step: node count mismatch");
    detail::require(signals.size() == static_cast<std::size_t>(state.n_nodes()),
                    "consensus_step: signals size mismatch");
    const int n_cells = state.grid.n_cells;
    const int n = state.n_nodes();
    std::vector<std::vector<double>> lap(static_cast<std::size_t>(n),
                                         std::vector<double>(static_cast<std::size_t>(n_cells), 0.0));
    for (int i = 0; i < n; ++i) {
        const auto& est_i = state.estimates[static_cast<std::size_t>(i)];
        auto& lap_i = lap[static_cast<std::size_t>(i)];
        for (const auto& [j, w] : graph.out_neighbors[static_cast<std::size_t>(i)]) {
            const auto& est_j = state.estimates[static_cast<std::size_t>(j)];
            for (int c = 0; c < n_cells; ++c)
                lap_i[static_cast<std::size_t>(c)] +=
                    w * (est_i[static_cast<std::size_t>(c)] - est_j[static_cast<std::size_t>(c)]);
        }
    }
    for (int i = 0; i < n; ++i) {
        auto& est = state.estimates[static_cast<std::size_t>(i)];
        auto& z = state.integrals[static_cast<std::size_t>(i)];
        const auto& sig = signals[static_cast<std::size_t>(i)];
        const auto& lap_i = lap[static_cast<std::size_t>(i)];
        detail::require(sig.size() == static_cast<std::size_t>(n_cells),
                        "consensus_step: signal grid mismatch");
        for (int c = 0; c < n_cells; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            est[cc] += dt * (-state.k_p_cons * lap_i[cc] + z[cc] + (sig[cc] - est[cc]));
            z[cc] -= dt * state.k_i_cons * lap_i[cc];
        }
    }
}

// per-node L2 distance to a reference field
inline std::vector<double> estimation_error(const DistributedEstimator& state,
                                            const DensityField& reference) {
    detail::require(reference.grid == state.grid, "estimation_error: grid mismatch");
    const double dx = state.grid.dx();
    std::vector<double> out(static_cast<std::size_t>(state.n_nodes()), 0.0);
    for (int i = 0; i < state.n_nodes(); ++i) {
        double acc = 0.0;
        for (int c = 0; c < state.grid.n_cells; ++c) {
            const double d = state.estimates[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] -
                             reference.values[static_cast<std::size_t>(c)];
            acc += d * d;
        }
        out[static_cast<std::size_t>(i)] = std::sqrt(acc * dx);
    }
    return out;
}

}  // namespace swarmfield
