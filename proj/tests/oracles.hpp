// Test-side reference computations, kept independent of the library paths
// they are used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <vector>

namespace oracles {

// ---------------------------------------------------------------------------
// Exact min-cost transportation by successive shortest augmenting paths on
// the bipartite supply/demand graph (uncapacitated arcs). Small instances
// only; Bellman-Ford keeps it simple and correct with real-valued costs.
// ---------------------------------------------------------------------------
inline double min_cost_transport(std::span<const double> supply, std::span<const double> demand,
                                 std::span<const double> cost /* n x m row-major */,
                                 std::vector<double>* plan_out = nullptr) {
    const int n = static_cast<int>(supply.size());
    const int m = static_cast<int>(demand.size());
    std::vector<double> a(supply.begin(), supply.end());
    std::vector<double> b(demand.begin(), demand.end());
    std::vector<double> flow(static_cast<std::size_t>(n) * m, 0.0);
    const auto c = [&](int i, int j) { return cost[static_cast<std::size_t>(i) * m + j]; };
    const auto f = [&](int i, int j) -> double& { return flow[static_cast<std::size_t>(i) * m + j]; };

    // nodes: 0..n-1 sources, n..n+m-1 sinks
    const int nodes = n + m;
    const double inf = std::numeric_limits<double>::infinity();
    double total_cost = 0.0;

    while (true) {
        int src = -1;
        for (int i = 0; i < n; ++i)
            if (a[static_cast<std::size_t>(i)] > 1e-15) {
                src = i;
                break;
            }
        if (src < 0) break;

        // residual arcs: i -> j with cost c(i,j); j -> i with -c(i,j) if f > 0.
        // Bellman-Ford from all unsatisfied sources at distance 0.
        std::vector<double> dist(static_cast<std::size_t>(nodes), inf);
        std::vector<int> prev(static_cast<std::size_t>(nodes), -1);
        for (int i = 0; i < n; ++i)
            if (a[static_cast<std::size_t>(i)] > 1e-15) dist[static_cast<std::size_t>(i)] = 0.0;
        for (int pass = 0; pass < nodes; ++pass) {
            bool changed = false;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) {
                    if (dist[static_cast<std::size_t>(i)] < inf &&
                        dist[static_cast<std::size_t>(i)] + c(i, j) <
                            dist[static_cast<std::size_t>(n + j)] - 1e-15) {
                        dist[static_cast<std::size_t>(n + j)] = dist[static_cast<std::size_t>(i)] + c(i, j);
                        prev[static_cast<std::size_t>(n + j)] = i;
                        changed = true;
                    }
                    if (f(i, j) > 1e-15 && dist[static_cast<std::size_t>(n + j)] < inf &&
                        dist[static_cast<std::size_t>(n + j)] - c(i, j) <
                            dist[static_cast<std::size_t>(i)] - 1e-15) {
                        dist[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(n + j)] - c(i, j);
                        prev[static_cast<std::size_t>(i)] = n + j;
                        changed = true;
                    }
                }
            if (!changed) break;
        }
        // cheapest reachable sink with remaining demand
        int sink = -1;
        for (int j = 0; j < m; ++j)
            if (b[static_cast<std::size_t>(j)] > 1e-15 && dist[static_cast<std::size_t>(n + j)] < inf &&
                (sink < 0 || dist[static_cast<std::size_t>(n + j)] < dist[static_cast<std::size_t>(n + sink)]))
                sink = j;
        if (sink < 0) break;  // nothing reachable (should not happen with matched masses)

        // walk back to find the bottleneck
        double push = b[static_cast<std::size_t>(sink)];
        {
            int node = n + sink;
            while (true) {
                const int p = prev[static_cast<std::size_t>(node)];
                if (node >= n) {  // arrived via forward arc p -> node
                    if (p < 0) break;
                    node = p;
                } else {  // arrived via backward arc (node, p - n), bounded by f
                    if (p < 0) {
                        push = std::min(push, a[static_cast<std::size_t>(node)]);
                        break;
                    }
                    push = std::min(push, f(node, p - n));
                    node = p;
                }
            }
        }
        // apply along the path
        {
            int node = n + sink;
            while (true) {
                const int p = prev[static_cast<std::size_t>(node)];
                if (node >= n) {
                    if (p < 0) break;
                    f(p, node - n) += push;
                    total_cost += push * c(p, node - n);
                    node = p;
                } else {
                    if (p < 0) {
                        a[static_cast<std::size_t>(node)] -= push;
                        break;
                    }
                    f(node, p - n) -= push;
                    total_cost -= push * c(node, p - n);
                    node = p;
                }
            }
            b[static_cast<std::size_t>(sink)] -= push;
        }
    }
    if (plan_out) *plan_out = flow;
    return total_cost;
}

// ---------------------------------------------------------------------------
// Simple statistics helpers
// ---------------------------------------------------------------------------
inline double ks_statistic_uniform(std::vector<double> samples, double length) {
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double fe_lo = static_cast<double>(i) / n;
        const double fe_hi = static_cast<double>(i + 1) / n;
        const double ft = samples[i] / length;
        d = std::max(d, std::max(std::abs(ft - fe_lo), std::abs(ft - fe_hi)));
    }
    return d;
}

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

// slope of a least-squares line fit
inline double fitted_slope(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// CDF inversion by bisection, for checking quantile implementations
template <class CdfFn>
inline double bisect_quantile(CdfFn&& cdf, double p, double lo, double hi, int iters = 200) {
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) >= p)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace oracles
