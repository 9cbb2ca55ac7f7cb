#pragma once

// Killed random walk Green functions G(x,y) = sum over paths of prod lambda J.
// Two modes: exact sums over edge-self-avoiding paths on tiny graphs (with a
// rigorous tail bound from the all-walks dominator), and the Neumann-series
// all-walks surrogate on boxes, an upper bound for the path sum since every
// weight is nonnegative.  The diagonal includes the empty path with weight 1,
// which makes the Neumann series the exact resolvent.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lrising/coupling.hpp"
#include "lrising/graph.hpp"
#include "lrising/stats.hpp"

namespace lrising::krw {

struct SawResult {
    double value = 0.0;       // sum over edge-self-avoiding paths of length <= cap
    double tail_bound = 0.0;  // all-walks bound on the omitted longer paths
    bool tail_valid = false;  // false when the walk series does not contract
    long paths = 0;
};

namespace detail {

struct SawDfs {
    const FiniteGraph* g;
    std::vector<std::vector<std::pair<int, int>>> adj;  // (neighbor, edge id)
    std::vector<char> used;
    double lambda;
    int target, cap;
    double acc = 0.0;
    long paths = 0;

    void run(int v, int len, double w) {
        if (v == target && len > 0) {
            acc += w;
            ++paths;
        }
        if (len == cap) return;
        for (auto [u, e] : adj[v]) {
            if (used[e]) continue;
            used[e] = 1;
            run(u, len + 1, w * lambda * g->edges[e].J);
            used[e] = 0;
        }
    }
};

// row-sum contraction factor q = lambda * max_u sum_v J_uv
inline double contraction(const FiniteGraph& g, double lambda) {
    std::vector<double> row(g.n_vertices(), 0.0);
    for (const auto& e : g.edges) {
        row[e.u] += e.J;
        row[e.v] += e.J;
    }
    double m = 0;
    for (double r : row) m = std::max(m, r);
    return lambda * m;
}

}  // namespace detail

// Exact edge-self-avoiding path sum with length cap.  Vertices may repeat;
// edges may not.  Throws if the cap excludes every path between distinct
// endpoints.
inline SawResult green_saw_exact(const FiniteGraph& g, double lambda, int x, int y, int cap) {
    if (!(lambda > 0)) throw std::invalid_argument("green_saw_exact: lambda must be > 0");
    if (g.n_vertices() > 20 && cap > 12)
        throw std::invalid_argument("green_saw_exact: enumeration guard (<= 20 vertices or cap <= 12)");
    detail::SawDfs dfs;
    dfs.g = &g;
    dfs.adj.resize(g.n_vertices());
    for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
        dfs.adj[g.edges[e].u].push_back({g.edges[e].v, e});
        dfs.adj[g.edges[e].v].push_back({g.edges[e].u, e});
    }
    dfs.used.assign(g.edges.size(), 0);
    dfs.lambda = lambda;
    dfs.target = y;
    dfs.cap = cap;
    dfs.run(x, 0, 1.0);
    SawResult r;
    r.value = dfs.acc;
    r.paths = dfs.paths;
    if (x == y) {
        r.value += 1.0;  // empty path
        ++r.paths;
    }
    if (r.paths == 0) throw std::invalid_argument("green_saw_exact: cap excludes every path");

    // omitted-tail dominator: total weight of all walks x -> y longer than cap
    double q = detail::contraction(g, lambda);
    if (q < 1.0) {
        // v = M^{cap+1} delta_x, then ||sum_k M^k v||_inf <= ||v||_inf/(1-q)
        std::vector<double> v(g.n_vertices(), 0.0), w(g.n_vertices(), 0.0);
        v[x] = 1.0;
        for (int k = 0; k <= cap; ++k) {
            std::fill(w.begin(), w.end(), 0.0);
            for (const auto& e : g.edges) {
                w[e.v] += lambda * e.J * v[e.u];
                w[e.u] += lambda * e.J * v[e.v];
            }
            std::swap(v, w);
        }
        double vmax = 0;
        for (double t : v) vmax = std::max(vmax, t);
        r.tail_bound = vmax / (1.0 - q);
        r.tail_valid = true;
    } else {
        r.tail_bound = std::numeric_limits<double>::infinity();
        r.tail_valid = false;
    }
    return r;
}

struct NeumannResult {
    std::vector<double> row;  // G(x, .) over all vertices
    bool converged = false;
    bool divergent = false;
    bool contraction_certified = false;  // lambda sum_J row bound < 1
    double tail_bound = 0.0;
    int iterations = 0;
};

// All-walks Green function row by iterated kernel application
// G = sum_k (lambda J)^k delta_x, stopped when three consecutive increments
// fall below rel_tol relative to the accumulated row.
inline NeumannResult green_walk_neumann_row(const FiniteGraph& g, double lambda, int x,
                                            double rel_tol, int max_iter = 10000) {
    if (!(rel_tol > 0)) throw std::invalid_argument("green_walk_neumann_row: rel_tol must be > 0");
    int n = g.n_vertices();
    NeumannResult r;
    r.row.assign(n, 0.0);
    std::vector<double> v(n, 0.0), w(n, 0.0);
    v[x] = 1.0;
    r.row[x] = 1.0;
    double q = detail::contraction(g, lambda);
    r.contraction_certified = q < 1.0;
    int small_streak = 0;
    double prev_norm = 1.0;
    for (int k = 1; k <= max_iter; ++k) {
        std::fill(w.begin(), w.end(), 0.0);
        for (const auto& e : g.edges) {
            w[e.v] += lambda * e.J * v[e.u];
            w[e.u] += lambda * e.J * v[e.v];
        }
        std::swap(v, w);
        double norm = 0, total = 0;
        for (int i = 0; i < n; ++i) {
            r.row[i] += v[i];
            norm = std::max(norm, v[i]);
            total = std::max(total, r.row[i]);
        }
        r.iterations = k;
        if (norm <= rel_tol * std::max(total, 1e-300)) {
            if (++small_streak >= 3) {
                r.converged = true;
                r.tail_bound = r.contraction_certified
                                   ? norm * q / (1.0 - q)
                                   : std::numeric_limits<double>::infinity();
                return r;
            }
        } else {
            small_streak = 0;
        }
        if (norm > 1e12 || (norm > 1e6 && norm > prev_norm)) {
            r.divergent = true;  // iterates grow: series diverges on this graph
            return r;
        }
        prev_norm = norm;
    }
    return r;  // neither converged nor clearly divergent within max_iter
}

inline double green_walk_neumann(const FiniteGraph& g, double lambda, int x, int y,
                                 double rel_tol = 1e-10) {
    NeumannResult r = green_walk_neumann_row(g, lambda, x, rel_tol);
    if (r.divergent) return std::numeric_limits<double>::infinity();
    if (!r.converged) throw std::runtime_error("green_walk_neumann: no convergence within budget");
    return r.row[y];
}

// ---------------------------------------------------------------------------
// Saturation diagnostic: G(0, ns)/J_{ns} profile
// ---------------------------------------------------------------------------

struct RatioPoint {
    int n = 0;
    LatticeVec x;
    double G = 0.0, J = 0.0, ratio = 0.0;
};

struct RatioProfile {
    std::vector<RatioPoint> points;
    bool bounded = false;       // no upward Kendall trend at the 5% level
    double kendall_z = 0.0;
    bool contraction_certified = false;
    RealVec witness_t;          // dual vector certifying the criterion
};

// Emits (n, G(0, round(n s)), J, ratio) on the box Lambda_N.  Requires the
// explicit saturation criterion to hold for the model in direction s.
inline RatioProfile decay_ratio_profile(const CouplingModel& m, double lambda, int N,
                                        const RealVec& s, const std::vector<int>& n_range,
                                        double rel_tol = 1e-10) {
    auto crit = saturation_criterion(m, s);
    if (!crit.positive)
        throw std::invalid_argument("decay_ratio_profile: saturation criterion fails for this model");
    FiniteGraph g = make_box_graph(m, N, BoundaryCondition::Free);
    int origin = box_index(m.d, N, LatticeVec(m.d));
    NeumannResult row = green_walk_neumann_row(g, lambda, origin, rel_tol);
    if (row.divergent) throw std::runtime_error("decay_ratio_profile: Neumann series diverges");
    if (!row.converged) throw std::runtime_error("decay_ratio_profile: no convergence");
    RatioProfile out;
    out.contraction_certified = row.contraction_certified;
    out.witness_t = crit.t;
    RealVec sn = s * (1.0 / s.euclid());
    std::vector<double> ns, ratios;
    for (int n : n_range) {
        RatioPoint p;
        p.n = n;
        p.x = LatticeVec(m.d);
        for (int i = 0; i < m.d; ++i) p.x.c[i] = static_cast<int>(std::lround(n * sn.c[i]));
        int idx = box_index(m.d, N, p.x);
        if (idx < 0) throw std::invalid_argument("decay_ratio_profile: n s outside the box");
        p.G = row.row[idx];
        p.J = coupling(m, p.x);
        p.ratio = p.J > 0 ? p.G / p.J : std::numeric_limits<double>::infinity();
        out.points.push_back(p);
        ns.push_back(static_cast<double>(n));
        ratios.push_back(p.ratio);
    }
    KendallResult kt = kendall_tau(ns, ratios);
    out.kendall_z = kt.z;
    out.bounded = !kt.upward_at(0.05);
    return out;
}

}  // namespace lrising::krw
