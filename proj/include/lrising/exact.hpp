#pragma once

// Exact brute-force computations on small graphs: Ising correlations by spin
// enumeration, the high-temperature (parity) expansion, FK-Ising event
// probabilities, and random-current event probabilities via per-edge parity
// classes.  These are the ground truth for every Monte Carlo estimator.
//
// Conventions: Hamiltonian -sum_{i<j} J sigma_i sigma_j, ghost spin fixed at
// +1 under plus boundary conditions, FK bond probability p = 1 - e^{-2 beta J}.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "lrising/graph.hpp"
#include "lrising/vec.hpp"

namespace lrising::exact {

inline constexpr int kMaxSpinVertices = 24;  // 2^V spin enumeration guard
inline constexpr int kMaxFkEdges = 24;       // 2^E FK / parity enumeration guard
inline constexpr int kMaxCurrentEdges = 15;  // 3^E current class enumeration guard

using VertexSet = std::uint32_t;  // bitmask over lattice vertices (ghost excluded)
using EdgeSet = std::uint32_t;    // bitmask over edges

inline VertexSet vset(std::initializer_list<int> vs) {
    VertexSet m = 0;
    for (int v : vs) m |= VertexSet{1} << v;
    return m;
}

// ---------------------------------------------------------------------------
// Spin enumeration
// ---------------------------------------------------------------------------

// <sigma_A> by summation over the 2^V spin configurations.  A is a bitmask
// over lattice vertices.  bc == Plus requires the ghost and fixes its spin.
inline double two_point_spin(const FiniteGraph& g, double beta, BoundaryCondition bc, VertexSet A) {
    int n = g.n_sites();
    if (n > kMaxSpinVertices) throw std::invalid_argument("two_point_spin: too many vertices");
    if (bc == BoundaryCondition::Plus && !g.has_ghost)
        throw std::invalid_argument("two_point_spin: plus bc requires a ghost vertex");
    KahanSum Z, num;
    for (std::uint32_t cfg = 0; cfg < (std::uint32_t{1} << n); ++cfg) {
        auto spin = [&](int v) -> int {
            if (g.is_ghost(v)) return +1;
            return (cfg >> v) & 1 ? +1 : -1;
        };
        double H = 0;
        for (const auto& e : g.edges) {
            if (bc == BoundaryCondition::Free && (g.is_ghost(e.u) || g.is_ghost(e.v))) continue;
            H += e.J * spin(e.u) * spin(e.v);
        }
        double w = std::exp(beta * H);
        int prod = 1;
        for (int v = 0; v < n; ++v)
            if ((A >> v) & 1) prod *= spin(v);
        Z.add(w);
        num.add(prod * w);
    }
    return num.value() / Z.value();
}

inline double two_point_spin(const FiniteGraph& g, double beta, BoundaryCondition bc, int u, int v) {
    return two_point_spin(g, beta, bc, vset({u, v}));
}

// Truncated two-point function <sigma_0; sigma_x> = Cov(sigma_0, sigma_x)
// under plus boundary conditions.
inline double truncated_two_point(const FiniteGraph& g, double beta, int u, int v) {
    if (!g.has_ghost) throw std::invalid_argument("truncated_two_point: requires plus bc (ghost)");
    if (u < 0 || v < 0 || u >= g.n_sites() || v >= g.n_sites())
        throw std::invalid_argument("truncated_two_point: vertex out of range");
    double uv = two_point_spin(g, beta, BoundaryCondition::Plus, vset({u, v}));
    double mu = two_point_spin(g, beta, BoundaryCondition::Plus, vset({u}));
    double mv = two_point_spin(g, beta, BoundaryCondition::Plus, vset({v}));
    return uv - mu * mv;
}

// ---------------------------------------------------------------------------
// Parity (high-temperature) enumeration
// ---------------------------------------------------------------------------

// <sigma_A> = sum_{eta: deg parity == A on lattice} prod tanh(beta J_e)
//           / same with A = empty.  Ghost degree parity is unconstrained
// (the ghost spin is fixed, sigma_ghost^k == 1).
inline double two_point_parity(const FiniteGraph& g, double beta, BoundaryCondition bc, VertexSet A) {
    int m = static_cast<int>(g.edges.size());
    std::vector<Edge> live;
    for (const auto& e : g.edges) {
        if (bc == BoundaryCondition::Free && (g.is_ghost(e.u) || g.is_ghost(e.v))) continue;
        live.push_back(e);
    }
    m = static_cast<int>(live.size());
    if (m > kMaxFkEdges) throw std::invalid_argument("two_point_parity: too many edges");
    if (bc == BoundaryCondition::Plus && !g.has_ghost)
        throw std::invalid_argument("two_point_parity: plus bc requires a ghost vertex");
    const VertexSet lattice_mask = (g.n_sites() >= 32) ? ~VertexSet{0}
                                                       : ((VertexSet{1} << g.n_sites()) - 1);
    KahanSum Z, num;
    for (std::uint32_t eta = 0; eta < (std::uint32_t{1} << m); ++eta) {
        double w = 1.0;
        VertexSet parity = 0;
        for (int i = 0; i < m; ++i)
            if ((eta >> i) & 1) {
                w *= std::tanh(beta * live[i].J);
                if (!g.is_ghost(live[i].u)) parity ^= VertexSet{1} << live[i].u;
                if (!g.is_ghost(live[i].v)) parity ^= VertexSet{1} << live[i].v;
            }
        parity &= lattice_mask;
        if (parity == 0) Z.add(w);
        if (parity == (A & lattice_mask)) num.add(w);
    }
    return num.value() / Z.value();
}

// ---------------------------------------------------------------------------
// FK enumeration
// ---------------------------------------------------------------------------

// Event probability under the random-cluster measure with per-edge factor
// p_e/(1-p_e) and 2^{kappa(omega)}; kappa counts components over all
// vertices including the ghost.  The event sees the open edge set.
inline double fk_event_prob(const FiniteGraph& g, double beta,
                            const std::function<bool(UnionFind&)>& event) {
    int m = static_cast<int>(g.edges.size());
    if (m > kMaxFkEdges) throw std::invalid_argument("fk_event_prob: too many edges");
    int n = g.n_vertices();
    std::vector<double> ratio(m);
    for (int i = 0; i < m; ++i) {
        double p = fk_probability(beta, g.edges[i].J);
        if (p >= 1.0) throw std::invalid_argument("fk_event_prob: p == 1 edge");
        ratio[i] = p / (1.0 - p);
    }
    KahanSum Z, num;
    UnionFind uf(n);
    for (std::uint32_t omega = 0; omega < (std::uint32_t{1} << m); ++omega) {
        double w = 1.0;
        uf.reset(n);
        for (int i = 0; i < m; ++i)
            if ((omega >> i) & 1) {
                w *= ratio[i];
                uf.unite(g.edges[i].u, g.edges[i].v);
            }
        w *= std::pow(2.0, uf.components());
        Z.add(w);
        if (event(uf)) num.add(w);
    }
    return num.value() / Z.value();
}

inline double fk_connectivity(const FiniteGraph& g, double beta, int u, int v) {
    return fk_event_prob(g, beta, [&](UnionFind& uf) { return uf.connected(u, v); });
}

// All-pairs connectivity matrix in a single 2^E sweep, optionally restricted
// to open edges inside a vertex set S (bitmask; 0 = no restriction).
inline std::vector<double> fk_all_pairs_connectivity(const FiniteGraph& g, double beta,
                                                     VertexSet S = 0) {
    int m = static_cast<int>(g.edges.size());
    if (m > kMaxFkEdges) throw std::invalid_argument("fk_all_pairs_connectivity: too many edges");
    int n = g.n_vertices();
    auto in_S = [&](int v) { return S == 0 || (!g.is_ghost(v) && ((S >> v) & 1)); };
    std::vector<double> ratio(m);
    for (int i = 0; i < m; ++i) {
        double p = fk_probability(beta, g.edges[i].J);
        ratio[i] = p / (1.0 - p);
    }
    std::vector<KahanSum> conn(static_cast<size_t>(n) * n);
    KahanSum Z;
    UnionFind uf(n), ufS(n);
    for (std::uint32_t omega = 0; omega < (std::uint32_t{1} << m); ++omega) {
        double w = 1.0;
        uf.reset(n);
        ufS.reset(n);
        for (int i = 0; i < m; ++i)
            if ((omega >> i) & 1) {
                w *= ratio[i];
                uf.unite(g.edges[i].u, g.edges[i].v);
                if (in_S(g.edges[i].u) && in_S(g.edges[i].v)) ufS.unite(g.edges[i].u, g.edges[i].v);
            }
        w *= std::pow(2.0, uf.components());
        Z.add(w);
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b)
                if (ufS.connected(a, b)) conn[static_cast<size_t>(a) * n + b].add(w);
    }
    std::vector<double> out(static_cast<size_t>(n) * n, 0.0);
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) {
            double p = conn[static_cast<size_t>(a) * n + b].value() / Z.value();
            out[static_cast<size_t>(a) * n + b] = p;
            out[static_cast<size_t>(b) * n + a] = p;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Random currents via parity classes
// ---------------------------------------------------------------------------
//
// Multiplicities are marginalized per edge into three classes
//   n_e = 0        weight 1
//   n_e even > 0   weight cosh(beta J_e) - 1
//   n_e odd        weight sinh(beta J_e)
// subject to the source constraint on lattice vertices (the ghost absorbs
// the global parity).  A 3^E sweep aggregates, for each support O (set of
// edges with n_e > 0) and each requested source set, the total weight
// W(O | A); single-current event probabilities and product (double-current)
// measures reduce to sums over these tables.

struct CurrentTables {
    std::vector<Edge> edges;          // live edges, indexed by bit position
    std::vector<double> by_support;   // W(O | A) for the requested sources
    std::vector<double> by_support0;  // W(O | empty sources)
    double Z_A = 0.0, Z_0 = 0.0;
};

namespace detail {

struct CurrentDfs {
    const std::vector<Edge>* edges;
    const FiniteGraph* g;
    VertexSet target;
    VertexSet lattice_mask;
    std::vector<double>* tab_A;
    std::vector<double>* tab_0;
    std::vector<double> w_even, w_odd;

    void run(int i, EdgeSet support, VertexSet parity, double w) {
        if (i == static_cast<int>(edges->size())) {
            parity &= lattice_mask;
            if (parity == 0) (*tab_0)[support] += w;
            if (parity == target) (*tab_A)[support] += w;
            return;
        }
        const Edge& e = (*edges)[i];
        VertexSet flip = 0;
        if (!g->is_ghost(e.u)) flip ^= VertexSet{1} << e.u;
        if (!g->is_ghost(e.v)) flip ^= VertexSet{1} << e.v;
        run(i + 1, support, parity, w);  // n_e = 0
        EdgeSet s2 = support | (EdgeSet{1} << i);
        if (w_even[i] > 0) run(i + 1, s2, parity, w * w_even[i]);  // even positive
        run(i + 1, s2, parity ^ flip, w * w_odd[i]);               // odd
    }
};

}  // namespace detail

// Build the per-support weight tables for sources A (bitmask over lattice
// vertices).  |A| odd requires a ghost to absorb the parity.
inline CurrentTables current_tables(const FiniteGraph& g, double beta, VertexSet A) {
    CurrentTables t;
    t.edges = g.edges;
    int m = static_cast<int>(t.edges.size());
    if (m > kMaxCurrentEdges) throw std::invalid_argument("current_tables: too many edges");
    int popA = 0;
    for (int v = 0; v < g.n_sites(); ++v)
        if ((A >> v) & 1) ++popA;
    if (popA % 2 == 1 && !g.has_ghost)
        throw std::invalid_argument("current_tables: odd source set without ghost is infeasible");
    t.by_support.assign(size_t{1} << m, 0.0);
    t.by_support0.assign(size_t{1} << m, 0.0);
    detail::CurrentDfs dfs;
    dfs.edges = &t.edges;
    dfs.g = &g;
    dfs.lattice_mask = (g.n_sites() >= 32) ? ~VertexSet{0} : ((VertexSet{1} << g.n_sites()) - 1);
    dfs.target = A & dfs.lattice_mask;
    dfs.tab_A = &t.by_support;
    dfs.tab_0 = &t.by_support0;
    dfs.w_even.resize(m);
    dfs.w_odd.resize(m);
    for (int i = 0; i < m; ++i) {
        double bj = beta * t.edges[i].J;
        dfs.w_even[i] = std::cosh(bj) - 1.0;
        dfs.w_odd[i] = std::sinh(bj);
    }
    dfs.run(0, 0, 0, 1.0);
    for (double w : t.by_support) t.Z_A += w;
    for (double w : t.by_support0) t.Z_0 += w;
    if (t.Z_A <= 0) throw std::invalid_argument("current_tables: infeasible source set");
    return t;
}

// P^A[event on the open edge set {e : n_e > 0}] for a single current.
inline double current_event_prob(const FiniteGraph& g, double beta, VertexSet A,
                                 const std::function<bool(EdgeSet)>& event) {
    CurrentTables t = current_tables(g, beta, A);
    int m = static_cast<int>(t.edges.size());
    KahanSum num;
    for (EdgeSet O = 0; O < (EdgeSet{1} << m); ++O)
        if (event(O)) num.add(t.by_support[O]);
    return num.value() / t.Z_A;
}

// P^{empty, A}[event on the union trace] for the double current (product of
// an unsourced and an A-sourced current).  The union-support weights are
// formed by a zeta transform / pointwise product / Moebius inversion.
inline double double_current_event_prob(const FiniteGraph& g, double beta, VertexSet A,
                                        const std::function<bool(EdgeSet)>& event) {
    CurrentTables t = current_tables(g, beta, A);
    int m = static_cast<int>(t.edges.size());
    size_t M = size_t{1} << m;
    std::vector<double> za(t.by_support), z0(t.by_support0);
    // subset-sum (zeta) transforms
    for (int i = 0; i < m; ++i)
        for (size_t O = 0; O < M; ++O)
            if ((O >> i) & 1) {
                za[O] += za[O ^ (size_t{1} << i)];
                z0[O] += z0[O ^ (size_t{1} << i)];
            }
    std::vector<double> prod(M);
    for (size_t O = 0; O < M; ++O) prod[O] = za[O] * z0[O];
    // Moebius inversion recovers sum over pairs with union exactly O
    for (int i = 0; i < m; ++i)
        for (size_t O = 0; O < M; ++O)
            if ((O >> i) & 1) prod[O] -= prod[O ^ (size_t{1} << i)];
    KahanSum num;
    for (EdgeSet O = 0; O < M; ++O)
        if (event(O)) num.add(prod[O]);
    return num.value() / (t.Z_A * t.Z_0);
}

// Connectivity predicate over an open edge set, reusable in current events.
inline bool open_set_connects(const FiniteGraph& g, EdgeSet O, int a, int b) {
    UnionFind uf(g.n_vertices());
    for (int i = 0; i < static_cast<int>(g.edges.size()); ++i)
        if ((O >> i) & 1) uf.unite(g.edges[i].u, g.edges[i].v);
    return uf.connected(a, b);
}

// P^{empty,{u,v}}[u not connected to ghost] -- the factor in the
// truncated-two-point identity.
inline double disconnection_prob(const FiniteGraph& g, double beta, int u, int v, bool double_current) {
    if (!g.has_ghost) throw std::invalid_argument("disconnection_prob: requires ghost");
    auto ev = [&](EdgeSet O) { return !open_set_connects(g, O, u, g.ghost()); };
    if (double_current) return double_current_event_prob(g, beta, vset({u, v}), ev);
    return current_event_prob(g, beta, vset({u, v}), ev);
}

// Exact marginal distribution of the parity class of one edge under P^A:
// returns {P[n_e = 0], P[n_e even > 0], P[n_e odd]}.
inline std::array<double, 3> current_class_marginal(const FiniteGraph& g, double beta, VertexSet A,
                                                    int edge_index) {
    CurrentTables t = current_tables(g, beta, A);
    int m = static_cast<int>(t.edges.size());
    if (edge_index < 0 || edge_index >= m) throw std::invalid_argument("edge index out of range");
    // rebuild with per-class accumulation for the chosen edge
    double bj = beta * t.edges[edge_index].J;
    double we = std::cosh(bj) - 1.0, wo = std::sinh(bj);
    // zero and even-positive classes share the support tables: P[zero] over
    // supports without the edge; even/odd split needs a dedicated sweep.
    std::array<KahanSum, 3> acc;
    std::function<void(int, VertexSet, double, int)> rec = [&](int i, VertexSet parity, double w, int cls) {
        if (i == m) {
            VertexSet mask = (g.n_sites() >= 32) ? ~VertexSet{0} : ((VertexSet{1} << g.n_sites()) - 1);
            if ((parity & mask) == (A & mask)) acc[cls].add(w);
            return;
        }
        const Edge& e = t.edges[i];
        VertexSet flip = 0;
        if (!g.is_ghost(e.u)) flip ^= VertexSet{1} << e.u;
        if (!g.is_ghost(e.v)) flip ^= VertexSet{1} << e.v;
        double bje = beta * e.J;
        double ev = std::cosh(bje) - 1.0, od = std::sinh(bje);
        if (i == edge_index) {
            rec(i + 1, parity, w, 0);
            if (we > 0) rec(i + 1, parity, w * we, 1);
            rec(i + 1, parity ^ flip, w * wo, 2);
        } else {
            rec(i + 1, parity, w, cls);
            if (ev > 0) rec(i + 1, parity, w * ev, cls);
            rec(i + 1, parity ^ flip, w * od, cls);
        }
    };
    rec(0, 0, 1.0, 0);
    double Z = acc[0].value() + acc[1].value() + acc[2].value();
    return {acc[0].value() / Z, acc[1].value() / Z, acc[2].value() / Z};
}

// ---------------------------------------------------------------------------
// Simon-Lieb inequality residual
// ---------------------------------------------------------------------------

// RHS - LHS of
//   Phi(u <-> v) <= sum_{x in S} sum_{y not in S} Phi(u <-> x in S) beta J_{x,y} Phi(y <-> v)
// on the finite graph g; must be >= -1e-10.  S is a vertex bitmask with
// u in S and v not in S.
inline double simon_lieb_residual(const FiniteGraph& g, double beta, VertexSet S, int u, int v) {
    int n = g.n_sites();
    if (!((S >> u) & 1)) throw std::invalid_argument("simon_lieb_residual: u must lie in S");
    if ((S >> v) & 1) throw std::invalid_argument("simon_lieb_residual: v must lie outside S");
    bool has_outside = false;
    for (int y = 0; y < n; ++y)
        if (!((S >> y) & 1)) has_outside = true;
    if (!has_outside) throw std::invalid_argument("simon_lieb_residual: S covers the whole graph");

    std::vector<double> full = fk_all_pairs_connectivity(g, beta);
    std::vector<double> inS = fk_all_pairs_connectivity(g, beta, S);
    std::vector<double> Jm = g.coupling_matrix();
    int nv = g.n_vertices();
    double lhs = full[static_cast<size_t>(u) * nv + v];
    KahanSum rhs;
    for (int x = 0; x < n; ++x) {
        if (!((S >> x) & 1)) continue;
        for (int y = 0; y < n; ++y) {
            if ((S >> y) & 1) continue;
            double J = Jm[static_cast<size_t>(x) * nv + y];
            if (J <= 0) continue;
            rhs.add(inS[static_cast<size_t>(u) * nv + x] * beta * J * full[static_cast<size_t>(y) * nv + v]);
        }
    }
    return rhs.value() - lhs;
}

}  // namespace lrising::exact
