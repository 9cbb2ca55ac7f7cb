#pragma once

// Weighted finite graphs over lattice points, with an optional ghost vertex
// encoding + boundary conditions (J_{x,ghost} = sum of couplings from x to
// the complement of the box, truncated at a stated outer radius).

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrising/coupling.hpp"
#include "lrising/vec.hpp"

namespace lrising {

struct Edge {
    int u = 0, v = 0;
    double J = 0.0;
};

enum class BoundaryCondition { Free, Plus };

struct FiniteGraph {
    int dim = 1;
    std::vector<LatticeVec> sites;  // lattice coordinates per vertex
    bool has_ghost = false;         // ghost vertex index == sites.size()
    std::vector<Edge> edges;        // J symmetric, no self loops; ghost edges use v == ghost()

    int n_sites() const { return static_cast<int>(sites.size()); }
    int n_vertices() const { return n_sites() + (has_ghost ? 1 : 0); }
    int ghost() const { return n_sites(); }
    bool is_ghost(int v) const { return has_ghost && v == ghost(); }

    void add_edge(int u, int v, double J) {
        if (u == v) throw std::invalid_argument("FiniteGraph: self loop");
        if (u < 0 || v < 0 || u >= n_vertices() || v >= n_vertices())
            throw std::invalid_argument("FiniteGraph: vertex out of range");
        if (J < 0) throw std::invalid_argument("FiniteGraph: negative coupling");
        if (J > 0) edges.push_back(Edge{u, v, J});
    }

    int find_site(const LatticeVec& x) const {
        for (int i = 0; i < n_sites(); ++i)
            if (sites[i] == x) return i;
        return -1;
    }

    // Dense coupling lookup (adjacency matrix), built on demand by callers
    // that need J(u,v) in O(1).
    std::vector<double> coupling_matrix() const {
        int n = n_vertices();
        std::vector<double> J(static_cast<size_t>(n) * n, 0.0);
        for (const auto& e : edges) {
            J[static_cast<size_t>(e.u) * n + e.v] += e.J;
            J[static_cast<size_t>(e.v) * n + e.u] += e.J;
        }
        return J;
    }
};

// Box graph on Lambda_N = {-N..N}^d with all pairwise couplings from the
// model (no cutoff inside the box).  Plus boundary conditions add the ghost
// with truncated tail couplings.
struct BoxGraphOptions {
    int outer_radius_factor = 8;  // ghost tail truncated at 8N
};

inline int box_side(int N) { return 2 * N + 1; }

inline long box_volume(int d, int N) {
    long v = 1;
    for (int i = 0; i < d; ++i) v *= box_side(N);
    return v;
}

// Vertex indexing: row-major over coordinates in [-N, N]^d.
inline int box_index(int d, int N, const LatticeVec& x) {
    int idx = 0;
    for (int i = d - 1; i >= 0; --i) {
        if (x.c[i] < -N || x.c[i] > N) return -1;
        idx = idx * box_side(N) + (x.c[i] + N);
    }
    return idx;
}

inline LatticeVec box_point(int d, int N, int idx) {
    LatticeVec x(d);
    for (int i = 0; i < d; ++i) {
        x.c[i] = idx % box_side(N) - N;
        idx /= box_side(N);
    }
    return x;
}

inline FiniteGraph make_box_graph(const CouplingModel& m, int N, BoundaryCondition bc,
                                  BoxGraphOptions opt = {}) {
    m.validate();
    FiniteGraph g;
    g.dim = m.d;
    long vol = box_volume(m.d, N);
    if (vol > 2500) throw std::invalid_argument("make_box_graph: box too large for explicit edges");
    g.sites.reserve(vol);
    for (long i = 0; i < vol; ++i) g.sites.push_back(box_point(m.d, N, static_cast<int>(i)));
    for (int u = 0; u < g.n_sites(); ++u)
        for (int v = u + 1; v < g.n_sites(); ++v) {
            double J = coupling(m, g.sites[v] - g.sites[u]);
            if (J > 0) g.edges.push_back(Edge{u, v, J});
        }
    if (bc == BoundaryCondition::Plus) {
        g.has_ghost = true;
        // tail sums only depend on the site coordinates; sites form the box
        int R = opt.outer_radius_factor * std::max(N, 1);
        for (int u = 0; u < g.n_sites(); ++u) {
            const LatticeVec& x = g.sites[u];
            KahanSum s;
            for (int r = 1; r <= R; ++r) {
                double shell_max = 0.0;
                detail::for_each_linf_shell(m.d, r, [&](const LatticeVec& dx) {
                    double J = coupling(m, dx);
                    shell_max = std::max(shell_max, J);
                    if (J <= 0) return;
                    LatticeVec y = x + dx;
                    if (box_index(m.d, N, y) < 0) s.add(J);
                });
                if (shell_max < 1e-30 && r > 1) break;  // tail below 1e-30 per term
            }
            if (s.value() > 0) g.edges.push_back(Edge{u, g.ghost(), s.value()});
        }
    }
    return g;
}

// Nearest-neighbour chain 0..L-1 on Z with couplings from the model;
// optional ghost per the plus boundary condition.
inline FiniteGraph make_chain_graph(const CouplingModel& m, int L, BoundaryCondition bc,
                                    int outer_radius = 0) {
    if (m.d != 1) throw std::invalid_argument("make_chain_graph: model must be one-dimensional");
    FiniteGraph g;
    g.dim = 1;
    for (int i = 0; i < L; ++i) g.sites.push_back(LatticeVec{i});
    double J1 = coupling(m, LatticeVec{1});
    for (int i = 0; i + 1 < L; ++i) g.edges.push_back(Edge{i, i + 1, J1});
    if (bc == BoundaryCondition::Plus) {
        g.has_ghost = true;
        int R = outer_radius > 0 ? outer_radius : 8 * L;
        for (int i = 0; i < L; ++i) {
            KahanSum s;
            for (int r = 1; r <= R; ++r) {
                double Jl = coupling(m, LatticeVec{-r});
                double Jr = coupling(m, LatticeVec{r});
                if (i - r < 0) s.add(Jl);
                if (i + r >= L) s.add(Jr);
                if (std::max(Jl, Jr) < 1e-30) break;
            }
            if (s.value() > 0) g.edges.push_back(Edge{i, g.ghost(), s.value()});
        }
    }
    return g;
}

// Edge-list text format: one "u v J" per line, ghost as the literal G.
// Vertices are integer ids; site coordinates default to (id) on Z.
inline FiniteGraph read_edge_list(std::istream& in) {
    FiniteGraph g;
    g.dim = 1;
    struct Raw {
        std::string u, v;
        double J;
    };
    std::vector<Raw> raw;
    int max_id = -1;
    bool ghost = false;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        Raw r;
        if (!(ls >> r.u >> r.v >> r.J)) {
            if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
            throw std::invalid_argument("read_edge_list: malformed line: " + line);
        }
        for (const std::string& s : {r.u, r.v}) {
            if (s == "G") {
                ghost = true;
            } else {
                int id = std::stoi(s);
                if (id < 0) throw std::invalid_argument("read_edge_list: negative vertex id");
                max_id = std::max(max_id, id);
            }
        }
        raw.push_back(r);
    }
    for (int i = 0; i <= max_id; ++i) g.sites.push_back(LatticeVec{i});
    g.has_ghost = ghost;
    for (const auto& r : raw) {
        int u = (r.u == "G") ? g.ghost() : std::stoi(r.u);
        int v = (r.v == "G") ? g.ghost() : std::stoi(r.v);
        g.add_edge(u, v, r.J);
    }
    return g;
}

inline FiniteGraph read_edge_list_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_edge_list_file: cannot open " + path);
    return read_edge_list(in);
}

inline void write_edge_list(std::ostream& out, const FiniteGraph& g) {
    for (const auto& e : g.edges) {
        auto name = [&](int v) { return g.is_ghost(v) ? std::string("G") : std::to_string(v); };
        out << name(e.u) << ' ' << name(e.v) << ' ' << e.J << '\n';
    }
}

// Disjoint-set union over vertex ids; the connectivity cache shared by FK
// samples and current projections.
struct UnionFind {
    std::vector<int> parent, rank_;

    explicit UnionFind(int n = 0) { reset(n); }
    void reset(int n) {
        parent.resize(n);
        rank_.assign(n, 0);
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
        return true;
    }
    bool connected(int a, int b) { return find(a) == find(b); }
    int components() {
        int c = 0;
        for (int i = 0; i < static_cast<int>(parent.size()); ++i)
            if (find(i) == i) ++c;
        return c;
    }
};

}  // namespace lrising
