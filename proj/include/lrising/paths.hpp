#pragma once

// Cluster-to-path extraction from a percolation trace.  From the open
// cluster of {0, x}: pick the minimal open edge-self-avoiding path gamma
// from 0 to x (minimal = shortest, then lexicographically smallest site
// sequence), group vertices into basic classes [y] (components of the open
// unit-length edges), locate breakpoints by
//     r_1 = max{ i : gamma_i in [gamma_0] },
//     r_{k+1} = max{ i > r_k : gamma_i in [gamma_{r_k + 1}] },
// and replace each stretch by the minimal basic open path alpha_k inside its
// class.  The output path is alpha_0, jump edge, alpha_1, jump edge, ...,
// alpha_{m-1}; consecutive classes are distinct and disjoint, so the result
// is self-avoiding.  Ghost edges are ignored: the extraction lives on the
// lattice part of the trace.

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "lrising/fk.hpp"
#include "lrising/graph.hpp"

namespace lrising::paths {

struct ExtractedPath {
    std::vector<int> path;             // vertex ids, 0-anchor first, x last
    std::vector<int> breakpoints;      // r_0 = 0, r_1, ..., r_m (indices into gamma)
    std::vector<int> segment_lengths;  // lambda_0 .. lambda_{m-1}
    int jump_edges = 0;                // long edges between consecutive classes

    int length() const { return static_cast<int>(path.size()) - 1; }
    long lambda_sum() const {
        long s = 0;
        for (int l : segment_lengths) s += l;
        return s;
    }
};

namespace detail {

// lexicographic order on site coordinates
inline bool site_less(const FiniteGraph& g, int a, int b) {
    const LatticeVec &xa = g.sites[a], &xb = g.sites[b];
    for (int i = 0; i < xa.d; ++i) {
        if (xa.c[i] != xb.c[i]) return xa.c[i] < xb.c[i];
    }
    return false;
}

inline bool is_unit_edge(const FiniteGraph& g, int a, int b) {
    const LatticeVec d = g.sites[a] - g.sites[b];
    int nonzero = 0;
    for (int i = 0; i < d.d; ++i) {
        if (std::abs(d.c[i]) > 1) return false;
        if (d.c[i] != 0) ++nonzero;
    }
    return nonzero == 1;
}

// minimal (shortest, then lexicographically smallest) path from a to b over
// the adjacency lists; neighbor lists must be pre-sorted by site order
inline std::vector<int> minimal_path(const std::vector<std::vector<int>>& adj,
                                     int n, int a, int b) {
    std::vector<int> dist(n, -1);
    std::vector<int> queue{b};
    dist[b] = 0;
    for (size_t qi = 0; qi < queue.size(); ++qi) {
        int u = queue[qi];
        for (int v : adj[u])
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
    }
    if (dist[a] < 0) return {};
    std::vector<int> path{a};
    int u = a;
    while (u != b) {
        // first neighbor (in site order) one step closer to b
        int next = -1;
        for (int v : adj[u])
            if (dist[v] == dist[u] - 1) {
                next = v;
                break;
            }
        path.push_back(next);
        u = next;
    }
    return path;
}

}  // namespace detail

// Extraction on the lattice part of an open-edge trace.  Throws when 0 and x
// are not connected by open lattice edges.
inline ExtractedPath extract_path(const FiniteGraph& g, const fk::PercolationConfig& trace,
                                  int origin, int x) {
    int n = g.n_sites();
    if (origin < 0 || origin >= n || x < 0 || x >= n)
        throw std::invalid_argument("extract_path: endpoints must be lattice vertices");

    // open lattice adjacency, neighbor lists in site order
    std::vector<std::vector<int>> adj(n);
    UnionFind basic(n);
    for (const auto& [a, b] : trace.open) {
        if (g.is_ghost(a) || g.is_ghost(b)) continue;
        adj[a].push_back(b);
        adj[b].push_back(a);
        if (detail::is_unit_edge(g, a, b)) basic.unite(a, b);
    }
    for (auto& lst : adj) {
        std::sort(lst.begin(), lst.end(), [&](int p, int q) { return detail::site_less(g, p, q); });
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }

    std::vector<int> gamma = detail::minimal_path(adj, n, origin, x);
    if (gamma.empty()) throw std::invalid_argument("extract_path: 0 and x are not connected");
    int last = static_cast<int>(gamma.size()) - 1;

    // basic-only adjacency for the alpha segments
    std::vector<std::vector<int>> basic_adj(n);
    for (const auto& [a, b] : trace.open) {
        if (g.is_ghost(a) || g.is_ghost(b)) continue;
        if (detail::is_unit_edge(g, a, b)) {
            basic_adj[a].push_back(b);
            basic_adj[b].push_back(a);
        }
    }
    for (auto& lst : basic_adj) {
        std::sort(lst.begin(), lst.end(), [&](int p, int q) { return detail::site_less(g, p, q); });
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }

    ExtractedPath out;
    out.breakpoints.push_back(0);
    std::vector<int> anchors;  // gamma index of each segment start
    anchors.push_back(0);
    int r = 0;
    // r_1 from the class of gamma_0, then the recursion
    while (true) {
        int anchor = anchors.back();
        int cls = basic.find(gamma[anchor]);
        int next_r = anchor;  // gamma_anchor itself is in its class
        for (int i = last; i > next_r; --i)
            if (basic.find(gamma[i]) == cls) {
                next_r = i;
                break;
            }
        out.breakpoints.push_back(next_r);
        r = next_r;
        if (r == last) break;
        anchors.push_back(r + 1);
    }

    // assemble alpha segments and jump edges
    int m = static_cast<int>(anchors.size());
    for (int k = 0; k < m; ++k) {
        int a = gamma[anchors[k]];
        int b = gamma[out.breakpoints[k + 1]];
        std::vector<int> alpha = detail::minimal_path(basic_adj, n, a, b);
        if (alpha.empty()) throw std::logic_error("extract_path: class is not basic-connected");
        out.segment_lengths.push_back(static_cast<int>(alpha.size()) - 1);
        if (k == 0) {
            out.path = alpha;
        } else {
            // jump edge from the previous breakpoint vertex to this anchor
            out.path.insert(out.path.end(), alpha.begin(), alpha.end());
            ++out.jump_edges;
        }
    }
    return out;
}

// Structural checks: endpoints, open edges only, edge self-avoidance, and
// the length bookkeeping sum(lambda) + jumps == |path|.
inline void verify_extracted(const FiniteGraph& g, const fk::PercolationConfig& trace,
                             const ExtractedPath& p, int origin, int x) {
    if (p.path.empty() || p.path.front() != origin || p.path.back() != x)
        throw std::logic_error("verify_extracted: endpoint mismatch");
    std::vector<std::pair<int, int>> seen;
    auto is_open = [&](int a, int b) {
        for (const auto& [u, v] : trace.open)
            if ((u == a && v == b) || (u == b && v == a)) return true;
        return false;
    };
    for (size_t i = 0; i + 1 < p.path.size(); ++i) {
        int a = p.path[i], b = p.path[i + 1];
        if (!is_open(a, b)) throw std::logic_error("verify_extracted: closed edge used");
        auto key = std::minmax(a, b);
        for (const auto& s : seen)
            if (s == std::pair<int, int>(key.first, key.second))
                throw std::logic_error("verify_extracted: edge reused");
        seen.push_back({key.first, key.second});
    }
    if (p.lambda_sum() + p.jump_edges != p.length())
        throw std::logic_error("verify_extracted: length bookkeeping mismatch");
}

}  // namespace lrising::paths
