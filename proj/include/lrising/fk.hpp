#pragma once

// Long-range FK-Ising Monte Carlo on boxes Lambda_N and on explicit finite
// graphs.  The chain alternates the two conditional resamplings of the
// Edwards-Sokal coupling, so the bond marginal is stationary for the
// random-cluster measure:
//   spins | bonds:  every cluster gets a fair +-1 (the ghost cluster is +),
//   bonds | spins:  each edge with agreeing endpoints opens independently
//                   with p_e = 1 - e^{-2 beta J_e}.
// On boxes the bond step is extensive: per displacement class, open
// proposals are drawn by geometric skipping over the candidate slots, and a
// proposal opens iff the endpoint spins agree.  Expected cost per sweep is
// O(volume + open bonds), not O(N^{2d}).

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lrising/coupling.hpp"
#include "lrising/graph.hpp"
#include "lrising/rng.hpp"
#include "lrising/stats.hpp"

namespace lrising::fk {

struct McConfig {
    CouplingModel model;
    double beta = 0.5;
    int N = 8;
    BoundaryCondition bc = BoundaryCondition::Free;
    long sweeps = 10000;
    long burn_in = 1000;
    std::uint64_t seed = 1;
    int chains = 1;
    int batch_count = 16;

    void validate() const {
        model.validate();
        if (beta < 0) throw std::invalid_argument("McConfig: beta must be >= 0");
        if (!(sweeps > burn_in) || burn_in < 0)
            throw std::invalid_argument("McConfig: need sweeps > burn_in >= 0");
        if (batch_count < 8) throw std::invalid_argument("McConfig: batch_count must be >= 8");
        if (chains < 1) throw std::invalid_argument("McConfig: chains must be >= 1");
    }
};

// Open-bond state after a sweep; the union-find cache is rebuilt from the
// open set every sweep, so it is consistent by construction.
struct PercolationConfig {
    int n_vertices = 0;                   // includes the ghost slot when present
    bool has_ghost = false;
    int ghost = -1;
    std::vector<std::pair<int, int>> open;
    std::vector<int> degree;              // open degree per vertex
    UnionFind uf;

    void reset(int n, bool ghost_present) {
        n_vertices = n;
        has_ghost = ghost_present;
        ghost = ghost_present ? n - 1 : -1;
        open.clear();
        degree.assign(n, 0);
        uf.reset(n);
    }
    void open_edge(int u, int v) {
        open.push_back({u, v});
        ++degree[u];
        ++degree[v];
        uf.unite(u, v);
    }
};

// ---------------------------------------------------------------------------
// Displacement-class bond tables for boxes
// ---------------------------------------------------------------------------

struct BondClass {
    LatticeVec z;       // canonical displacement (first nonzero component > 0)
    double p = 0.0;     // open probability of each bond in the class
    long count = 0;     // number of ordered slots (u, u+z) inside the box
    std::array<int, kMaxDim> extent{};  // per-coordinate slot extents
    std::array<int, kMaxDim> lo{};      // per-coordinate slot offsets
};

struct BondTables {
    int d = 1, N = 0;
    std::vector<BondClass> classes;
    std::vector<double> ghost_p;  // per-vertex ghost bond probability (empty if free)
    double expected_open = 0.0;   // sum of p_e over all bonds, ghost included

    long volume() const { return box_volume(d, N); }
};

inline BondTables build_bond_tables(const CouplingModel& m, double beta, int N,
                                    BoundaryCondition bc, int outer_radius_factor = 8) {
    m.validate();
    if (beta < 0) throw std::invalid_argument("build_bond_tables: beta must be >= 0");
    BondTables t;
    t.d = m.d;
    t.N = N;
    KahanSum expected;
    LatticeVec z(m.d);
    std::array<int, kMaxDim> idx{};
    for (int i = 0; i < m.d; ++i) idx[i] = -2 * N;
    while (true) {
        for (int i = 0; i < m.d; ++i) z.c[i] = idx[i];
        // canonical half: first nonzero component positive
        bool canonical = false;
        for (int i = 0; i < m.d; ++i) {
            if (z.c[i] != 0) {
                canonical = z.c[i] > 0;
                break;
            }
        }
        if (canonical) {
            double p = fk_probability(beta, coupling(m, z));
            if (p > 0) {
                BondClass c;
                c.z = z;
                c.p = p;
                c.count = 1;
                for (int i = 0; i < m.d; ++i) {
                    c.extent[i] = 2 * N + 1 - std::abs(z.c[i]);
                    c.lo[i] = -N + std::max(0, -z.c[i]);
                    c.count *= c.extent[i];
                }
                expected.add(p * static_cast<double>(c.count));
                t.classes.push_back(c);
            }
        }
        int k = 0;
        while (k < m.d && ++idx[k] > 2 * N) idx[k++] = -2 * N;
        if (k == m.d) break;
    }
    if (bc == BoundaryCondition::Plus) {
        long vol = box_volume(m.d, N);
        t.ghost_p.resize(vol);
        int R = outer_radius_factor * std::max(N, 1);
        for (long u = 0; u < vol; ++u) {
            LatticeVec x = box_point(m.d, N, static_cast<int>(u));
            KahanSum s;
            for (int r = 1; r <= R; ++r) {
                double shell_max = 0.0;
                detail::for_each_linf_shell(m.d, r, [&](const LatticeVec& dx) {
                    double J = coupling(m, dx);
                    shell_max = std::max(shell_max, J);
                    if (J <= 0) return;
                    if (box_index(m.d, N, x + dx) < 0) s.add(J);
                });
                if (shell_max < 1e-30 && r > 1) break;
            }
            t.ghost_p[u] = fk_probability(beta, s.value());
            expected.add(t.ghost_p[u]);
        }
    }
    t.expected_open = expected.value();
    return t;
}

// Draw the open-bond proposal set for one class by geometric skipping: slot
// indices advance by 1 + floor(log U / log(1-p)), which visits each slot
// independently with probability p.
template <typename F>
void for_each_class_proposal(const BondClass& c, Rng& rng, F&& fn) {
    if (c.p <= 0) return;
    if (c.p >= 1) {
        for (long s = 0; s < c.count; ++s) fn(s);
        return;
    }
    const double log1mp = std::log1p(-c.p);
    // positions tracked in double: skips for tiny p overflow any integer,
    // and slot counts stay far below 2^53
    double pos = std::floor(std::log1p(-rng.uniform()) / log1mp);
    const double count = static_cast<double>(c.count);
    while (pos < count) {
        fn(static_cast<long>(pos));
        pos += 1.0 + std::floor(std::log1p(-rng.uniform()) / log1mp);
    }
}

// ---------------------------------------------------------------------------
// Box chain
// ---------------------------------------------------------------------------

class BoxChain {
  public:
    BoxChain(const CouplingModel& m, double beta, int N, BoundaryCondition bc)
        : model_(m), beta_(beta), N_(N), bc_(bc), tables_(build_bond_tables(m, beta, N, bc)) {
        vol_ = box_volume(m.d, N);
        n_all_ = static_cast<int>(vol_) + (bc == BoundaryCondition::Plus ? 1 : 0);
        spin_.assign(n_all_, +1);
        deleted_.assign(vol_, 0);
        state_.reset(n_all_, bc == BoundaryCondition::Plus);
    }

    // Condition on a vertex being disconnected from everything: all its
    // bonds stay closed, which is the FK measure of the deleted graph.
    void delete_vertex(const LatticeVec& x) {
        int i = box_index(model_.d, N_, x);
        if (i < 0) throw std::invalid_argument("delete_vertex: outside box");
        deleted_[i] = 1;
    }

    void init(Rng& rng) {
        for (long i = 0; i < vol_; ++i) spin_[i] = rng.bernoulli(0.5) ? +1 : -1;
        if (bc_ == BoundaryCondition::Plus) spin_[ghost_index()] = +1;
    }

    int ghost_index() const { return static_cast<int>(vol_); }
    long volume() const { return vol_; }
    const BondTables& tables() const { return tables_; }
    const PercolationConfig& state() const { return state_; }

    // One full Edwards-Sokal update; leaves state() holding the fresh bond
    // configuration and its connectivity cache.
    void sweep(Rng& rng) {
        sample_bonds(rng);
        recolor(rng);
    }

    // bond half-step only (used by tests validating the proposal intensity)
    void sample_bonds(Rng& rng) {
        state_.reset(n_all_, bc_ == BoundaryCondition::Plus);
        for (const auto& cls : tables_.classes) {
            for_each_class_proposal(cls, rng, [&](long slot) {
                int u = decode_slot(cls, slot);
                int v = shift_index(u, cls.z);
                if (deleted_[u] || deleted_[v]) return;
                if (spin_[u] == spin_[v]) state_.open_edge(u, v);
            });
        }
        if (bc_ == BoundaryCondition::Plus) {
            int g = ghost_index();
            for (long u = 0; u < vol_; ++u) {
                if (deleted_[u] || tables_.ghost_p[u] <= 0) continue;
                if (spin_[u] == +1 && rng.bernoulli(tables_.ghost_p[u]))
                    state_.open_edge(static_cast<int>(u), g);
            }
        }
    }

  private:
    void recolor(Rng& rng) {
        // fair coloring per cluster root; the ghost cluster is forced +
        color_.assign(n_all_, 0);
        int groot = bc_ == BoundaryCondition::Plus ? state_.uf.find(ghost_index()) : -1;
        for (int v = 0; v < n_all_; ++v) {
            int r = state_.uf.find(v);
            if (color_[r] == 0) color_[r] = (r == groot) ? +1 : (rng.bernoulli(0.5) ? +1 : -1);
            spin_[v] = color_[r];
        }
        if (bc_ == BoundaryCondition::Plus) spin_[ghost_index()] = +1;
    }

    int decode_slot(const BondClass& c, long slot) const {
        LatticeVec x(model_.d);
        for (int i = 0; i < model_.d; ++i) {
            x.c[i] = c.lo[i] + static_cast<int>(slot % c.extent[i]);
            slot /= c.extent[i];
        }
        return box_index(model_.d, N_, x);
    }

    int shift_index(int u, const LatticeVec& z) const {
        LatticeVec x = box_point(model_.d, N_, u) + z;
        return box_index(model_.d, N_, x);
    }

    CouplingModel model_;
    double beta_;
    int N_;
    BoundaryCondition bc_;
    BondTables tables_;
    long vol_ = 0;
    int n_all_ = 0;
    std::vector<int8_t> spin_;
    std::vector<int8_t> deleted_;
    std::vector<int8_t> color_;
    PercolationConfig state_;
};

// ---------------------------------------------------------------------------
// Explicit-graph chain (oracle-scale validation and arbitrary graphs)
// ---------------------------------------------------------------------------

class GraphChain {
  public:
    GraphChain(const FiniteGraph& g, double beta) : g_(&g), beta_(beta) {
        p_.resize(g.edges.size());
        for (size_t i = 0; i < g.edges.size(); ++i) p_[i] = fk_probability(beta, g.edges[i].J);
        spin_.assign(g.n_vertices(), +1);
        state_.reset(g.n_vertices(), g.has_ghost);
    }

    void init(Rng& rng) {
        for (int i = 0; i < g_->n_sites(); ++i) spin_[i] = rng.bernoulli(0.5) ? +1 : -1;
        if (g_->has_ghost) spin_[g_->ghost()] = +1;
    }

    const PercolationConfig& state() const { return state_; }

    void sweep(Rng& rng) {
        state_.reset(g_->n_vertices(), g_->has_ghost);
        for (size_t i = 0; i < g_->edges.size(); ++i) {
            const Edge& e = g_->edges[i];
            if (spin_[e.u] == spin_[e.v] && rng.bernoulli(p_[i])) state_.open_edge(e.u, e.v);
        }
        color_.assign(g_->n_vertices(), 0);
        int groot = g_->has_ghost ? state_.uf.find(g_->ghost()) : -1;
        for (int v = 0; v < g_->n_vertices(); ++v) {
            int r = state_.uf.find(v);
            if (color_[r] == 0) color_[r] = (r == groot) ? +1 : (rng.bernoulli(0.5) ? +1 : -1);
            spin_[v] = color_[r];
        }
        if (g_->has_ghost) spin_[g_->ghost()] = +1;
    }

  private:
    const FiniteGraph* g_;
    double beta_;
    std::vector<double> p_;
    std::vector<int8_t> spin_, color_;
    PercolationConfig state_;
};

// ---------------------------------------------------------------------------
// Estimator helpers
// ---------------------------------------------------------------------------

// connectivity of 0 and x using only edges inside the sub-box of radius r
// (r < 0: whole configuration)
inline bool connected_within(const PercolationConfig& s, int d, int N, int u, int v, int r) {
    if (r < 0) {
        UnionFind uf = s.uf;
        return uf.connected(u, v);
    }
    UnionFind uf(s.n_vertices);
    for (const auto& [a, b] : s.open) {
        if (s.has_ghost && (a == s.ghost || b == s.ghost)) continue;
        LatticeVec xa = box_point(d, N, a), xb = box_point(d, N, b);
        bool in = true;
        for (int i = 0; i < d; ++i)
            if (std::abs(xa.c[i]) > r || std::abs(xb.c[i]) > r) in = false;
        if (in) uf.unite(a, b);
    }
    return uf.connected(u, v);
}

// Merge per-chain estimates of the same observable (equal-length chains).
inline Estimate merge_estimates(const std::vector<Estimate>& es) {
    Estimate out;
    if (es.empty()) return out;
    double m = 0, var = 0, tau = 0;
    long n = 0;
    for (const auto& e : es) {
        m += e.mean;
        var += e.stderr_ * e.stderr_;
        tau = std::max(tau, e.tau_int);
        n += e.n_samples;
    }
    out.mean = m / static_cast<double>(es.size());
    out.stderr_ = std::sqrt(var) / static_cast<double>(es.size());
    out.tau_int = tau;
    out.n_samples = n;
    return out;
}

}  // namespace lrising::fk
