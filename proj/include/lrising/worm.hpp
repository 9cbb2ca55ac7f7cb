#pragma once

// Random-current sampling in two stages.  A worm samples the parity marginal
// of the current measure (odd edges weighted sinh(beta J_e), even-class
// weight cosh(beta J_e)); an independent augmentation then promotes each
// even edge to "even positive" with probability (cosh - 1)/cosh, recovering
// the law of {e : n_e > 0}.
//
// Worm state: parity configuration eta plus an ordered defect pair
// (tail, head), with the invariant  d(eta) = A xor {tail, head}  on lattice
// vertices (the ghost absorbs global parity).  head == tail is the closed
// sector d(eta) = A.  Moves:
//   kick  (closed only): resample tail = head uniformly; weight unchanged.
//   head move: propose v from the mixture  1/2 J_{h,.}/Z_h + 1/2 uniform,
//     flip parity of {h, v}, Metropolis-accept against the sector weight
//     W(eta) e^{tau.(x_head - x_tail)} B(x_head - x_tail).
// The tilt e^{tau.x} and the multicanonical sector bias B (a polynomial in
// rho(x), divided out exactly by the estimators) keep the defect-displacement
// histogram flat in the saturated regime, where far sectors are dominated by
// a single long edge that J-proportional proposals alone would essentially
// never flip.  Restricting to closed visits samples the source-A current law
// exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "lrising/fk.hpp"
#include "lrising/graph.hpp"
#include "lrising/rng.hpp"
#include "lrising/stats.hpp"

namespace lrising::worm {

// Sector bias B(x) = (1 + rho(x))^power inside the window rho(x) <= window,
// decaying exponentially beyond it so the chain does not drift into sectors
// nobody measures; power 0 disables it.  The same object must be shared
// between the chain and the collectors reweighting it.
struct SectorBias {
    double power = 0.0;
    NormSpec norm = NormSpec::l2(1);
    double window = std::numeric_limits<double>::infinity();
    double beyond_decay = 2.0;

    double operator()(const LatticeVec& x) const {
        if (power == 0.0) return 1.0;
        double r = norm_eval(norm, x);
        if (r <= window) return std::pow(1.0 + r, power);
        return std::pow(1.0 + window, power) * std::exp(-beyond_decay * (r - window));
    }
};

class WormChain {
  public:
    WormChain(const FiniteGraph& g, double beta, std::vector<int> base_sources,
              RealVec tilt = RealVec{0.0}, SectorBias bias = {})
        : g_(&g), beta_(beta), sources_(std::move(base_sources)), bias_(bias) {
        if (bias_.power != 0.0 && bias_.norm.dim() != g.dim)
            throw std::invalid_argument("WormChain: bias norm dimension mismatch");
        V_ = g.n_vertices();
        if (V_ > 2500) throw std::invalid_argument("WormChain: graph too large for dense rows");
        if (tilt.d == g.dim) tilt_ = tilt;
        else tilt_ = RealVec(g.dim);  // zero tilt
        J_ = g.coupling_matrix();
        // per-vertex proposal rows (compressed positive entries, cumulative)
        nbr_.resize(V_);
        cum_.resize(V_);
        Z_.assign(V_, 0.0);
        for (int u = 0; u < V_; ++u) {
            double z = 0;
            for (int v = 0; v < V_; ++v) {
                double J = J_[static_cast<size_t>(u) * V_ + v];
                if (J > 0) {
                    z += J;
                    nbr_[u].push_back(v);
                    cum_[u].push_back(z);
                }
            }
            Z_[u] = z;
        }
        tilt_coord_.assign(V_, 0.0);
        for (int v = 0; v < g.n_sites(); ++v) tilt_coord_[v] = dot(tilt_, g.sites[v]);
        parity_.assign(static_cast<size_t>(V_) * V_, 0);
        for (int s : sources_)
            if (s < 0 || s >= g.n_sites()) throw std::invalid_argument("WormChain: bad source vertex");
        int odd = static_cast<int>(sources_.size()) % 2;
        if (odd && !g.has_ghost)
            throw std::invalid_argument("WormChain: odd source count requires a ghost");
    }

    // Build a valid starting state: parity flipped along coupling paths that
    // pair up the sources, worm closed at vertex 0.
    void init(Rng& rng) {
        std::fill(parity_.begin(), parity_.end(), 0);
        odd_edges_.clear();
        std::vector<int> A = sources_;
        if (A.size() % 2 == 1) A.push_back(g_->ghost());
        for (size_t i = 0; i + 1 < A.size(); i += 2) flip_path(A[i], A[i + 1]);
        tail_ = head_ = static_cast<int>(rng.below(static_cast<std::uint64_t>(V_)));
        check_invariant();
    }

    bool closed() const { return tail_ == head_; }
    int tail() const { return tail_; }
    int head() const { return head_; }
    int n_vertices() const { return V_; }
    const FiniteGraph& graph() const { return *g_; }

    void step(Rng& rng) {
        if (rng.bernoulli(0.5)) {
            if (closed()) tail_ = head_ = static_cast<int>(rng.below(static_cast<std::uint64_t>(V_)));
            return;
        }
        int h = head_;
        if (V_ < 2) return;
        int v;
        if (rng.bernoulli(0.5) && Z_[h] > 0) {
            // v ~ J_{h,.} / Z_h by binary search in the cumulative row
            double target = rng.uniform() * Z_[h];
            const auto& cum = cum_[h];
            size_t lo = 0, hi = cum.size();
            while (lo + 1 < hi) {
                size_t mid = (lo + hi) / 2;
                if (cum[mid - 1] <= target) lo = mid; else hi = mid;
            }
            v = nbr_[h][lo];
        } else {
            v = static_cast<int>(rng.below(static_cast<std::uint64_t>(V_ - 1)));
            if (v >= h) ++v;
        }
        double J = J_[static_cast<size_t>(h) * V_ + v];
        if (J <= 0) return;  // flipping a zero-coupling edge has weight 0
        double th = std::tanh(beta_ * J);
        bool currently_odd = parity_[static_cast<size_t>(h) * V_ + v];
        double ratio = currently_odd ? 1.0 / th : th;
        ratio *= std::exp(tilt_coord_[v] - tilt_coord_[h]);
        ratio *= proposal_density(v, h) / proposal_density(h, v);
        ratio *= sector_bias(v) / sector_bias(h);
        if (ratio >= 1.0 || rng.uniform() < ratio) {
            flip_edge(h, v);
            head_ = v;
        }
    }

    // mixture density of proposing b from head position a
    double proposal_density(int a, int b) const {
        double uni = 0.5 / static_cast<double>(V_ - 1);
        double jpart = Z_[a] > 0 ? 0.5 * J_[static_cast<size_t>(a) * V_ + b] / Z_[a] : 0.0;
        return uni + jpart;
    }

    // B evaluated at the sector the chain would occupy with the given head
    double sector_bias(int head) const {
        if (bias_.power == 0.0) return 1.0;
        if (head == tail_) return 1.0;
        if (g_->is_ghost(head) || g_->is_ghost(tail_)) return 1.0;
        return bias_(g_->sites[head] - g_->sites[tail_]);
    }

    // Promote even edges independently; emits the positive-edge trace.
    fk::PercolationConfig augmented_trace(Rng& rng) const {
        fk::PercolationConfig s;
        s.reset(V_, g_->has_ghost);
        for (const auto& [u, v] : odd_edges_) s.open_edge(u, v);
        for (const auto& pe : promotable_) {
            if (parity_[pe.key]) continue;  // odd already in the trace
            if (rng.bernoulli(pe.prob)) s.open_edge(pe.u, pe.v);
        }
        return s;
    }

    // Parity-only trace (edges with odd multiplicity).
    const std::vector<std::pair<int, int>>& odd_edges() const { return odd_edges_; }

    bool edge_parity(int u, int v) const { return parity_[static_cast<size_t>(u) * V_ + v]; }

    // d(eta) == A xor {tail, head} on lattice vertices; throws otherwise.
    void check_invariant() const {
        std::vector<int> deg(V_, 0);
        for (const auto& [u, v] : odd_edges_) {
            deg[u] ^= 1;
            deg[v] ^= 1;
        }
        std::vector<int> want(V_, 0);
        for (int s : sources_) want[s] ^= 1;
        if (!closed()) {
            want[tail_] ^= 1;
            want[head_] ^= 1;
        }
        for (int v = 0; v < V_; ++v) {
            if (g_->is_ghost(v)) continue;
            if (deg[v] != want[v]) throw std::logic_error("WormChain: parity invariant violated");
        }
    }

    // Precompute the even-edge promotion list (call once before sampling
    // traces; probability floor skips edges whose promotion probability is
    // zero in double precision).
    void prepare_augmentation() {
        promotable_.clear();
        for (int u = 0; u < V_; ++u)
            for (int v = u + 1; v < V_; ++v) {
                double J = J_[static_cast<size_t>(u) * V_ + v];
                if (J <= 0) continue;
                double c = std::cosh(beta_ * J);
                double prob = (c - 1.0) / c;
                if (prob > 0)
                    promotable_.push_back(Promotable{static_cast<size_t>(u) * V_ + v, u, v, prob});
            }
    }

  private:
    struct Promotable {
        size_t key;
        int u, v;
        double prob;
    };

    void flip_edge(int u, int v) {
        size_t k1 = static_cast<size_t>(u) * V_ + v, k2 = static_cast<size_t>(v) * V_ + u;
        if (parity_[k1]) {
            parity_[k1] = parity_[k2] = 0;
            // remove from the odd-edge list via swap with the back
            size_t pos = odd_pos_at(u, v);
            odd_index_[edge_key(odd_edges_.back())] = pos;
            std::swap(odd_edges_[pos], odd_edges_.back());
            odd_edges_.pop_back();
        } else {
            parity_[k1] = parity_[k2] = 1;
            odd_index_[std::min(k1, k2)] = odd_edges_.size();
            odd_edges_.push_back({std::min(u, v), std::max(u, v)});
        }
    }

    size_t edge_key(const std::pair<int, int>& e) const {
        return static_cast<size_t>(e.first) * V_ + e.second;
    }
    size_t odd_pos_at(int u, int v) {
        size_t key = static_cast<size_t>(std::min(u, v)) * V_ + std::max(u, v);
        return odd_index_.at(key);
    }

    void flip_path(int a, int b) {
        if (a == b) return;
        // BFS over positive couplings
        std::vector<int> prev(V_, -1);
        std::vector<int> queue{a};
        prev[a] = a;
        for (size_t qi = 0; qi < queue.size() && prev[b] < 0; ++qi) {
            int u = queue[qi];
            for (int v : nbr_[u])
                if (prev[v] < 0) {
                    prev[v] = u;
                    queue.push_back(v);
                }
        }
        if (prev[b] < 0) throw std::invalid_argument("WormChain: sources not connected by couplings");
        for (int v = b; v != a; v = prev[v]) flip_edge(prev[v], v);
    }

    const FiniteGraph* g_;
    double beta_;
    std::vector<int> sources_;
    SectorBias bias_;
    RealVec tilt_;
    int V_ = 0;
    std::vector<double> J_;
    std::vector<std::vector<int>> nbr_;
    std::vector<std::vector<double>> cum_;
    std::vector<double> Z_;
    std::vector<double> tilt_coord_;
    std::vector<std::uint8_t> parity_;
    std::vector<std::pair<int, int>> odd_edges_;
    std::unordered_map<size_t, size_t> odd_index_;
    std::vector<Promotable> promotable_;
    int tail_ = 0, head_ = 0;
};

// ---------------------------------------------------------------------------
// Two-point profiles from sector visit counts
// ---------------------------------------------------------------------------

// Average two-point function over box translates,
//   G(x) = (1/M_x) sum_u <sigma_u sigma_{u+x}>,
// from the worm sector histogram: G(x) = [H(x)/H0] V e^{-tau.x} / M_x.
struct TwoPointRequest {
    std::vector<LatticeVec> displacements;
};

struct TwoPointProfile {
    std::vector<LatticeVec> displacements;
    std::vector<Estimate> values;  // estimate of G(x) per displacement
    Estimate weighted_sum;         // sum_k w_k G(x_k) if requested (shared bins)
};

class TwoPointCollector {
  public:
    static constexpr long kFlushEvery = 256;  // steps pooled into one ratio sample

    // central_pad >= 0 restricts the translation average to pairs whose
    // endpoints both sit at linf distance >= pad from the box boundary
    // (free-boundary suppression otherwise contaminates long displacements).
    TwoPointCollector(const FiniteGraph& g, const RealVec& tilt,
                      const std::vector<LatticeVec>& displacements, SectorBias bias = {},
                      int central_pad = -1)
        : displacements_(displacements) {
        V_ = g.n_vertices();
        int R = 0;
        for (const auto& s : g.sites)
            for (int i = 0; i < s.d; ++i) R = std::max(R, std::abs(s.c[i]));
        auto interior = [&](const LatticeVec& s) {
            if (central_pad < 0) return true;
            for (int i = 0; i < s.d; ++i)
                if (R - std::abs(s.c[i]) < central_pad) return false;
            return true;
        };
        // sector key per ordered (tail, head) pair -> displacement slot
        slot_.assign(static_cast<size_t>(V_) * V_, -1);
        mult_.assign(displacements.size(), 0);
        factor_.resize(displacements.size());
        for (size_t k = 0; k < displacements.size(); ++k) {
            const LatticeVec& x = displacements[k];
            for (int u = 0; u < g.n_sites(); ++u)
                for (int v = 0; v < g.n_sites(); ++v) {
                    if (u == v) continue;
                    if (!(g.sites[v] - g.sites[u] == x)) continue;
                    if (!interior(g.sites[u]) || !interior(g.sites[v])) continue;
                    slot_[static_cast<size_t>(u) * V_ + v] = static_cast<int>(k);
                    ++mult_[k];
                }
            factor_[k] = static_cast<double>(V_) * std::exp(-dot(tilt, x)) / bias(x);
        }
        acc_.resize(displacements.size());
        acc_rel_.resize(displacements.size());
        counts_.assign(displacements.size(), 0);
        total_counts_.assign(displacements.size(), 0);
    }

    // Track sum_k w_k G(x_k) with correct cross-displacement correlations
    // (all displacements share the same visit bins).
    void request_weighted_sum(const std::vector<double>& w) {
        if (w.size() != displacements_.size())
            throw std::invalid_argument("request_weighted_sum: weight count mismatch");
        sum_weights_.resize(w.size());
        for (size_t k = 0; k < w.size(); ++k)
            sum_weights_[k] = mult_[k] > 0 ? w[k] * factor_[k] / static_cast<double>(mult_[k]) : 0.0;
        want_sum_ = true;
    }

    void measure(const WormChain& w) {
        if (w.closed()) {
            ++closed_count_;
        } else {
            int s = slot_[static_cast<size_t>(w.tail()) * V_ + w.head()];
            if (s >= 0) ++counts_[s];
        }
        if (++pending_ == kFlushEvery) flush();
    }

    TwoPointProfile profile() {
        if (pending_ > 0) flush();
        TwoPointProfile p;
        p.displacements = displacements_;
        for (size_t k = 0; k < acc_.size(); ++k) {
            Estimate e = acc_[k].estimate();
            double f = mult_[k] > 0 ? factor_[k] / static_cast<double>(mult_[k]) : 0.0;
            e.mean *= f;
            e.stderr_ *= f;
            p.values.push_back(e);
        }
        if (want_sum_) p.weighted_sum = sum_acc_.estimate();
        return p;
    }

    // Profile known only up to one common constant (the enlarged-measure
    // normalization): visit rates instead of ratios against the closed
    // sector.  Slope fits and anchored rescalings do not need the constant.
    TwoPointProfile profile_relative() {
        if (pending_ > 0) flush();
        TwoPointProfile p;
        p.displacements = displacements_;
        for (size_t k = 0; k < acc_rel_.size(); ++k) {
            Estimate e = acc_rel_[k].estimate();
            double f = mult_[k] > 0 ? factor_[k] / static_cast<double>(mult_[k]) : 0.0;
            e.mean *= f;
            e.stderr_ *= f;
            p.values.push_back(e);
        }
        if (want_sum_) p.weighted_sum = sum_acc_rel_.estimate();
        return p;
    }

    long visits(size_t k) const { return total_counts_[k]; }

  private:
    void flush() {
        double weighted = 0.0;
        for (size_t k = 0; k < acc_.size(); ++k) {
            acc_[k].add(static_cast<double>(counts_[k]), static_cast<double>(closed_count_));
            if (acc_rel_.size() < acc_.size()) acc_rel_.resize(acc_.size());
            acc_rel_[k].add(static_cast<double>(counts_[k]) / static_cast<double>(kFlushEvery));
            if (want_sum_) weighted += sum_weights_[k] * static_cast<double>(counts_[k]);
            total_counts_[k] += counts_[k];
            counts_[k] = 0;
        }
        if (want_sum_) {
            sum_acc_.add(weighted, static_cast<double>(closed_count_));
            sum_acc_rel_.add(weighted / static_cast<double>(kFlushEvery));
        }
        closed_count_ = 0;
        pending_ = 0;
    }

    std::vector<LatticeVec> displacements_;
    int V_ = 0;
    std::vector<int> slot_;
    std::vector<long> mult_;
    std::vector<double> factor_;
    std::vector<RatioAccumulator> acc_;
    std::vector<Accumulator> acc_rel_;
    std::vector<long> counts_;
    std::vector<long> total_counts_;
    std::vector<double> sum_weights_;
    RatioAccumulator sum_acc_;
    Accumulator sum_acc_rel_;
    bool want_sum_ = false;
    long closed_count_ = 0;
    long pending_ = 0;
};

// ---------------------------------------------------------------------------
// Ghost-disconnection estimator
// ---------------------------------------------------------------------------

struct DisconnectionConfig {
    long steps = 200000;
    long burn_in = 20000;
    long stride = 16;  // measurement attempted every stride steps
};

// P[0 not<-> ghost] in the trace of one current with sources {u, v}
// (double_current = false) or of the sum of an unsourced and a sourced
// current (double_current = true).  Measurements happen at closed visits.
inline Estimate estimate_disconnection(const FiniteGraph& g, double beta, int u, int v,
                                       bool double_current, std::uint64_t seed,
                                       DisconnectionConfig cfg = {}) {
    if (!g.has_ghost) throw std::invalid_argument("estimate_disconnection: requires ghost");
    Rng rng = Rng::stream(seed, 0);
    WormChain sourced(g, beta, {u, v});
    sourced.prepare_augmentation();
    sourced.init(rng);
    WormChain free_current(g, beta, {});
    if (double_current) {
        free_current.prepare_augmentation();
        free_current.init(rng);
    }
    for (long s = 0; s < cfg.burn_in; ++s) {
        sourced.step(rng);
        if (double_current) free_current.step(rng);
    }
    RatioAccumulator acc;
    for (long s = 0; s < cfg.steps; ++s) {
        sourced.step(rng);
        if (double_current) free_current.step(rng);
        if (s % cfg.stride != 0) continue;
        bool ready = sourced.closed() && (!double_current || free_current.closed());
        if (!ready) {
            acc.add(0.0, 0.0);
            continue;
        }
        fk::PercolationConfig trace = sourced.augmented_trace(rng);
        if (double_current) {
            fk::PercolationConfig other = free_current.augmented_trace(rng);
            for (const auto& [a, b] : other.open) trace.open_edge(a, b);
        }
        UnionFind uf = trace.uf;
        bool disconnected = !uf.connected(u, g.ghost());
        acc.add(disconnected ? 1.0 : 0.0, 1.0);
    }
    return acc.estimate();
}

}  // namespace lrising::worm
