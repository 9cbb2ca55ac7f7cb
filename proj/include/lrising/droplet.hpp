#pragma once

// Low-temperature estimator for the truncated surrogate
// Phi(0 <-> x, 0 not<-> ghost) on plus-bc boxes.  At the betas of interest
// the event probability sits many orders below the indicator-counting floor
// (it scales like J_x times isolation costs), so it is decomposed over the
// cluster of the origin:
//
//   Phi(0 <-> x, 0 not<-> ghost) = sum_{S contains {0,x}} Phi[C_0 = S],
//   Phi[C_0 = S] = [2 A_S / (2^{|S|} prod_{e in E_S} (1-p_e))]
//                  * Phi[every edge touching S is closed],
//
// with A_S the spanning-subgraph polynomial of the couplings inside S (exact,
// |S| <= 3 here) and the isolation probabilities measured by FK runs:
// conditioning on a vertex being isolated is exactly the FK measure of the
// graph with that vertex deleted, so
//   Phi[S isolated] = Phi[deg 0 = 0] * Phi_{-0}[deg rest of S = 0],
// one full-box chain and one origin-deleted chain.  The |S| > 3 truncation
// is reported as a one-sided bound extrapolated from the layer decay.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "lrising/fk.hpp"
#include "lrising/stats.hpp"

namespace lrising::droplet {

// batch counter with a fixed number of equal sweep bins
class FixedBatches {
  public:
    FixedBatches() = default;
    FixedBatches(int bins, long total) : bins_(bins), per_bin_(std::max<long>(total / bins, 1)) {
        counts_.assign(bins, 0.0);
    }
    void add(long sweep_index, double v) {
        long b = std::min<long>(sweep_index / per_bin_, bins_ - 1);
        counts_[b] += v;
    }
    Estimate estimate(long total) const {
        Estimate e;
        e.n_samples = total;
        double sum = 0;
        for (double c : counts_) sum += c;
        e.mean = sum / static_cast<double>(total);
        double bm = 0, var = 0;
        std::vector<double> means(bins_);
        for (int b = 0; b < bins_; ++b) {
            long len = (b == bins_ - 1) ? total - per_bin_ * (bins_ - 1) : per_bin_;
            means[b] = counts_[b] / std::max<long>(len, 1);
            bm += means[b];
        }
        bm /= bins_;
        for (double v : means) var += (v - bm) * (v - bm);
        var /= (bins_ - 1);
        e.stderr_ = std::sqrt(var / bins_);
        return e;
    }

  private:
    int bins_ = 16;
    long per_bin_ = 1;
    std::vector<double> counts_;
};

struct DropletPoint {
    LatticeVec x;
    double J = 0.0;            // coupling at x
    Estimate surrogate;        // estimated Phi(0 <-> x, 0 not<-> ghost)
    double pair_term = 0.0;    // |S| = 2 contribution
    double triple_term = 0.0;  // |S| = 3 contribution
    double truncation = 0.0;   // one-sided bound on the omitted |S| >= 4 layers
    double ratio = 0.0;        // surrogate / J
    double ratio_stderr = 0.0;
};

struct DropletConfig {
    long sweeps = 400'000;
    long burn_in = 40'000;
    std::uint64_t seed = 1;
    int batches = 16;
    double triple_keep_fraction = 1e-4;  // prune triples below this share of the pair weight
};

namespace detail {

// spanning polynomial of a pair: the single edge must be open
inline double a_pair(double p) { return p; }

// spanning polynomial of a triple with edge probabilities p01, p12, p02
inline double a_triple(double p01, double p12, double p02) {
    double q01 = 1 - p01, q12 = 1 - p12, q02 = 1 - p02;
    return p01 * p12 * p02 + p01 * p12 * q02 + p01 * p02 * q12 + p12 * p02 * q01;
}

inline double cluster_weight(double A, int size, double prod_q) {
    return 2.0 * A / (std::pow(2.0, size) * prod_q);
}

}  // namespace detail

// Surrogate profile over the axis displacements x = (n, 0, ...), n in
// n_list, on the plus-bc box Lambda_N.
inline std::vector<DropletPoint> surrogate_profile(const CouplingModel& m, double beta, int N,
                                                   const std::vector<int>& n_list,
                                                   DropletConfig cfg = {}) {
    m.validate();
    long vol = box_volume(m.d, N);
    int origin = box_index(m.d, N, LatticeVec(m.d));

    std::vector<int> targets;
    for (int n : n_list) {
        LatticeVec x(m.d);
        x.c[0] = n;
        int idx = box_index(m.d, N, x);
        if (idx < 0) throw std::invalid_argument("surrogate_profile: target outside the box");
        targets.push_back(idx);
    }

    // chain A: full box, measures P[deg_0 = 0]
    fk::BoxChain chain_a(m, beta, N, BoundaryCondition::Plus);
    // chain B: origin deleted, measures isolation of everything else
    fk::BoxChain chain_b(m, beta, N, BoundaryCondition::Plus);
    chain_b.delete_vertex(LatticeVec(m.d));

    FixedBatches iso0(cfg.batches, cfg.sweeps);
    std::vector<FixedBatches> iso_x(targets.size());
    std::map<std::pair<int, int>, FixedBatches> iso_joint;  // (target idx, y) -> counter

    // triple candidates per target, pruned by their exact cluster weight
    // relative to the pair weight
    std::vector<std::vector<int>> triple_y(targets.size());
    std::vector<std::vector<double>> triple_w(targets.size());
    std::vector<double> pair_w(targets.size());
    std::vector<double> truncation_scale(targets.size(), 0.0);
    for (size_t k = 0; k < targets.size(); ++k) {
        LatticeVec x = box_point(m.d, N, targets[k]);
        double p0x = fk_probability(beta, coupling(m, x));
        pair_w[k] = detail::cluster_weight(detail::a_pair(p0x), 2, 1 - p0x);
        double kept = 0, dropped = 0;
        for (long yi = 0; yi < vol; ++yi) {
            if (yi == origin || yi == targets[k]) continue;
            LatticeVec y = box_point(m.d, N, static_cast<int>(yi));
            double p0y = fk_probability(beta, coupling(m, y));
            double pyx = fk_probability(beta, coupling(m, x - y));
            double p0x_ = p0x;
            double A = detail::a_triple(p0y, pyx, p0x_);
            double W = detail::cluster_weight(A, 3, (1 - p0y) * (1 - pyx) * (1 - p0x_));
            if (W >= cfg.triple_keep_fraction * pair_w[k]) {
                triple_y[k].push_back(static_cast<int>(yi));
                triple_w[k].push_back(W);
                kept += W;
            } else {
                dropped += W;  // bounded by the same weight with isolation prob <= pair's
            }
        }
        truncation_scale[k] = dropped;
        for (int y : triple_y[k])
            iso_joint.emplace(std::make_pair(static_cast<int>(k), y),
                              FixedBatches(cfg.batches, cfg.sweeps));
        iso_x[k] = FixedBatches(cfg.batches, cfg.sweeps);
    }
    iso0 = FixedBatches(cfg.batches, cfg.sweeps);

    Rng rng_a = Rng::stream(cfg.seed, 0), rng_b = Rng::stream(cfg.seed, 1);
    chain_a.init(rng_a);
    chain_b.init(rng_b);
    for (long s = 0; s < cfg.burn_in; ++s) {
        chain_a.sweep(rng_a);
        chain_b.sweep(rng_b);
    }
    for (long s = 0; s < cfg.sweeps; ++s) {
        chain_a.sweep(rng_a);
        chain_b.sweep(rng_b);
        if (chain_a.state().degree[origin] == 0) iso0.add(s, 1.0);
        const auto& deg = chain_b.state().degree;
        for (size_t k = 0; k < targets.size(); ++k) {
            if (deg[targets[k]] != 0) continue;
            iso_x[k].add(s, 1.0);
            for (size_t j = 0; j < triple_y[k].size(); ++j) {
                int y = triple_y[k][j];
                if (deg[y] == 0)
                    iso_joint.at({static_cast<int>(k), y}).add(s, 1.0);
            }
        }
    }

    Estimate p0 = iso0.estimate(cfg.sweeps);
    std::vector<DropletPoint> out;
    for (size_t k = 0; k < targets.size(); ++k) {
        DropletPoint pt;
        pt.x = box_point(m.d, N, targets[k]);
        pt.J = coupling(m, pt.x);
        Estimate px = iso_x[k].estimate(cfg.sweeps);
        pt.pair_term = pair_w[k] * p0.mean * px.mean;
        double rel2 = 0;
        if (p0.mean > 0) rel2 += std::pow(p0.stderr_ / p0.mean, 2);
        if (px.mean > 0) rel2 += std::pow(px.stderr_ / px.mean, 2);
        double triple = 0, triple_var = 0;
        for (size_t j = 0; j < triple_y[k].size(); ++j) {
            Estimate pj = iso_joint.at({static_cast<int>(k), triple_y[k][j]}).estimate(cfg.sweeps);
            triple += triple_w[k][j] * p0.mean * pj.mean;
            triple_var += std::pow(triple_w[k][j] * p0.mean * pj.stderr_, 2);
        }
        pt.triple_term = triple;
        // omitted layers: pruned triples at the pair isolation probability,
        // plus a geometric extrapolation of the layer decay
        double layer_ratio = pt.pair_term > 0 ? triple / pt.pair_term : 0.0;
        pt.truncation = truncation_scale[k] * p0.mean * px.mean +
                        (layer_ratio < 0.5 ? triple * layer_ratio / (1 - layer_ratio) : triple);
        pt.surrogate.mean = pt.pair_term + pt.triple_term;
        pt.surrogate.stderr_ = std::sqrt(pt.pair_term * pt.pair_term * rel2 + triple_var) +
                               pt.truncation;
        pt.surrogate.n_samples = cfg.sweeps;
        pt.ratio = pt.J > 0 ? pt.surrogate.mean / pt.J : 0.0;
        pt.ratio_stderr = pt.J > 0 ? pt.surrogate.stderr_ / pt.J : 0.0;
        out.push_back(pt);
    }
    return out;
}

}  // namespace lrising::droplet
