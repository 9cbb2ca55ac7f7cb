#pragma once

// Norms rho on R^d from the weighted-lp family, their dual norms, and dual
// vectors t to directions s (boundary points of the Wulff shape
// W = { t : t.x <= rho(x) for all x } with t.s = rho(s)).
//
// Only p in {1, 2, inf} with strictly positive per-coordinate weights are
// supported; the dual norm is then available in closed form, which keeps all
// duality identities exact to ~1e-10 in double precision.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrising/vec.hpp"

namespace lrising {

enum class NormKind { L1, L2, Linf, WeightedLp };

// p exponent encoding: 1, 2, or kPInf for p = infinity.
inline constexpr int kPInf = 0;

struct NormSpec {
    NormKind kind = NormKind::L2;
    int p = 2;        // 1, 2 or kPInf
    RealVec weights;  // strictly positive, size = dimension

    static NormSpec l1(int d) { return NormSpec{NormKind::L1, 1, RealVec::ones(d)}; }
    static NormSpec l2(int d) { return NormSpec{NormKind::L2, 2, RealVec::ones(d)}; }
    static NormSpec linf(int d) { return NormSpec{NormKind::Linf, kPInf, RealVec::ones(d)}; }
    static NormSpec weighted(int p, const RealVec& w) {
        NormSpec n{NormKind::WeightedLp, p, w};
        n.validate();
        return n;
    }

    int dim() const { return weights.d; }

    void validate() const {
        if (p != 1 && p != 2 && p != kPInf) throw std::invalid_argument("NormSpec: p must be 1, 2 or inf");
        if (weights.d < 1) throw std::invalid_argument("NormSpec: empty weights");
        for (int i = 0; i < weights.d; ++i)
            if (!(weights.c[i] > 0.0)) throw std::invalid_argument("NormSpec: weights must be strictly positive");
    }

    bool equal_weights() const {
        for (int i = 1; i < weights.d; ++i)
            if (weights.c[i] != weights.c[0]) return false;
        return true;
    }

    std::string p_str() const { return p == kPInf ? "inf" : std::to_string(p); }
};

namespace detail {

inline double lp_of(const NormSpec& n, const double* x) {
    const int d = n.dim();
    switch (n.p) {
        case 1: {
            double s = 0;
            for (int i = 0; i < d; ++i) s += n.weights.c[i] * std::abs(x[i]);
            return s;
        }
        case 2: {
            double s = 0;
            for (int i = 0; i < d; ++i) {
                double v = n.weights.c[i] * x[i];
                s += v * v;
            }
            return std::sqrt(s);
        }
        default: {  // p = inf
            double s = 0;
            for (int i = 0; i < d; ++i) s = std::max(s, n.weights.c[i] * std::abs(x[i]));
            return s;
        }
    }
}

}  // namespace detail

inline double norm_eval(const NormSpec& n, const RealVec& x) {
    if (x.d != n.dim()) throw std::invalid_argument("norm_eval: dimension mismatch");
    return detail::lp_of(n, x.c.data());
}

inline double norm_eval(const NormSpec& n, const LatticeVec& x) {
    return norm_eval(n, RealVec::from(x));
}

// Dual norm rho*(t) = sup_{x != 0} t.x / rho(x).  For rho(x) = ||W x||_p the
// dual is ||W^{-1} t||_q with 1/p + 1/q = 1.
inline double dual_norm_eval(const NormSpec& n, const RealVec& t) {
    if (t.d != n.dim()) throw std::invalid_argument("dual_norm_eval: dimension mismatch");
    RealVec u(t.d);
    for (int i = 0; i < t.d; ++i) u.c[i] = t.c[i] / n.weights.c[i];
    NormSpec dual = n;
    dual.p = (n.p == 1) ? kPInf : (n.p == 2 ? 2 : 1);
    dual.weights = RealVec::ones(t.d);
    return detail::lp_of(dual, u.c.data());
}

// One dual vector to the direction s, plus the extreme points of the dual
// facet when the supporting hyperplane at s/rho(s) is not unique.
struct DualVectorResult {
    RealVec s;                     // input direction, Euclid-normalized
    RealVec t;                     // centroid dual vector, on the Wulff boundary
    bool unique = true;            // false iff W has a facet with normal s
    std::vector<RealVec> extremes; // facet extreme points (centroid only if unique)
};

// Relative tolerance used to detect ties (argmax / zero components) in s.
inline constexpr double kDualTieTol = 1e-12;

inline DualVectorResult dual_vector(const NormSpec& n, RealVec s) {
    n.validate();
    const int d = n.dim();
    if (s.d != d) throw std::invalid_argument("dual_vector: dimension mismatch");
    double len = s.euclid();
    if (!(len > 0.0)) throw std::invalid_argument("dual_vector: degenerate direction s = 0");
    for (int i = 0; i < d; ++i) s.c[i] /= len;

    DualVectorResult r;
    r.s = s;
    r.t = RealVec(d);

    switch (n.p) {
        case 2: {
            // rho(x) = ||Wx||_2 is smooth: t = grad rho(s) = W^2 s / rho(s).
            double rho_s = norm_eval(n, s);
            for (int i = 0; i < d; ++i) r.t.c[i] = n.weights.c[i] * n.weights.c[i] * s.c[i] / rho_s;
            r.unique = true;
            r.extremes = {r.t};
            return r;
        }
        case 1: {
            // t_i = w_i sgn(s_i); coordinates with s_i = 0 are facet-free in
            // [-w_i, w_i], centroid puts them at 0.
            double smax = 0;
            for (int i = 0; i < d; ++i) smax = std::max(smax, std::abs(s.c[i]));
            std::vector<int> free_idx;
            for (int i = 0; i < d; ++i) {
                if (std::abs(s.c[i]) <= kDualTieTol * smax) {
                    r.t.c[i] = 0.0;
                    free_idx.push_back(i);
                } else {
                    r.t.c[i] = n.weights.c[i] * (s.c[i] > 0 ? 1.0 : -1.0);
                }
            }
            r.unique = free_idx.empty();
            if (r.unique) {
                r.extremes = {r.t};
            } else {
                // 2^k sign choices on the free coordinates.
                size_t k = free_idx.size();
                for (size_t mask = 0; mask < (size_t{1} << k); ++mask) {
                    RealVec e = r.t;
                    for (size_t j = 0; j < k; ++j)
                        e.c[free_idx[j]] = ((mask >> j) & 1) ? n.weights.c[free_idx[j]] : -n.weights.c[free_idx[j]];
                    r.extremes.push_back(e);
                }
            }
            return r;
        }
        default: {  // p = inf
            // rho(x) = max w_i |x_i|; subdifferential at s is the convex hull
            // of w_i sgn(s_i) e_i over the argmax set.
            double m = 0;
            for (int i = 0; i < d; ++i) m = std::max(m, n.weights.c[i] * std::abs(s.c[i]));
            std::vector<int> arg;
            for (int i = 0; i < d; ++i)
                if (n.weights.c[i] * std::abs(s.c[i]) >= m * (1.0 - kDualTieTol)) arg.push_back(i);
            for (int idx : arg) {
                RealVec e(d);
                e.c[idx] = n.weights.c[idx] * (s.c[idx] > 0 ? 1.0 : -1.0);
                r.extremes.push_back(e);
                for (int i = 0; i < d; ++i) r.t.c[i] += e.c[i] / static_cast<double>(arg.size());
            }
            r.unique = (arg.size() == 1);
            return r;
        }
    }
}

}  // namespace lrising
