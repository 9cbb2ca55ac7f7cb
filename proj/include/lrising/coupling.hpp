#pragma once

// Coupling constants J_x = psi(x) e^{-rho(x)}, FK-Ising bond probabilities,
// tilted coupling sums J(t) = sum_x e^{t.x} J_x, and the explicit saturation
// criterion (finite J(t) for some dual vector t to s).

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lrising/norms.hpp"
#include "lrising/vec.hpp"

namespace lrising {

enum class PsiKind { One, Polynomial, StretchedExp };

// Subexponential correction psi, radial in rho(x).
struct PsiSpec {
    PsiKind kind = PsiKind::Polynomial;
    double alpha = 3.0;  // Polynomial: psi = rho^{-alpha}, alpha > 0
    double c = 1.0;      // StretchedExp: psi = exp(-c rho^eta), c > 0
    double eta = 0.5;    // StretchedExp: eta in (0,1)

    static PsiSpec one() { return PsiSpec{PsiKind::One, 0, 0, 0}; }
    static PsiSpec polynomial(double alpha) {
        if (!(alpha > 0)) throw std::invalid_argument("PsiSpec: alpha must be > 0");
        return PsiSpec{PsiKind::Polynomial, alpha, 0, 0};
    }
    static PsiSpec stretched_exp(double c, double eta) {
        if (!(c > 0) || !(eta > 0) || !(eta < 1))
            throw std::invalid_argument("PsiSpec: need c > 0 and eta in (0,1)");
        return PsiSpec{PsiKind::StretchedExp, 0, c, eta};
    }

    double value(double rho) const {
        switch (kind) {
            case PsiKind::One: return 1.0;
            case PsiKind::Polynomial: return std::pow(rho, -alpha);
            default: return std::exp(-c * std::pow(rho, eta));
        }
    }
};

struct CouplingModel {
    int d = 1;
    NormSpec norm = NormSpec::l2(1);
    PsiSpec psi = PsiSpec::polynomial(3.0);
    double j_scale = 1.0;  // overall coupling scale, > 0

    void validate() const {
        norm.validate();
        if (d != norm.dim()) throw std::invalid_argument("CouplingModel: d != norm dimension");
        if (!(j_scale > 0)) throw std::invalid_argument("CouplingModel: j_scale must be > 0");
    }

    // Rescale so that unit edges carry J = 1 (the natural normalization for
    // the low-temperature comparisons; a rescale of beta otherwise).
    CouplingModel unit_normalized() const {
        CouplingModel m = *this;
        LatticeVec e1(d);
        e1.c[0] = 1;
        m.j_scale = 1.0;
        double j1 = m.psi.value(norm_eval(m.norm, e1)) * std::exp(-norm_eval(m.norm, e1));
        m.j_scale = 1.0 / j1;
        return m;
    }
};

// J_x; zero at the origin (no self-interaction).
inline double coupling(const CouplingModel& m, const LatticeVec& x) {
    if (x.is_zero()) return 0.0;
    double r = norm_eval(m.norm, x);
    return m.j_scale * m.psi.value(r) * std::exp(-r);
}

// FK-Ising bond probability p = 1 - e^{-2 beta J} for the Hamiltonian
// -sum J sigma sigma, so that <sigma_0 sigma_x> = Phi_beta(0 <-> x) holds
// exactly (checked against enumeration in the test suite).
inline double fk_probability(double beta, double J) {
    if (beta < 0) throw std::invalid_argument("fk_probability: beta must be >= 0");
    return -std::expm1(-2.0 * beta * J);
}

inline double edge_probability(const CouplingModel& m, double beta, const LatticeVec& x) {
    return fk_probability(beta, coupling(m, x));
}

enum class SumStatus { Converged, Divergent, Indeterminate };

// Result of a tilted coupling sum over growing linf shells.
struct TiltedSum {
    double value = 0.0;       // partial sum (lower bound of the full sum)
    double tail_bound = 0.0;  // rigorous bound on the omitted tail (Converged only)
    long truncation_radius = 0;
    SumStatus status = SumStatus::Converged;

    bool finite() const { return status == SumStatus::Converged; }
    bool divergent() const { return status == SumStatus::Divergent; }
};

namespace detail {

// Visit all lattice x with ||x||_inf == r (r >= 1), each exactly once.
// Points are classified by the first coordinate j with |x_j| = r: earlier
// coordinates range over [-(r-1), r-1], later ones over [-r, r].
template <typename F>
void for_each_linf_shell(int d, int r, F&& fn) {
    LatticeVec x(d);
    for (int j = 0; j < d; ++j) {
        for (int sgn = -1; sgn <= 1; sgn += 2) {
            x.c[j] = sgn * r;
            // odometer over the remaining coordinates
            std::array<int, kMaxDim> lo{}, hi{};
            for (int i = 0; i < d; ++i) {
                if (i == j) continue;
                lo[i] = (i < j) ? -(r - 1) : -r;
                hi[i] = (i < j) ? (r - 1) : r;
            }
            bool empty = false;
            for (int i = 0; i < d; ++i)
                if (i != j && lo[i] > hi[i]) empty = true;
            if (empty) continue;
            for (int i = 0; i < d; ++i)
                if (i != j) x.c[i] = lo[i];
            while (true) {
                fn(x);
                int k = 0;
                while (k < d && (k == j || ++x.c[k] > hi[k])) {
                    if (k != j) x.c[k] = lo[k];
                    ++k;
                }
                if (k == d) break;
            }
        }
    }
}

// min_i w_i: rho(x) >= c_inf ||x||_inf for all three p families.
inline double norm_linf_lower(const NormSpec& n) {
    double c = n.weights.c[0];
    for (int i = 1; i < n.dim(); ++i) c = std::min(c, n.weights.c[i]);
    return c;
}

// Upper bound on sum_{m > R} m^kappa e^{-a m}.  For kappa > 0 the log-linear
// bound m^kappa <= R^kappa e^{kappa (m-R)/R} applies when a > kappa/R; for
// kappa <= 0 the power factor is monotone and bounded by R^kappa.
inline double poly_exp_tail(double kappa, double a, double R) {
    if (!(a > 0)) return std::numeric_limits<double>::infinity();
    if (kappa <= 0) return std::pow(R, kappa) * std::exp(-a * R) / -std::expm1(-a);
    if (!(a * R > kappa)) return std::numeric_limits<double>::infinity();
    return std::pow(R, kappa) * std::exp(-a * R) / (a - kappa / R);
}

}  // namespace detail

struct TiltedSumOptions {
    long max_radius = 2'000'000;     // generic cap; lowered internally for d >= 2
    double divergence_cap = 1e12;    // declared divergent beyond this partial sum
    int stall_window = 1000;         // shells without increment decrease => divergent
};

// Sum of e^{t.x} J_x over Z^d \ {0} by growing linf shells.  Converges with a
// rigorous tail bound where the psi family licenses one; detects divergence
// via the dual norm, the family-specific facet rules, and generic backstops.
inline TiltedSum tilted_coupling_sum(const CouplingModel& m, const RealVec& t, double rel_tol,
                                     TiltedSumOptions opt = {}) {
    m.validate();
    if (!(rel_tol > 0)) throw std::invalid_argument("tilted_coupling_sum: rel_tol must be > 0");
    if (t.d != m.d) throw std::invalid_argument("tilted_coupling_sum: dimension mismatch");

    TiltedSum out;
    const double dual = dual_norm_eval(m.norm, t);
    if (dual > 1.0 + 1e-12) {  // terms grow along the maximizing direction
        out.status = SumStatus::Divergent;
        return out;
    }
    if (m.psi.kind == PsiKind::One && dual >= 1.0 - 1e-12) {
        // psi == 1 with t on the Wulff boundary: the terms e^{t.x - rho(x)}
        // are non-summable along the supporting cone for every weighted-lp
        // norm (facet => positive density of exact contacts; smooth boundary
        // => quadratic flattening with ~m^{(d-1)/2} near-contacts per shell).
        out.status = SumStatus::Divergent;
        return out;
    }

    const double c_inf = detail::norm_linf_lower(m.norm);
    const double shell_const = 2.0 * m.d * std::pow(3.0, m.d - 1) * m.j_scale;
    const double eps_gap = 1.0 - dual;  // > 0 strictly inside the Wulff shape

    long max_radius = opt.max_radius;
    if (m.d == 2) max_radius = std::min(max_radius, 60'000L);
    if (m.d >= 3) max_radius = std::min(max_radius, 1'200L);

    KahanSum acc;
    double prev_inc = std::numeric_limits<double>::infinity();
    int stall = 0;
    bool facet_contact_everywhere = true;  // every recent shell has an exact contact

    for (long r = 1; r <= max_radius; ++r) {
        KahanSum inc;
        bool contact = false;
        detail::for_each_linf_shell(m.d, static_cast<int>(r), [&](const LatticeVec& x) {
            double rho = norm_eval(m.norm, x);
            double expo = dot(t, x) - rho;
            if (expo > -1e-13 * std::max(rho, 1.0)) contact = true;
            inc.add(m.j_scale * m.psi.value(rho) * std::exp(expo));
        });
        acc.add(inc.value());
        out.truncation_radius = r;
        out.value = acc.value();
        if (!contact) facet_contact_everywhere = false;

        // Generic divergence backstops.
        if (out.value > opt.divergence_cap) {
            out.status = SumStatus::Divergent;
            return out;
        }
        if (inc.value() >= prev_inc && inc.value() > 0) {
            if (++stall >= opt.stall_window) {
                out.status = SumStatus::Divergent;
                return out;
            }
        } else {
            stall = 0;
        }
        prev_inc = inc.value();

        // Family-specific rigorous tail bound after shell r.
        double R = static_cast<double>(r);
        double tail = std::numeric_limits<double>::infinity();
        switch (m.psi.kind) {
            case PsiKind::Polynomial: {
                const double alpha = m.psi.alpha;
                if (alpha > m.d && dual <= 1.0 + 1e-12) {
                    // sum_{m>R} m^{d-1} (c_inf m)^{-alpha} <= R^{d-alpha} c_inf^{-alpha}/(alpha-d)
                    tail = shell_const * std::pow(c_inf, -alpha) * std::pow(R, m.d - alpha) / (alpha - m.d);
                }
                if (eps_gap > 1e-12) {
                    // strictly inside the Wulff shape the geometric factor
                    // e^{-eps_gap rho(x)} sharpens the tail regardless of alpha
                    double geo = shell_const * std::pow(c_inf, -alpha) *
                                 detail::poly_exp_tail(m.d - 1.0 - alpha, eps_gap * c_inf, R);
                    tail = std::min(tail, geo);
                }
                if (alpha <= m.d && facet_contact_everywhere && dual >= 1.0 - 1e-12 && r >= 32) {
                    // exact contacts persist on a facet: shell increments are
                    // >= c m^{f - alpha} with facet lattice dimension f >= d-1,
                    // hence non-summable for alpha <= d.
                    out.status = SumStatus::Divergent;
                    return out;
                }
                break;
            }
            case PsiKind::StretchedExp: {
                // terms <= e^{-c rho^eta} <= e^{-a m^eta}, a = c c_inf^eta;
                // after u = m^eta the tail is an incomplete-gamma bound.
                const double a = m.psi.c * std::pow(c_inf, m.psi.eta);
                const double kappa = m.d / m.psi.eta - 1.0;
                const double u0 = std::pow(R, m.psi.eta);
                if (a * u0 > kappa) {
                    tail = shell_const / m.psi.eta * detail::poly_exp_tail(kappa, a, u0);
                }
                break;
            }
            case PsiKind::One: {
                // strictly inside the Wulff shape: terms <= e^{-eps_gap rho(x)}.
                const double a = eps_gap * c_inf;
                tail = shell_const * detail::poly_exp_tail(m.d - 1.0, a, R);
                break;
            }
        }
        if (tail <= rel_tol * std::max(out.value, 1e-300)) {
            out.tail_bound = tail;
            out.status = SumStatus::Converged;
            return out;
        }
    }
    out.status = SumStatus::Indeterminate;
    return out;
}

struct SaturationWitness {
    bool positive = false;       // beta_sat(s) > 0 per the explicit criterion
    RealVec t;                   // witness dual vector when positive
    std::vector<RealVec> tested; // all dual vectors probed (centroid + extremes)
};

// Explicit saturation criterion: beta_sat(s) > 0 iff some dual vector t to s
// has J(t) < infinity.  For facets, the centroid and all extreme points are
// probed; the tested list records which.
inline SaturationWitness saturation_criterion(const CouplingModel& m, const RealVec& s,
                                              double rel_tol = 1e-9) {
    DualVectorResult dv = dual_vector(m.norm, s);
    SaturationWitness w;
    w.tested.push_back(dv.t);
    for (const auto& e : dv.extremes) {
        bool dup = false;
        for (const auto& c : w.tested)
            if ((c - e).euclid() < 1e-14) dup = true;
        if (!dup) w.tested.push_back(e);
    }
    for (const auto& cand : w.tested) {
        TiltedSum ts = tilted_coupling_sum(m, cand, rel_tol);
        if (ts.finite()) {
            w.positive = true;
            w.t = cand;
            return w;
        }
    }
    w.positive = false;
    return w;
}

}  // namespace lrising
