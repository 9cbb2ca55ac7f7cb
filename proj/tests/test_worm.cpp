#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lrising/exact.hpp"
#include "lrising/worm.hpp"

using namespace lrising;
namespace ex = lrising::exact;

namespace {

CouplingModel model_m1() {
    CouplingModel m;
    m.d = 1;
    m.norm = NormSpec::l2(1);
    m.psi = PsiSpec::polynomial(3.0);
    return m;
}

// closed-visit class frequencies per edge, pooled over independent chains so
// the error bars come from genuine replicas
struct ClassStats {
    std::vector<Estimate> odd, positive;
};

ClassStats worm_class_stats(const FiniteGraph& g, double beta, std::vector<int> sources,
                            long steps_per_chain, int n_chains, std::uint64_t seed) {
    size_t m = g.edges.size();
    std::vector<std::vector<double>> odd_means(m), pos_means(m);
    for (int c = 0; c < n_chains; ++c) {
        worm::WormChain w(g, beta, sources);
        w.prepare_augmentation();
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(c));
        w.init(rng);
        for (long s = 0; s < steps_per_chain / 4; ++s) w.step(rng);
        std::vector<long> odd_n(m, 0), pos_n(m, 0);
        long closed = 0;
        for (long s = 0; s < steps_per_chain; ++s) {
            w.step(rng);
            if (s % 8 != 0 || !w.closed()) continue;
            ++closed;
            fk::PercolationConfig trace = w.augmented_trace(rng);
            for (size_t i = 0; i < m; ++i) {
                const Edge& e = g.edges[i];
                if (w.edge_parity(e.u, e.v)) ++odd_n[i];
            }
            for (const auto& [a, b] : trace.open)
                for (size_t i = 0; i < m; ++i)
                    if ((a == g.edges[i].u && b == g.edges[i].v) ||
                        (a == g.edges[i].v && b == g.edges[i].u))
                        ++pos_n[i];
        }
        REQUIRE(closed > 100);
        for (size_t i = 0; i < m; ++i) {
            odd_means[i].push_back(static_cast<double>(odd_n[i]) / closed);
            pos_means[i].push_back(static_cast<double>(pos_n[i]) / closed);
        }
    }
    auto pool = [&](const std::vector<double>& v) {
        Estimate e;
        e.n_samples = static_cast<long>(v.size());
        double mu = 0;
        for (double x : v) mu += x;
        mu /= v.size();
        double var = 0;
        for (double x : v) var += (x - mu) * (x - mu);
        var /= (v.size() - 1);
        e.mean = mu;
        e.stderr_ = std::sqrt(var / v.size());
        return e;
    };
    ClassStats st;
    for (size_t i = 0; i < m; ++i) {
        st.odd.push_back(pool(odd_means[i]));
        st.positive.push_back(pool(pos_means[i]));
    }
    return st;
}

}  // namespace

TEST_CASE("worm preserves the parity invariant", "[worm]") {
    CouplingModel m1 = model_m1();
    FiniteGraph g = make_chain_graph(m1, 5, BoundaryCondition::Plus);
    worm::WormChain w(g, 0.8, {0, 3});
    Rng rng(2);
    w.init(rng);
    for (int s = 0; s < 5000; ++s) {
        w.step(rng);
        if (s % 100 == 0) w.check_invariant();
    }
    SUCCEED("invariant held for 5000 steps");
}

TEST_CASE("beta = 0 keeps the sourceless parity configuration empty", "[worm]") {
    CouplingModel m1 = model_m1();
    FiniteGraph g = make_chain_graph(m1, 4, BoundaryCondition::Free);
    worm::WormChain w(g, 0.0, {});
    Rng rng(5);
    w.init(rng);
    for (int s = 0; s < 2000; ++s) w.step(rng);
    CHECK(w.odd_edges().empty());
}

TEST_CASE("single edge with sources is always odd", "[worm]") {
    FiniteGraph g;
    g.dim = 1;
    g.sites = {LatticeVec{0}, LatticeVec{1}};
    g.add_edge(0, 1, 1.0);
    worm::WormChain w(g, 0.6, {0, 1});
    Rng rng(3);
    w.init(rng);
    long closed_odd = 0, closed = 0;
    for (int s = 0; s < 20000; ++s) {
        w.step(rng);
        if (w.closed()) {
            ++closed;
            if (w.edge_parity(0, 1)) ++closed_odd;
        }
    }
    REQUIRE(closed > 0);
    CHECK(closed_odd == closed);
}

TEST_CASE("augmentation promotion probability", "[worm]") {
    // beta J = 1: (cosh 1 - 1)/cosh 1
    double want = (std::cosh(1.0) - 1.0) / std::cosh(1.0);
    CHECK(want == Catch::Approx(1.0 - 1.0 / std::cosh(1.0)).margin(1e-15));
    FiniteGraph g;
    g.dim = 1;
    g.sites = {LatticeVec{0}, LatticeVec{1}};
    g.add_edge(0, 1, 1.0);
    worm::WormChain w(g, 1.0, {});
    w.prepare_augmentation();
    Rng rng(4);
    w.init(rng);  // parity all even
    long promoted = 0;
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) {
        auto trace = w.augmented_trace(rng);
        if (!trace.open.empty()) ++promoted;
    }
    double phat = static_cast<double>(promoted) / draws;
    double se = std::sqrt(want * (1 - want) / draws);
    CHECK(std::abs(phat - want) <= 3.0 * se);

    // beta = 0: no promotions possible
    worm::WormChain w0(g, 0.0, {});
    w0.prepare_augmentation();
    w0.init(rng);
    for (int i = 0; i < 100; ++i) CHECK(w0.augmented_trace(rng).open.empty());
}

TEST_CASE("class frequencies match exact marginals on a ghosted chain", "[worm][mc]") {
    CouplingModel m1 = model_m1();
    FiniteGraph g = make_chain_graph(m1, 5, BoundaryCondition::Plus);
    double beta = 0.9;
    auto stats = worm_class_stats(g, beta, {0, 3}, 4000000, 8, 11);
    for (size_t i = 0; i < g.edges.size(); ++i) {
        auto marg = ex::current_class_marginal(g, beta, ex::vset({0, 3}), static_cast<int>(i));
        const Estimate& odd = stats.odd[i];
        const Estimate& pos = stats.positive[i];
        CAPTURE(i, odd.mean, marg[2], odd.stderr_);
        CHECK(std::abs(odd.mean - marg[2]) <= 3.0 * std::max(odd.stderr_, 1e-3));
        CHECK(std::abs(pos.mean - (marg[1] + marg[2])) <= 3.0 * std::max(pos.stderr_, 1e-3));
    }
}

TEST_CASE("two-point profile matches exact correlations (free chain)", "[worm][mc]") {
    CouplingModel m1 = model_m1();
    FiniteGraph g = make_chain_graph(m1, 6, BoundaryCondition::Free);
    double beta = 1.2;
    std::vector<LatticeVec> xs = {LatticeVec{1}, LatticeVec{2}, LatticeVec{3}};
    worm::WormChain w(g, beta, {});
    worm::TwoPointCollector coll(g, RealVec{0.0}, xs);
    Rng rng = Rng::stream(21, 0);
    w.init(rng);
    for (int s = 0; s < 30000; ++s) w.step(rng);
    for (long s = 0; s < 600000; ++s) {
        w.step(rng);
        coll.measure(w);
    }
    auto prof = coll.profile();
    for (size_t k = 0; k < xs.size(); ++k) {
        // exact translation-averaged two-point over the chain
        int x = xs[k].c[0];
        KahanSum avg;
        int count = 0;
        for (int u = 0; u + x < 6; ++u) {
            avg.add(ex::two_point_spin(g, beta, BoundaryCondition::Free, u, u + x));
            ++count;
        }
        double want = avg.value() / count;
        const Estimate& e = prof.values[k];
        CAPTURE(x, e.mean, want, e.stderr_);
        CHECK(std::abs(e.mean - want) <= 3.0 * std::max(e.stderr_, 3e-3));
    }
}

TEST_CASE("tilted and untilted worms estimate the same profile", "[worm][mc]") {
    CouplingModel m1 = model_m1();
    FiniteGraph g = make_box_graph(m1, 6, BoundaryCondition::Free);
    double beta = 0.3;
    std::vector<LatticeVec> xs = {LatticeVec{2}, LatticeVec{4}};
    auto run = [&](RealVec tilt, std::uint64_t seed) {
        worm::WormChain w(g, beta, {}, tilt);
        worm::TwoPointCollector coll(g, tilt, xs);
        Rng rng = Rng::stream(seed, 0);
        w.init(rng);
        for (int s = 0; s < 50000; ++s) w.step(rng);
        for (long s = 0; s < 2000000; ++s) {
            w.step(rng);
            coll.measure(w);
        }
        return coll.profile();
    };
    auto flat = run(RealVec{0.0}, 1);
    auto tilted = run(RealVec{1.0}, 2);
    for (size_t k = 0; k < xs.size(); ++k) {
        double sigma = std::hypot(flat.values[k].stderr_, tilted.values[k].stderr_);
        CAPTURE(k, flat.values[k].mean, tilted.values[k].mean, sigma);
        CHECK(std::abs(flat.values[k].mean - tilted.values[k].mean) <=
              3.5 * std::max(sigma, 1e-4));
    }
}

TEST_CASE("disconnection estimator matches the exact double-current value", "[worm][mc]") {
    CouplingModel m1 = model_m1();
    FiniteGraph g = make_chain_graph(m1, 5, BoundaryCondition::Plus);
    double beta = 0.7;
    double want_single = ex::disconnection_prob(g, beta, 0, 3, false);
    double want_double = ex::disconnection_prob(g, beta, 0, 3, true);
    worm::DisconnectionConfig cfg;
    cfg.steps = 400000;
    cfg.burn_in = 20000;
    cfg.stride = 4;
    Estimate es = worm::estimate_disconnection(g, beta, 0, 3, false, 5, cfg);
    Estimate ed = worm::estimate_disconnection(g, beta, 0, 3, true, 6, cfg);
    CAPTURE(es.mean, want_single, es.stderr_, ed.mean, want_double, ed.stderr_);
    CHECK(std::abs(es.mean - want_single) <= 3.0 * std::max(es.stderr_, 2e-3));
    CHECK(std::abs(ed.mean - want_double) <= 3.0 * std::max(ed.stderr_, 2e-3));
}

TEST_CASE("combined estimator reproduces the truncated two-point on a chain", "[worm][mc]") {
    CouplingModel m1 = model_m1();
    FiniteGraph g = make_chain_graph(m1, 8, BoundaryCondition::Plus);
    double beta = 0.4;
    int x = 5;
    double truncated = ex::truncated_two_point(g, beta, 0, x);
    double two_point = ex::two_point_spin(g, beta, BoundaryCondition::Plus, 0, x);
    worm::DisconnectionConfig cfg;
    cfg.steps = 400000;
    cfg.stride = 4;
    Estimate dis = worm::estimate_disconnection(g, beta, 0, x, true, 9, cfg);
    double combined = two_point * dis.mean;
    double sigma = two_point * dis.stderr_;
    CHECK(std::abs(combined - truncated) <= 3.0 * std::max(sigma, 2e-3));
}

TEST_CASE("worm rejects infeasible sources", "[worm]") {
    CouplingModel m1 = model_m1();
    FiniteGraph g = make_chain_graph(m1, 4, BoundaryCondition::Free);
    CHECK_THROWS_AS(worm::WormChain(g, 0.5, {0}), std::invalid_argument);
    CHECK_THROWS_AS(worm::WormChain(g, 0.5, {0, 9}), std::invalid_argument);
}

TEST_CASE("identical seeds reproduce the worm trajectory", "[worm]") {
    CouplingModel m1 = model_m1();
    FiniteGraph g = make_chain_graph(m1, 6, BoundaryCondition::Plus);
    auto run = [&](std::uint64_t seed) {
        worm::WormChain w(g, 0.8, {0, 5});
        Rng rng = Rng::stream(seed, 0);
        w.init(rng);
        std::vector<int> heads;
        for (int s = 0; s < 500; ++s) {
            w.step(rng);
            heads.push_back(w.head());
        }
        return heads;
    };
    CHECK(run(123) == run(123));
}
