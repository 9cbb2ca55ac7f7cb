#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lrising/krw.hpp"
#include "lrising/rng.hpp"

using namespace lrising;

namespace {

FiniteGraph path3(double J01, double J12) {
    FiniteGraph g;
    g.dim = 1;
    g.sites = {LatticeVec{0}, LatticeVec{1}, LatticeVec{2}};
    g.add_edge(0, 1, J01);
    g.add_edge(1, 2, J12);
    return g;
}

CouplingModel model_m1() {
    CouplingModel m;
    m.d = 1;
    m.norm = NormSpec::l2(1);
    m.psi = PsiSpec::polynomial(3.0);
    return m;
}

}  // namespace

TEST_CASE("path graph: unique path gives the product weight", "[krw]") {
    double lambda = 0.5, J = 0.8;  // per-edge weight a = lambda J = 0.4
    FiniteGraph g = path3(J, J);
    auto r = krw::green_saw_exact(g, lambda, 0, 2, 8);
    double a = lambda * J;
    CHECK(r.value == Catch::Approx(a * a).margin(1e-14));
    CHECK(r.paths == 1);

    // adding the direct edge 0-2 with weight b adds one path
    FiniteGraph h = path3(J, J);
    double Jb = 0.3;
    h.add_edge(0, 2, Jb);
    auto rh = krw::green_saw_exact(h, lambda, 0, 2, 8);
    CHECK(rh.value == Catch::Approx(lambda * Jb + a * a).margin(1e-14));
}

TEST_CASE("diagonal includes the empty path", "[krw]") {
    // path graph: returning to the start would reuse an edge, so only the
    // empty path contributes
    FiniteGraph g = path3(0.5, 0.5);
    auto r = krw::green_saw_exact(g, 0.1, 1, 1, 6);
    CHECK(r.value == Catch::Approx(1.0).margin(1e-14));
    CHECK(krw::green_walk_neumann(g, 0.0 + 1e-300, 1, 1) == Catch::Approx(1.0).margin(1e-9));

    // triangle: two oriented edge-self-avoiding loops of length 3
    FiniteGraph tri = path3(0.5, 0.5);
    tri.add_edge(0, 2, 0.5);
    double a = 0.1 * 0.5;
    auto rt = krw::green_saw_exact(tri, 0.1, 1, 1, 6);
    CHECK(rt.value == Catch::Approx(1.0 + 2.0 * a * a * a).margin(1e-14));
}

TEST_CASE("two-vertex Neumann row sums the back-and-forth geometric series", "[krw]") {
    FiniteGraph g;
    g.dim = 1;
    g.sites = {LatticeVec{0}, LatticeVec{1}};
    g.add_edge(0, 1, 1.0);
    double a = 0.35;  // lambda J
    double got = krw::green_walk_neumann(g, a, 0, 1, 1e-13);
    CHECK(got == Catch::Approx(a / (1.0 - a * a)).margin(1e-10));
    double diag = krw::green_walk_neumann(g, a, 0, 0, 1e-13);
    CHECK(diag == Catch::Approx(1.0 / (1.0 - a * a)).margin(1e-10));
}

TEST_CASE("lambda -> 0 limit is the indicator", "[krw]") {
    FiniteGraph g = path3(1.0, 1.0);
    auto row = krw::green_walk_neumann_row(g, 1e-12, 0, 1e-10);
    REQUIRE(row.converged);
    CHECK(row.row[0] == Catch::Approx(1.0).margin(1e-10));
    CHECK(row.row[2] == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("Neumann dominates the self-avoiding sum on tiny graphs", "[krw][prop]") {
    Rng rng(9);
    for (int it = 0; it < 20; ++it) {
        FiniteGraph g;
        g.dim = 1;
        int n = 4 + rng.below_int(2);
        for (int i = 0; i < n; ++i) g.sites.push_back(LatticeVec{i});
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.uniform() < 0.7) g.add_edge(i, j, 0.2 + rng.uniform());
        double lambda = 0.05 + 0.1 * rng.uniform();
        int x = 0, y = n - 1;
        krw::SawResult saw;
        try {
            saw = krw::green_saw_exact(g, lambda, x, y, 10);
        } catch (const std::invalid_argument&) {
            continue;  // disconnected draw
        }
        double walk = krw::green_walk_neumann(g, lambda, x, y, 1e-12);
        CHECK(walk >= saw.value - 1e-12);
        // single-edge path lower bound
        for (const auto& e : g.edges)
            if ((e.u == x && e.v == y) || (e.u == y && e.v == x))
                CHECK(walk >= lambda * e.J - 1e-14);
    }
}

TEST_CASE("Neumann row is monotone in lambda and in box size", "[krw][prop]") {
    CouplingModel m1 = model_m1();
    FiniteGraph small = make_box_graph(m1, 8, BoundaryCondition::Free);
    FiniteGraph large = make_box_graph(m1, 12, BoundaryCondition::Free);
    int o_small = box_index(1, 8, LatticeVec{0});
    int o_large = box_index(1, 12, LatticeVec{0});
    auto r1 = krw::green_walk_neumann_row(small, 0.05, o_small, 1e-12);
    auto r2 = krw::green_walk_neumann_row(small, 0.08, o_small, 1e-12);
    auto r3 = krw::green_walk_neumann_row(large, 0.05, o_large, 1e-12);
    REQUIRE(r1.converged);
    for (int x = -8; x <= 8; ++x) {
        double g1 = r1.row[box_index(1, 8, LatticeVec{x})];
        double g2 = r2.row[box_index(1, 8, LatticeVec{x})];
        double g3 = r3.row[box_index(1, 12, LatticeVec{x})];
        CHECK(g2 >= g1 - 1e-14);
        CHECK(g3 >= g1 - 1e-14);
    }
}

TEST_CASE("saw cap excluding all paths is rejected", "[krw]") {
    FiniteGraph g = path3(1.0, 1.0);
    CHECK_THROWS_AS(krw::green_saw_exact(g, 0.5, 0, 2, 1), std::invalid_argument);
}

TEST_CASE("divergent series is flagged", "[krw]") {
    FiniteGraph g;
    g.dim = 1;
    g.sites = {LatticeVec{0}, LatticeVec{1}};
    g.add_edge(0, 1, 1.0);
    auto r = krw::green_walk_neumann_row(g, 1.5, 0, 1e-10);  // lambda J > 1
    CHECK(r.divergent);
    CHECK(krw::green_walk_neumann(g, 1.5, 0, 1) == std::numeric_limits<double>::infinity());
}

TEST_CASE("decay ratio profile is bounded in the saturated regime", "[krw]") {
    CouplingModel m1 = model_m1();
    auto prof = krw::decay_ratio_profile(m1, 0.05, 24, RealVec{1.0}, {2, 4, 6, 8, 10, 12, 14});
    CHECK(prof.contraction_certified);
    CHECK(prof.bounded);
    for (const auto& p : prof.points) {
        CHECK(p.G >= 0.05 * p.J - 1e-16);  // single-step path dominates from below
        CHECK(p.ratio > 0);
    }

    // psi = 1 fails the criterion and is rejected
    CouplingModel one = m1;
    one.psi = PsiSpec::one();
    CHECK_THROWS_AS(krw::decay_ratio_profile(one, 0.05, 10, RealVec{1.0}, {2, 3, 4}),
                    std::invalid_argument);
}
