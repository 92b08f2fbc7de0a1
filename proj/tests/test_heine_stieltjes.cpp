#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "qdkit/error.hpp"
#include "qdkit/heine_stieltjes.hpp"
#include "qdkit/topology.hpp"

using namespace qd;
using std::numbers::pi;

namespace {

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::InvalidInput;
}

HSProblem chebyshev(int n) { return {Polynomial({-1.0, 0.0, 1.0}), Polynomial({0.0, 1.0}), n}; }

HSProblem lame(int n) {
    const Polynomial P = Polynomial::from_roots(std::vector<cplx>{0.0, 1.0, 2.0});
    return {P, cplx(0.5) * P.derivative(), n};
}

// P S'' + Q S' + V S at z from the logarithmic derivatives of S, relative to the size of the terms.
double ode_defect(const HSProblem& prob, const HSSolution& sol, cplx z) {
    cplx s{1.0}, l1{}, l2{};
    for (cplx r : sol.s_roots) {
        s *= z - r;
        l1 += 1.0 / (z - r);
        l2 += 1.0 / ((z - r) * (z - r));
    }
    const cplx d1 = s * l1, d2 = s * (l1 * l1 - l2);
    const cplx a = prob.P(z) * d2, b = prob.Q(z) * d1, c = sol.V(z) * s;
    return std::abs(a + b + c) / (std::abs(a) + std::abs(b) + std::abs(c));
}

double electrostatic_defect(const HSProblem& prob, const std::vector<cplx>& roots) {
    double worst = 0.0;
    for (std::size_t k = 0; k < roots.size(); ++k) {
        cplx f = prob.Q(roots[k]) / prob.P(roots[k]);
        for (std::size_t j = 0; j < roots.size(); ++j)
            if (j != k) f += 2.0 / (roots[k] - roots[j]);
        worst = std::max(worst, std::abs(f));
    }
    return worst;
}

const std::vector<cplx> probes{cplx(0.3, 0.7), cplx(-1.4, 0.2), cplx(2.5, -1.1)};

}  // namespace

TEST_CASE("Chebyshev case") {
    SUBCASE("n = 2") {
        auto sols = solve_stieltjes(chebyshev(2), 20);
        REQUIRE(sols.size() == 1);
        const auto& s = sols[0];
        CHECK(std::abs(s.s_roots[0] + 1.0 / std::sqrt(2.0)) < 1e-12);
        CHECK(std::abs(s.s_roots[1] - 1.0 / std::sqrt(2.0)) < 1e-12);
        REQUIRE(s.V.degree() == 0);
        CHECK(std::abs(s.V[0] + 4.0) < 1e-10);
        CHECK(s.residual < 1e-10);
        CHECK(s.electrostatic_residual < 1e-12);
    }
    SUBCASE("n = 1") {
        auto sols = solve_stieltjes(chebyshev(1), 5);
        REQUIRE(sols.size() == 1);
        CHECK(std::abs(sols[0].s_roots[0]) < 1e-13);
        CHECK(std::abs(sols[0].V[0] + 1.0) < 1e-12);
    }
    SUBCASE("higher degrees: cosine roots and V = -n^2") {
        for (int n = 3; n <= 9; ++n) {
            auto sols = solve_stieltjes(chebyshev(n), 30);
            REQUIRE(sols.size() == 1);
            for (int k = 0; k < n; ++k) {
                const double expected = std::cos((n - k - 0.5) * pi / n);
                CHECK(std::abs(sols[0].s_roots[static_cast<std::size_t>(k)] - expected) < 1e-10);
            }
            CHECK(std::abs(sols[0].V[0] + double(n * n)) < 1e-8 * n * n);
        }
    }
}

TEST_CASE("Heine count") {
    CHECK(heine_count(2, 3) == 3);
    CHECK(heine_count(1, 3) == 2);
    CHECK(heine_count(7, 2) == 1);
    CHECK(heine_count(3, 4) == 10);

    SUBCASE("Lame equation") {
        for (int n : {1, 2, 3}) {
            auto e = enumerate_solutions(lame(n), 300);
            CHECK(e.complete);
            CHECK(e.count == static_cast<int>(heine_count(n, 3)));
            for (const auto& s : e.solutions) {
                CHECK(s.residual < 1e-10);
                for (cplx z : probes) CHECK(ode_defect(lame(n), s, z) < 1e-10);
                CHECK(electrostatic_defect(lame(n), s.s_roots) < 1e-9);
                CHECK(localization_check(s, lame(n), 0.0));
            }
        }
    }
    SUBCASE("a tiny budget reports a partial count") {
        auto e = enumerate_solutions(lame(3), 1);
        CHECK(e.count <= 1);
        CHECK_FALSE(e.complete);
        CHECK(e.expected == 4);
    }
}

TEST_CASE("random cubic problems") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-2.0, 2.0), w(0.2, 2.0);
    int checked = 0;
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<cplx> roots;
        for (int i = 0; i < 3; ++i) roots.emplace_back(u(rng), u(rng));
        const Polynomial P = Polynomial::from_roots(roots);
        // Positive residues keep every root of S inside the hull of the roots of P.
        Polynomial Q;
        for (int i = 0; i < 3; ++i) {
            std::vector<cplx> others;
            for (int j = 0; j < 3; ++j)
                if (j != i) others.push_back(roots[static_cast<std::size_t>(j)]);
            Q = Q + cplx(w(rng)) * Polynomial::from_roots(others);
        }
        const HSProblem prob{P, Q, 2};
        auto e = enumerate_solutions(prob, 400);
        CHECK(e.count <= 3);
        for (const auto& s : e.solutions) {
            for (cplx z : probes) CHECK(ode_defect(prob, s, z) < 1e-8);
            CHECK(localization_check(s, prob, 0.0));
        }
        if (e.complete) ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("localization") {
    const auto prob = chebyshev(2);
    auto sol = solve_stieltjes(prob, 5)[0];
    CHECK(localization_check(sol, prob, 0.0));
    auto moved = sol;
    moved.s_roots[1] = 10.0;
    CHECK_FALSE(localization_check(moved, prob, 0.0));
    CHECK(localization_check(moved, prob, 9.5));

    const auto hull = convex_hull({0.0, 1.0, cplx(0, 1), cplx(0.2, 0.2), cplx(1, 1)});
    CHECK(hull.size() == 4);
    CHECK(distance_to_hull(cplx(0.5, 0.5), hull) == 0.0);
    CHECK(std::abs(distance_to_hull(cplx(2, 0.5), hull) - 1.0) < 1e-15);
    CHECK(std::abs(distance_to_hull(cplx(0.5, 3), convex_hull({-1.0, 1.0})) - 3.0) < 1e-15);
}

TEST_CASE("errors") {
    CHECK(code_of([] { solve_stieltjes({Polynomial({0.0, 1.0}), Polynomial({1.0}), 2}, 3); }) == Errc::InvalidInput);
    CHECK(code_of([] { solve_stieltjes({Polynomial({-1.0, 0.0, 1.0}), Polynomial({0.0, 0.0, 1.0}), 2}, 3); }) ==
          Errc::InvalidInput);
    CHECK(code_of([] { solve_stieltjes(chebyshev(0), 3); }) == Errc::InvalidInput);
    CHECK(code_of([] { certify(chebyshev(2), {0.5, 0.5}); }) == Errc::RootCollision);
    CHECK(code_of([] {
              HSOptions o;
              o.max_iterations = 0;
              solve_stieltjes(chebyshev(4), 3, o);
          }) == Errc::NoConvergence);
}

TEST_CASE("Chebyshev chain approaches the arcsine law") {
    const auto prob = chebyshev(2);
    const auto chain = build_chain(prob, 2, 12, 20);
    REQUIRE(chain.size() == 11);
    const std::vector<std::vector<cplx>> support{{-1.0, 1.0}};
    const auto rep = asymptotic_compare(chain, prob, support, {2.0});
    CHECK(rep.decreasing);
    CHECK(rep.steps.back().transform_residual < 5e-2);
    for (const auto& st : rep.steps) CHECK(st.support_distance < 1e-12);

    // Closed form: C(2) = 1/sqrt(3) for the arcsine law.
    cplx c{};
    for (cplx r : chain.back().s_roots) c += 1.0 / (2.0 - r);
    CHECK(std::abs(c / 12.0 - 1.0 / std::sqrt(3.0)) < 5e-2);

    SUBCASE("the limiting differential has the chain's support as its critical graph") {
        const auto limit = rep.steps.back().monic_V;
        const auto q = RationalQD::make(limit, prob.P, -1);
        TraceField field(q);
        const auto cg = build_critical_graph(launch_critical(field), field);
        REQUIRE(cg.edges.size() == 1);
        for (cplx z : cg.edges[0].polyline) CHECK(std::abs(z.imag()) < 1e-6);
    }

    SUBCASE("an unsettled chain is rejected") {
        const auto lchain = build_chain(lame(1), 1, 2, 50);
        CHECK(code_of([&] { asymptotic_compare(lchain, lame(1)); }) == Errc::NonConvergingChain);
    }
}
