#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "qdkit/error.hpp"
#include "qdkit/topology.hpp"

using namespace qd;
using std::numbers::pi;

namespace {

RationalQD make_qd(std::vector<cplx> num, std::vector<cplx> den, int sign = 1) {
    return RationalQD::make(Polynomial(std::move(num)), Polynomial(std::move(den)), sign);
}

// -p'^2 dz^2 / (p^2 - 1): pullback of the arcsine differential by a polynomial p.
RationalQD pullback(const Polynomial& p) {
    const Polynomial dp = p.derivative();
    return RationalQD::make(dp * dp, p * p - Polynomial({1.0}), -1);
}

struct Pipeline {
    TraceField field;
    CriticalGraph cg;
    BoundarySystem bs;
    ReebGraph reeb;
    explicit Pipeline(const RationalQD& q)
        : field(q), cg(build_critical_graph(launch_critical(field), field)), bs(boundary_system(cg)),
          reeb(build_reeb(field, cg, bs)) {}
};

// Cycle count of sigma0 o sigma1 as a permutation of flags, for closed fat graphs.
int permutation_cycles(const FatGraph& fg) {
    const std::size_t n = fg.flags.size();
    std::vector<char> seen(n, 0);
    int cycles = 0;
    for (std::size_t f = 0; f < n; ++f) {
        if (seen[f]) continue;
        ++cycles;
        for (std::size_t g = f; !seen[g]; g = static_cast<std::size_t>(fg.sigma0[fg.sigma1[g]])) seen[g] = 1;
    }
    return cycles;
}

CriticalGraph abstract_graph(std::vector<int> degrees, std::vector<std::array<int, 4>> edges) {
    CriticalGraph cg;
    for (std::size_t v = 0; v < degrees.size(); ++v) {
        GraphVertex gv;
        gv.id = static_cast<int>(v);
        gv.degree = degrees[v];
        cg.vertices.push_back(gv);
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
        GraphEdge e;
        e.id = static_cast<int>(i);
        e.tail = {edges[i][0], edges[i][1]};
        e.head = {edges[i][2], edges[i][3]};
        e.psi_length = 1.0;
        cg.edges.push_back(e);
    }
    cg.finalize();
    return cg;
}

void check_reeb_invariants(const Pipeline& p) {
    // Every boundary orbit belongs to exactly one Reeb edge, every Reeb edge has one or two boundaries.
    std::vector<int> hits(p.bs.boundaries.size(), 0);
    for (const auto& e : p.reeb.edges) {
        REQUIRE(e.tail_boundary >= 0);
        ++hits[e.tail_boundary];
        if (e.head_boundary >= 0 && e.head_boundary != e.tail_boundary) ++hits[e.head_boundary];
        if (e.length.is_infinite()) CHECK(e.is_leaf());
        if (e.kind == DomainKind::Ring) CHECK((e.length.is_finite() && e.width.is_finite()));
        if (e.kind == DomainKind::Circle) CHECK((e.length.is_infinite() && e.width.is_finite()));
    }
    for (int h : hits) CHECK(h == 1);
    for (int chi : euler_characteristics(p.cg, p.bs)) CHECK(chi == 2);
    CHECK(width_mismatch(p.reeb, p.bs) < 1e-4);
}

}  // namespace

TEST_CASE("critical graph of the arcsine differential") {
    Pipeline p(make_qd({1.0}, {-1.0, 0.0, 1.0}, -1));
    REQUIRE(p.cg.vertices.size() == 2);
    REQUIRE(p.cg.edges.size() == 1);
    const auto& e = p.cg.edges[0];
    CHECK(std::abs(e.psi_length.value() - pi) < 1e-6);
    double worst = 0.0;
    for (auto z : e.polyline) worst = std::max({worst, std::abs(z.imag()), std::max(0.0, std::abs(z.real()) - 1.0)});
    CHECK(worst < 1e-4);

    REQUIRE(p.bs.fat_graphs.size() == 1);
    const auto& fg = p.bs.fat_graphs[0];
    CHECK(fg.flags.size() == 2);
    REQUIRE(fg.orbits.size() == 1);
    CHECK(fg.orbits[0].darts.size() == 2);
    CHECK(permutation_cycles(fg) == 1);

    REQUIRE(p.reeb.edges.size() == 1);
    const auto& r = p.reeb.edges[0];
    CHECK(r.kind == DomainKind::Circle);
    CHECK(r.length.is_infinite());
    CHECK(std::abs(r.width.value() - 2 * pi) < 1e-4);
    check_reeb_invariants(p);
}

TEST_CASE("z dz^2 has three open critical rays and end domains") {
    Pipeline p(make_qd({0.0, 1.0}, {1.0}));
    CHECK(p.cg.vertices.size() == 1);
    REQUIRE(p.cg.edges.size() == 3);
    for (const auto& e : p.cg.edges) {
        CHECK(e.is_open());
        CHECK(e.psi_length.is_infinite());
    }
    REQUIRE(p.reeb.edges.size() == 3);
    for (const auto& e : p.reeb.edges) {
        CHECK(e.kind == DomainKind::End);
        CHECK(e.length.is_infinite());
        CHECK(e.width.is_infinite());
    }
    check_reeb_invariants(p);
}

TEST_CASE("differentials without finite critical points") {
    for (const auto& q : {make_qd({1.0}, {1.0}), make_qd({1.0}, {0.0, 0.0, 1.0}, -1)}) {
        TraceField field(q);
        auto cg = build_critical_graph(launch_critical(field), field);
        CHECK(cg.vertices.empty());
        CHECK(cg.edges.empty());
        auto bs = boundary_system(cg);
        try {
            build_reeb(field, cg, bs);
            FAIL("expected NoFiniteCritical");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::NoFiniteCritical);
        }
    }
}

TEST_CASE("fat graph boundary orbits on abstract graphs") {
    SUBCASE("planar theta graph") {
        // v0 slots: middle, upper, lower; v1 slots: upper, middle, lower (counterclockwise).
        auto cg = abstract_graph({3, 3}, {{0, 1, 1, 0}, {0, 0, 1, 1}, {0, 2, 1, 2}});
        auto fg = fat_graph(cg, 0);
        CHECK(fg.flags.size() == 6);
        CHECK(fg.orbits.size() == 3);
        CHECK(permutation_cycles(fg) == 3);
        auto bs = boundary_system(cg);
        CHECK(euler_characteristics(cg, bs)[0] == 2);
    }
    SUBCASE("theta graph with a twisted vertex is a torus graph") {
        auto cg = abstract_graph({3, 3}, {{0, 0, 1, 0}, {0, 1, 1, 1}, {0, 2, 1, 2}});
        auto fg = fat_graph(cg, 0);
        CHECK(fg.orbits.size() == static_cast<std::size_t>(permutation_cycles(fg)));
        CHECK(fg.orbits.size() == 1);
        auto bs = boundary_system(cg);
        CHECK(euler_characteristics(cg, bs)[0] == 0);
    }
    SUBCASE("single loop") {
        auto cg = abstract_graph({2}, {{0, 0, 0, 1}});
        auto fg = fat_graph(cg, 0);
        CHECK(fg.flags.size() == 2);
        CHECK(fg.orbits.size() == 2);
        CHECK(permutation_cycles(fg) == 2);
    }
    SUBCASE("every dart lies on exactly one orbit") {
        auto cg = abstract_graph({4, 1, 3, 1, 1}, {{0, 0, 1, 0}, {0, 1, 2, 0}, {0, 2, 2, 2}, {0, 3, 3, 0}, {2, 1, 4, 0}});
        auto bs = boundary_system(cg);
        std::set<std::pair<int, bool>> darts;
        for (const auto& b : bs.boundaries)
            for (const auto& d : b.darts) CHECK(darts.insert({d.edge, d.reversed}).second);
        CHECK(darts.size() == 2 * cg.edges.size());
        CHECK(permutation_cycles(bs.fat_graphs[0]) == static_cast<int>(bs.boundaries.size()));
    }
}

TEST_CASE("slot bookkeeping errors") {
    CHECK_THROWS_AS(abstract_graph({2}, {{0, 0, 0, 0}}), Error);
    CHECK_THROWS_AS(abstract_graph({3, 1}, {{0, 0, 1, 0}}), Error);
}

TEST_CASE("figure-eight pullback: ring heights and widths in closed form") {
    for (double c : {1.5, 2.5}) {
        CAPTURE(c);
        Pipeline p(pullback(Polynomial({-c, 0.0, 1.0})));
        CHECK(p.cg.component_count == 3);
        CHECK(p.cg.edges.size() == 4);
        int rings = 0, circles = 0;
        for (const auto& e : p.reeb.edges) {
            if (e.kind == DomainKind::Ring) {
                ++rings;
                CHECK(std::abs(e.length.value() - std::acosh(c)) < 1e-8);
                CHECK(std::abs(e.width.value() - 2 * pi) < 1e-4);
            } else {
                ++circles;
                CHECK(e.kind == DomainKind::Circle);
                CHECK(std::abs(e.width.value() - 4 * pi) < 1e-4);
            }
        }
        CHECK(rings == 2);
        CHECK(circles == 1);
        check_reeb_invariants(p);
    }
}

TEST_CASE("cubic pullback: three rings around a theta-like graph") {
    Pipeline p(pullback(Polynomial({0.0, -3.0, 0.0, 1.0})));
    CHECK(p.cg.component_count == 4);
    int rings = 0;
    for (const auto& e : p.reeb.edges) {
        if (e.kind == DomainKind::Ring) {
            ++rings;
            CHECK(std::abs(e.length.value() - std::acosh(2.0)) < 1e-8);
            CHECK(std::abs(e.width.value() - 2 * pi) < 1e-4);
        } else {
            CHECK(e.kind == DomainKind::Circle);
            CHECK(std::abs(e.width.value() - 6 * pi) < 1e-4);
        }
    }
    CHECK(rings == 3);
    check_reeb_invariants(p);
}

TEST_CASE("loop around a segment") {
    // -(z-2) dz^2 / ((z^2-1)(z-3)): segment [-1,1], a loop through 2 around it, and the edge [2,3].
    Pipeline p(RationalQD::make(Polynomial::from_roots(std::vector<cplx>{2.0}),
                                Polynomial::from_roots(std::vector<cplx>{-1.0, 1.0, 3.0}), -1));
    CHECK(p.cg.component_count == 2);
    REQUIRE(p.reeb.edges.size() == 2);
    int rings = 0;
    for (const auto& e : p.reeb.edges) {
        if (e.kind == DomainKind::Ring) ++rings;
        // 2 pi |sqrt residue at infinity| = 2 pi.
        if (e.kind == DomainKind::Circle) CHECK(std::abs(e.width.value() - 2 * pi) < 1e-4);
    }
    CHECK(rings == 1);
    check_reeb_invariants(p);
}
