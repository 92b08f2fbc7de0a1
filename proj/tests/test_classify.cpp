#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "instances.hpp"
#include "qdkit/classify.hpp"
#include "qdkit/error.hpp"

using namespace qd;
using qdtest::SimpleEdge;
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

Orientation orient(std::vector<std::uint8_t> bits) { return Orientation{std::move(bits)}; }

struct Sketch {
    CriticalGraph cg;
    int v(cplx z) {
        GraphVertex gv;
        gv.id = static_cast<int>(cg.vertices.size());
        gv.location = z;
        cg.vertices.push_back(gv);
        return gv.id;
    }
    void e(int a, int b) {
        GraphEdge ge;
        ge.id = static_cast<int>(cg.edges.size());
        ge.tail = {a, -1};
        ge.head = {b, -1};
        ge.polyline = {cg.vertices[a].location, cg.vertices[b].location};
        ge.psi_length = std::abs(ge.polyline[1] - ge.polyline[0]);
        cg.edges.push_back(ge);
    }
};

// Triangle around a segment, plus a pendant at the top vertex pointing in or out.
qdtest::AbstractInstance triangle_with_pendant(bool inside) {
    Sketch s;
    std::vector<int> t;
    for (int k = 0; k < 3; ++k) t.push_back(s.v(10.0 * std::polar(1.0, pi / 2 + 2 * pi * k / 3)));
    for (int k = 0; k < 3; ++k) s.e(t[k], t[(k + 1) % 3]);
    s.e(t[0], s.v(cplx(0, inside ? 7.0 : 13.0)));
    s.e(s.v(-1.0), s.v(1.0));
    std::mt19937_64 rng(3);
    return qdtest::assemble_planar(std::move(s.cg), rng);
}

struct Pipeline {
    TraceField field;
    std::vector<TrajectorySegment> segments;
    CriticalGraph cg;
    BoundarySystem bs;
    ReebGraph reeb;
    explicit Pipeline(const RationalQD& q)
        : field(q), segments(launch_critical(field)), cg(build_critical_graph(segments, field)),
          bs(boundary_system(cg)), reeb(build_reeb(field, cg, bs)) {}
};

RationalQD pullback(const Polynomial& p) {
    const Polynomial dp = p.derivative();
    return RationalQD::make(dp * dp, p * p - Polynomial({1.0}), -1);
}

}  // namespace

TEST_CASE("gradient orientations on small Reeb graphs") {
    SUBCASE("trees admit every orientation") {
        for (int k = 1; k <= 5; ++k) {
            std::vector<SimpleEdge> edges;
            for (int i = 0; i < k; ++i) edges.push_back({i, i + 1, 1.0 + i});
            auto r = qdtest::reeb_from(k + 1, edges);
            CHECK(gradient_orientations(r).size() == (std::size_t(1) << k));
        }
        auto r = qdtest::reeb_from(4, {{0, 1, 1.0}, {0, 2, 2.0}, {0, 3, 0.5}});
        auto c = count_potentials(r);
        CHECK(c.with_leaves == 8);
        CHECK(c.power_of_two);
    }
    SUBCASE("two parallel edges of equal length") {
        auto r = qdtest::reeb_from(2, {{0, 1, 1.0}, {0, 1, 1.0}});
        auto os = gradient_orientations(r);
        REQUIRE(os.size() == 2);
        for (const auto& o : os) {
            CHECK(o.forward[0] == o.forward[1]);
            auto p = integrate_potential(r, o);
            CHECK(std::min(p.values[0], p.values[1]) == 0.0);
            CHECK(std::abs(std::abs(p.values[0] - p.values[1]) - 1.0) < 1e-12);
        }
        CHECK(count_potentials(r).with_leaves == 2);
    }
    SUBCASE("a loop edge kills every potential") {
        auto r = qdtest::reeb_from(1, {{0, 0, 1.0}});
        CHECK(gradient_orientations(r).empty());
        CHECK(count_potentials(r).with_leaves == 0);
        CHECK(count_potentials(r).power_of_two);
    }
    SUBCASE("leaves double the count in one convention only") {
        auto r = qdtest::reeb_from(2, {{0, 1, 1.0}, {0, -1, 0.0}, {1, -1, 0.0}});
        auto c = count_potentials(r);
        CHECK(c.finite_only == 2);
        CHECK(c.with_leaves == 8);
        CHECK(gradient_orientations(r).size() == 8);
    }
    SUBCASE("equal lengths around a 4-cycle break the power-of-two count") {
        auto r = qdtest::reeb_from(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 0, 1.0}});
        auto c = count_potentials(r);
        CHECK(c.finite_only == 6);
        CHECK(qdtest::brute_force_gradient_count(r, false) == 6);
        CHECK_FALSE(c.power_of_two);
        CHECK_FALSE(c.flip_closed);
    }
}

TEST_CASE("potential integration along a path") {
    auto r = qdtest::reeb_from(3, {{0, 1, 1.0}, {1, 2, 2.0}});
    auto p = integrate_potential(r, orient({1, 1}));
    CHECK(p.values == std::vector<double>{0.0, 1.0, 3.0});
    p = integrate_potential(r, orient({1, 0}));
    CHECK(p.values == std::vector<double>{1.0, 2.0, 0.0});

    auto cyc = qdtest::reeb_from(2, {{0, 1, 1.0}, {0, 1, 1.0}});
    CHECK(code_of([&] { integrate_potential(cyc, orient({1, 0})); }) == Errc::InconsistentCocycle);
}

TEST_CASE("gradient enumeration input limits") {
    auto zero = qdtest::reeb_from(2, {{0, 1, 0.0}});
    CHECK(code_of([&] { gradient_orientations(zero); }) == Errc::InvalidInput);
    std::vector<SimpleEdge> many;
    for (int i = 0; i < 31; ++i) many.push_back({0, 1, 1.0 + i});
    auto big = qdtest::reeb_from(2, many);
    CHECK(code_of([&] { count_potentials(big); }) == Errc::TooLarge);
}

TEST_CASE("spanning-forest enumeration matches plain enumeration") {
    std::mt19937_64 rng(11);
    GradientOptions forest;
    forest.brute_force_limit = 0;
    for (int i = 0; i < 200; ++i) {
        auto mode = i % 3 == 0 ? qdtest::LengthMode::Integer : qdtest::LengthMode::FromHeights;
        auto r = qdtest::random_reeb(rng, 14, mode);
        CHECK(count_potentials(r).with_leaves == count_potentials(r, forest).with_leaves);
        CHECK(gradient_orientations(r) == gradient_orientations(r, forest));
    }
    // Beyond the plain-enumeration limit: 24 edges on a chain of heights.
    std::vector<SimpleEdge> edges;
    std::vector<double> h{0.0, 1.3, 2.9, 4.0, 5.7};
    for (int i = 0; i < 24; ++i) {
        const int a = i % 5, b = (i * 3 + 1) % 5;
        if (a == b) continue;
        edges.push_back({a, b, std::abs(h[a] - h[b])});
    }
    auto r = qdtest::reeb_from(5, edges);
    auto c = count_potentials(r);
    CHECK(c.finite_only == 2);
}

TEST_CASE("potential counts agree with a difference-constraint oracle") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 300; ++i) {
        const auto mode = std::array{qdtest::LengthMode::Generic, qdtest::LengthMode::FromHeights,
                                     qdtest::LengthMode::Integer}[i % 3];
        auto r = qdtest::random_reeb(rng, 10, mode);
        auto c = count_potentials(r);
        CHECK(c.with_leaves == qdtest::brute_force_gradient_count(r, true));
        CHECK(c.finite_only == qdtest::brute_force_gradient_count(r, false));
        if (mode != qdtest::LengthMode::Integer) {
            CHECK(c.power_of_two);
            CHECK(c.flip_closed);
        }
        for (const auto& o : gradient_orientations(r)) {
            auto p = integrate_potential(r, o);
            for (const auto& e : r.edges) {
                if (e.is_leaf()) continue;
                const double d = p.values[e.head] - p.values[e.tail];
                CHECK(std::abs(d - (o.forward[e.id] ? 1 : -1) * e.length.value()) < 1e-9 * 4);
            }
        }
    }
}

TEST_CASE("2-SAT positivity clauses") {
    SUBCASE("segment with one circle edge forces it incoming") {
        auto r = qdtest::reeb_from(1, {{0, -1, 0.0, 2 * pi}});
        BoundarySystem bs;
        bs.edge_sides = {{0, 0}};
        auto res = positivity_2sat(r, bs);
        REQUIRE(res.satisfiable);
        CHECK(res.orientation.forward[0] == 0);
        CHECK_FALSE(satisfies(orient({1}), positivity_clauses(r, bs)));
    }
    SUBCASE("path with a fat-graph edge at the middle vertex") {
        qdtest::AbstractInstance inst;
        inst.reeb = qdtest::reeb_from(3, {{0, 1, 1.0}, {1, 2, 1.0}});
        inst.bs.edge_sides = {{1, 2}};
        const auto clauses = positivity_clauses(inst.reeb, inst.bs);
        CHECK_FALSE(satisfies(orient({0, 1}), clauses));
        CHECK(qdtest::density_coefficient(inst, orient({0, 1}), 0) == -2);
        CHECK(satisfies(orient({1, 1}), clauses));
        CHECK(qdtest::density_coefficient(inst, orient({1, 1}), 0) == 0);
        CHECK(qdtest::density_coefficient(inst, orient({1, 0}), 0) == 2);
        CHECK(positivity_2sat(inst.reeb, inst.bs).satisfiable);
    }
    SUBCASE("both sides forced outgoing by simple poles elsewhere") {
        qdtest::AbstractInstance inst;
        inst.reeb = qdtest::reeb_from(3, {{0, 1, 1.0}, {1, 2, 1.0}});
        inst.bs.edge_sides = {{0, 0}, {3, 3}, {1, 2}};
        auto res = positivity_2sat(inst.reeb, inst.bs);
        CHECK_FALSE(res.satisfiable);
        CHECK(res.conflict_variable >= 0);
        CHECK(std::find(res.conflict_component.begin(), res.conflict_component.end(), 2 * res.conflict_variable) !=
              res.conflict_component.end());
        CHECK(std::find(res.conflict_component.begin(), res.conflict_component.end(),
                        2 * res.conflict_variable + 1) != res.conflict_component.end());
        CHECK_FALSE(qdtest::brute_force_positive(inst));
    }
    SUBCASE("a boundary shared by both ends of a Reeb edge is always toward") {
        qdtest::AbstractInstance inst;
        inst.reeb = qdtest::reeb_from(1, {{0, 0, 1.0}});
        inst.reeb.edges[0].head_boundary = 0;
        inst.reeb.edge_of_boundary = {0};
        inst.bs.edge_sides = {{0, 0}};
        CHECK(positivity_clauses(inst.reeb, inst.bs).empty());
    }
}

TEST_CASE("2-SAT agrees with exhaustive enumeration on random incidence instances") {
    std::mt19937_64 rng(77);
    int sat = 0;
    for (int i = 0; i < 300; ++i) {
        auto inst = qdtest::random_incidence_instance(rng, 12);
        auto res = positivity_2sat(inst.reeb, inst.bs);
        CHECK(res.satisfiable == qdtest::brute_force_positive(inst));
        if (res.satisfiable) {
            ++sat;
            for (std::size_t e = 0; e < inst.bs.edge_sides.size(); ++e)
                CHECK(qdtest::density_coefficient(inst, res.orientation, static_cast<int>(e)) >= 0);
        }
    }
    CHECK(sat > 30);
    CHECK(sat < 270);
}

TEST_CASE("component mass") {
    auto seg = qdtest::reeb_from(1, {{0, -1, 0.0, 2 * pi}});
    CHECK(std::abs(component_mass(seg, orient({0}), 0).value() - 2 * pi) < 1e-15);
    CHECK(std::abs(component_mass(seg, orient({1}), 0).value() + 2 * pi) < 1e-15);

    auto star = qdtest::reeb_from(4, {{1, 0, 1.0, 3.0}, {2, 0, 1.0, 1.0}, {0, 3, 1.0, 4.0}});
    CHECK(component_mass(star, orient({1, 1, 1}), 0).value() == 0.0);

    auto ends = qdtest::reeb_from(1, {{0, -1, 0.0}, {0, -1, 0.0}});
    ends.edges[0].width = ends.edges[1].width = Extended::infinity();
    CHECK(code_of([&] { component_mass(ends, orient({0, 1}), 0); }) == Errc::IndeterminateInfinity);
    CHECK(component_mass(ends, orient({0, 0}), 0).is_infinite());
}

TEST_CASE("simple-cycle criterion on embedded instances") {
    SUBCASE("segment") {
        Sketch s;
        s.e(s.v(-1.0), s.v(1.0));
        std::mt19937_64 rng(1);
        auto inst = qdtest::assemble_planar(std::move(s.cg), rng);
        auto res = simple_cycle_criterion(inst.cg, inst.bs);
        CHECK(res.admits_positive);
        CHECK(res.cycles.empty());
        CHECK(res.support == std::vector<int>{0});
        CHECK(positivity_2sat(inst.reeb, inst.bs).satisfiable);
    }
    SUBCASE("triangle with a pendant inside") {
        auto inst = triangle_with_pendant(true);
        auto res = simple_cycle_criterion(inst.cg, inst.bs);
        CHECK_FALSE(res.admits_positive);
        REQUIRE(res.cycles.size() == 1);
        REQUIRE(res.inside_attachment.has_value());
        CHECK(res.inside_attachment->second == 3);
        CHECK_FALSE(positivity_2sat(inst.reeb, inst.bs).satisfiable);
        CHECK_FALSE(qdtest::brute_force_positive(inst));
    }
    SUBCASE("triangle with a pendant outside") {
        auto inst = triangle_with_pendant(false);
        auto res = simple_cycle_criterion(inst.cg, inst.bs);
        CHECK(res.admits_positive);
        CHECK(res.support == std::vector<int>{3, 4});
        CHECK(positivity_2sat(inst.reeb, inst.bs).satisfiable);
        CHECK(positive_gradient(inst.reeb, inst.bs).positive);
    }
    SUBCASE("non-planar input is rejected") {
        CriticalGraph cg;
        for (int v = 0; v < 2; ++v) {
            GraphVertex gv;
            gv.id = v;
            gv.degree = 3;
            cg.vertices.push_back(gv);
        }
        for (int i = 0; i < 3; ++i) {
            GraphEdge e;
            e.id = i;
            e.tail = {0, i};
            e.head = {1, i};
            e.psi_length = 1.0;
            cg.edges.push_back(e);
        }
        cg.finalize();
        auto bs = boundary_system(cg);
        CHECK(code_of([&] { simple_cycle_criterion(cg, bs); }) == Errc::NonPlanarInput);
    }
}

TEST_CASE("simple-cycle criterion matches 2-SAT plus gradient on nested planar instances") {
    std::mt19937_64 rng(5);
    int positive = 0, negative = 0;
    for (int i = 0; i < 60; ++i) {
        auto inst = qdtest::planar_instance(rng, 2);
        for (int chi : euler_characteristics(inst.cg, inst.bs)) REQUIRE(chi == 2);
        for (int b : inst.reeb.edge_of_boundary) REQUIRE(b >= 0);
        auto pg = positive_gradient(inst.reeb, inst.bs);
        CHECK(pg.gradient);
        auto res = simple_cycle_criterion(inst.cg, inst.bs);
        CHECK(res.admits_positive == (pg.positive && pg.gradient));
        CHECK(pg.positive == qdtest::brute_force_positive(inst));
        (res.admits_positive ? positive : negative)++;
    }
    CHECK(positive > 5);
    CHECK(negative > 5);
}

TEST_CASE("verdict chain on traced differentials") {
    SUBCASE("arcsine") {
        Pipeline p(RationalQD::make(Polynomial({1.0}), Polynomial({-1.0, 0.0, 1.0}), -1));
        CHECK(is_nonchaotic(p.segments).non_chaotic);
        CHECK(is_strebel(p.reeb, p.field.qd(), p.field.inventory()).strebel);
        auto pg = positive_gradient(p.reeb, p.bs);
        CHECK(pg.gradient);
        REQUIRE(pg.positive);
        CHECK(pg.witness->forward[0] == 0);
        CHECK(std::abs(component_mass(p.reeb, *pg.witness, 0).value() - 2 * pi) < 1e-4);
        CHECK(simple_cycle_criterion(p.cg, p.bs).admits_positive);
    }
    SUBCASE("figure-eight and cubic pullbacks") {
        for (auto poly : {Polynomial({-1.5, 0.0, 1.0}), Polynomial({0.0, -3.0, 0.0, 1.0})}) {
            Pipeline p(pullback(poly));
            CHECK(is_strebel(p.reeb).strebel);
            auto pg = positive_gradient(p.reeb, p.bs);
            CHECK(pg.gradient);
            CHECK(pg.positive);
            CHECK(count_potentials(p.reeb).power_of_two);
            CHECK(simple_cycle_criterion(p.cg, p.bs).admits_positive);
        }
    }
    SUBCASE("loop around a segment") {
        Pipeline p(RationalQD::make(Polynomial::from_roots(std::vector<cplx>{2.0}),
                                    Polynomial::from_roots(std::vector<cplx>{-1.0, 1.0, 3.0}), -1));
        auto pg = positive_gradient(p.reeb, p.bs);
        CHECK(pg.positive);
        CHECK(simple_cycle_criterion(p.cg, p.bs).admits_positive);
    }
    SUBCASE("z dz^2 is non-chaotic but not Strebel") {
        Pipeline p(RationalQD::make(Polynomial({0.0, 1.0}), Polynomial({1.0}), 1));
        CHECK(is_nonchaotic(p.segments).non_chaotic);
        auto s = is_strebel(p.reeb, p.field.qd(), p.field.inventory());
        CHECK_FALSE(s.strebel);
        CHECK_FALSE(s.necessary_conditions);
    }
}
