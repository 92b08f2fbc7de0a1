#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qdkit/error.hpp"
#include "qdkit/tracer.hpp"

using namespace qd;
using std::numbers::pi;

namespace {

RationalQD make_qd(std::vector<cplx> num, std::vector<cplx> den, int sign = 1) {
    return RationalQD::make(Polynomial(std::move(num)), Polynomial(std::move(den)), sign);
}

RationalQD arcsine() { return make_qd({1.0}, {-1.0, 0.0, 1.0}, -1); }

// e^{i phi} dz^2 / ((z^2 - 1)(z^2 - 4)): four simple poles, trajectories dense for generic phi.
RationalQD four_poles(double phi) {
    return RationalQD::make(Polynomial({std::polar(1.0, phi)}),
                            Polynomial::from_roots(std::vector<cplx>{-2.0, -1.0, 1.0, 2.0}));
}

TraceBudget length_budget(double len) {
    TraceBudget b;
    b.max_psi_length = len;
    return b;
}

}  // namespace

TEST_CASE("horizontal trace of dz^2 is a straight segment") {
    auto q = make_qd({1.0}, {1.0});
    auto seg = trace_horizontal(q, cplx(0, 1), 1.0, length_budget(2.0));
    CHECK(seg.end.kind == AnchorKind::BudgetExhausted);
    CHECK(std::abs(seg.w_increment - 2.0) < 1e-12);
    CHECK(seg.psi_length == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(seg.samples.back() - cplx(2, 1)) < 1e-12);
    CHECK(recurrence_verdict(seg) == RecurrenceVerdict::Transient);
}

TEST_CASE("horizontal trace of -dz^2/z^2 closes on the unit circle") {
    auto q = make_qd({1.0}, {0.0, 0.0, 1.0}, -1);
    auto seg = trace_horizontal(q, 1.0, cplx(0, 1), {});
    REQUIRE(seg.end.kind == AnchorKind::ClosureToStart);
    CHECK(std::abs(seg.psi_length - 2 * pi) < 1e-6);
    CHECK(std::abs(seg.w_increment - 2 * pi) < 1e-6);
    for (auto z : seg.samples) CHECK(std::abs(std::abs(z) - 1.0) < 1e-8);
    CHECK(recurrence_verdict(seg) == RecurrenceVerdict::Closed);
}

TEST_CASE("launch from a simple pole of the arcsine differential") {
    TraceField field(arcsine());
    auto segs = launch_critical(field);
    REQUIRE(segs.size() == 2);
    for (const auto& seg : segs) {
        CHECK(seg.start.kind == AnchorKind::FiniteCritical);
        REQUIRE(seg.end.kind == AnchorKind::FiniteCritical);
        CHECK(seg.end.point != seg.start.point);
        CHECK(std::abs(seg.psi_length - pi) < 1e-6);
        CHECK(std::abs(seg.w_increment.imag()) < 1e-8);
        for (auto z : seg.samples) CHECK(std::abs(z.imag()) < 1e-8);
    }
    // The segment from +1 starts along angle pi.
    const auto& inv = field.inventory();
    const auto& from_plus = inv.points[segs[1].start.point].location.z.real() > 0 ? segs[1] : segs[0];
    CHECK(from_plus.samples.front().real() == doctest::Approx(1.0));
    CHECK(from_plus.samples.back().real() == doctest::Approx(-1.0));
}

TEST_CASE("launch counts") {
    SUBCASE("z dz^2 escapes to infinity along three rays") {
        auto segs = launch_critical(TraceField(make_qd({0.0, 1.0}, {1.0})));
        REQUIRE(segs.size() == 3);
        for (const auto& seg : segs) {
            CHECK(seg.end.kind == AnchorKind::InfiniteCritical);
            // Im w is conserved and starts at 0 on a critical ray.
            CHECK(std::abs(seg.w_increment.imag()) <= 1e-8 * seg.psi_length);
        }
    }
    SUBCASE("dz^2 has nothing to launch") {
        CHECK(launch_critical(TraceField(make_qd({1.0}, {1.0}))).empty());
    }
    SUBCASE("random differentials launch sum(order + 2) + #simple poles") {
        std::mt19937_64 rng(21);
        std::normal_distribution<double> g;
        for (int trial = 0; trial < 12; ++trial) {
            std::vector<cplx> zeros(1 + trial % 3), poles(trial % 3);
            for (auto& z : zeros) z = {g(rng), g(rng)};
            for (auto& p : poles) p = {g(rng), g(rng)};
            auto q = RationalQD::make(Polynomial::from_roots(zeros), Polynomial::from_roots(poles));
            TraceField field(q);
            std::size_t expected = 0;
            for (const auto& p : field.inventory().points) {
                if (p.kind == CriticalKind::Zero) expected += static_cast<std::size_t>(p.order + 2);
                if (p.kind == CriticalKind::SimplePole) expected += 1;
            }
            auto segs = launch_critical(field, length_budget(20.0));
            CHECK(segs.size() == expected);
            for (std::size_t k = 1; k < segs.size(); ++k) {
                const bool ordered = segs[k - 1].start.point < segs[k].start.point ||
                                     (segs[k - 1].start.point == segs[k].start.point &&
                                      segs[k - 1].start.direction < segs[k].start.direction);
                CHECK(ordered);
            }
        }
    }
}

TEST_CASE("vertical traces") {
    SUBCASE("dz^2") {
        auto seg = trace_vertical(make_qd({1.0}, {1.0}), 0.0, length_budget(1.0));
        CHECK(std::abs(seg.w_increment - cplx(0, 1)) < 1e-12);
        CHECK(std::abs(seg.samples.back() - cplx(0, 1)) < 1e-12);
    }
    SUBCASE("-dz^2/z^2 is radial with logarithmic length") {
        auto seg = trace_vertical(make_qd({1.0}, {0.0, 0.0, 1.0}, -1), 1.0, length_budget(1.0));
        CHECK(std::abs(seg.samples.back() - std::exp(1.0)) < 1e-9);
        CHECK(std::abs(std::abs(seg.w_increment) - 1.0) < 1e-10);
        CHECK(std::abs(seg.w_increment.real()) < 1e-10);
    }
    SUBCASE("arcsine vertical from 0 escapes to infinity") {
        auto seg = trace_vertical(arcsine(), 0.0, {}, cplx(0, 1));
        CHECK(seg.end.kind == AnchorKind::InfiniteCritical);
        CHECK(seg.samples[1].imag() > 0.0);
        CHECK(std::abs(seg.w_increment.real()) < 1e-8 * seg.psi_length);
    }
}

TEST_CASE("seed at a critical point is rejected") {
    CHECK_THROWS_AS(trace_horizontal(make_qd({0.0, 1.0}, {1.0}), 0.0, 1.0), Error);
    try {
        trace_horizontal(make_qd({0.0, 1.0}, {1.0}), 0.0, 1.0);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SeedAtCriticalPoint);
    }
}

TEST_CASE("dense trajectories of four simple poles are flagged") {
    TraceBudget b;
    b.max_steps = 400000;
    auto seg = trace_horizontal(four_poles(0.7123), cplx(0.3, 0.4), 1.0, b);
    CHECK(recurrence_verdict(seg, b) == RecurrenceVerdict::RecurrentSuspect);
    CHECK(seg.max_cell_crossings > b.grid.crossing_cap);
}

TEST_CASE("horizontal invariants on random differentials") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> ang(0.0, 2 * pi);
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<cplx> num(2 + trial % 3), den(1 + trial % 3);
        for (auto& x : num) x = {g(rng), g(rng)};
        for (auto& x : den) x = {g(rng), g(rng)};
        auto q = RationalQD::make(Polynomial(num), Polynomial(den));
        TraceField field(q);
        const cplx seed(3.0 * g(rng), 3.0 * g(rng));
        if (field.local_scale(seed) < 0.2) continue;
        const cplx dir = std::polar(1.0, ang(rng));
        TraceBudget b = length_budget(3.0);
        TrajectorySegment seg;
        try {
            seg = trace_horizontal(field, seed, dir, b);
        } catch (const Error&) {
            continue;
        }
        if (seg.end.kind != AnchorKind::BudgetExhausted) continue;
        ++checked;
        // Conservation of Im w.
        CHECK(std::abs(seg.w_increment.imag()) <= 1e-8 * seg.psi_length);
        CHECK(std::abs(seg.psi_length - std::abs(seg.w_increment.real())) <= 1e-8 * seg.psi_length);

        // Reversibility: trace back from the end with the reversed tangent.
        const cplx end = seg.samples.back();
        const cplx s_end = continue_branch(q.f(end), seg.start_branch);
        cplx s_track = seg.start_branch;
        for (auto z : seg.samples) s_track = continue_branch(q.f(z), s_track);
        (void)s_end;
        const cplx back_dir = -1.0 / s_track;
        auto back = trace_horizontal(field, end, back_dir / std::abs(back_dir), b);
        CHECK(std::abs(back.samples.back() - seed) < 1e-3 * field.local_scale(seed));

        // Step-size independence.
        TraceBudget fine = b;
        fine.max_step_fraction *= 0.5;
        auto seg2 = trace_horizontal(field, seed, dir, fine);
        CHECK(std::abs(seg2.w_increment - seg.w_increment) < 1e-6 * std::abs(seg.w_increment));
        CHECK(std::abs(seg2.samples.back() - end) < 1e-6 * std::max(1.0, std::abs(end)));
    }
    CHECK(checked >= 5);
}

TEST_CASE("ray integral against closed forms") {
    // Integral of 1/sqrt(1 - x^2) from 0 to 1 is pi/2 (branch sqrt(f) = 1 at 0 for -1/(z^2-1)).
    auto q = arcsine();
    CHECK(std::abs(ray_integral(q, 0.0, 1.0, 1.0) - pi / 2) < 1e-12);
    // z dz^2: integral of sqrt(z) from 1 to 0 is -2/3.
    auto z1 = make_qd({0.0, 1.0}, {1.0});
    CHECK(std::abs(ray_integral(z1, 1.0, 0.0, 1.0) + 2.0 / 3.0) < 1e-12);
}

TEST_CASE("point_at follows the circle") {
    auto q = make_qd({1.0}, {0.0, 0.0, 1.0}, -1);
    auto seg = trace_horizontal(q, 1.0, cplx(0, 1), {});
    for (double t : {0.3, 1.0, 2.5, 4.0}) {
        const cplx z = point_at(q, seg, t);
        CHECK(std::abs(z - std::polar(1.0, t)) < 1e-8);
    }
}
