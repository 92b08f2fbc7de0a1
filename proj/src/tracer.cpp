#include "qdkit/tracer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <cstdio>
#include <cstdlib>

#include "qdkit/error.hpp"

namespace qd {

std::string_view anchor_name(AnchorKind k) {
    switch (k) {
        case AnchorKind::Seed: return "seed";
        case AnchorKind::FiniteCritical: return "finite-critical";
        case AnchorKind::InfiniteCritical: return "infinite-critical";
        case AnchorKind::ClosureToStart: return "closure-to-start";
        case AnchorKind::BudgetExhausted: return "budget-exhausted";
        case AnchorKind::Recurrence: return "recurrence-flag";
        case AnchorKind::EdgeCrossing: return "edge-crossing";
    }
    return "seed";
}

std::string_view verdict_name(RecurrenceVerdict v) {
    switch (v) {
        case RecurrenceVerdict::Transient: return "transient";
        case RecurrenceVerdict::Closed: return "closed";
        case RecurrenceVerdict::RecurrentSuspect: return "recurrent-suspect";
    }
    return "transient";
}

cplx continue_branch(cplx value, cplx reference) {
    const cplx r = std::sqrt(value);
    return std::norm(r - reference) <= std::norm(r + reference) ? r : -r;
}

namespace {

struct Quadrature {
    std::vector<double> nodes;    // on [0, 1]
    std::vector<double> weights;
};

Quadrature gauss_legendre(int n) {
    Quadrature q;
    for (int i = 1; i <= n; ++i) {
        double x = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        q.nodes.push_back(0.5 * (1.0 + x));
        q.weights.push_back(1.0 / ((1.0 - x * x) * dp * dp));
    }
    return q;
}

const Quadrature& ray_rule() {
    static const Quadrature q = [] {
        Quadrature g = gauss_legendre(20);
        // Descending nodes so the branch is continued from u = 1 toward u = 0.
        std::vector<std::size_t> idx(g.nodes.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return g.nodes[a] > g.nodes[b]; });
        Quadrature s;
        for (auto i : idx) {
            s.nodes.push_back(g.nodes[i]);
            s.weights.push_back(g.weights[i]);
        }
        return s;
    }();
    return q;
}

}  // namespace

cplx ray_integral(const RationalQD& qd, cplx from, cplx to, cplx branch_at_from) {
    // zeta = to + (from - to) u^2 removes the endpoint singularity at `to`.
    const cplx span = from - to;
    const auto& rule = ray_rule();
    cplx ref = branch_at_from;
    cplx acc{};
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double u = rule.nodes[i];
        const cplx s = continue_branch(qd.f(to + span * (u * u)), ref);
        ref = s;
        acc += rule.weights[i] * s * (2.0 * u);
    }
    return -acc * span;
}

// ---------------------------------------------------------------------------

TraceField::TraceField(const RationalQD& qd) : TraceField(qd, critical_inventory(qd)) {}

TraceField::TraceField(RationalQD qd, CriticalInventory inventory) : qd_(std::move(qd)), inv_(std::move(inventory)) {
    const auto& pts = inv_.points;
    nearest_.assign(pts.size(), 0.0);
    directions_.assign(pts.size(), {});
    double maxpair = 0.0, maxabs = 0.0;
    std::size_t finite_count = 0;
    double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].location.at_infinity) continue;
        const cplx z = pts[i].location.z;
        if (finite_count == 0) {
            lo_x = hi_x = z.real();
            lo_y = hi_y = z.imag();
        }
        lo_x = std::min(lo_x, z.real());
        hi_x = std::max(hi_x, z.real());
        lo_y = std::min(lo_y, z.imag());
        hi_y = std::max(hi_y, z.imag());
        ++finite_count;
        maxabs = std::max(maxabs, std::abs(z));
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (j != i && !pts[j].location.at_infinity) maxpair = std::max(maxpair, std::abs(z - pts[j].location.z));
    }
    scale_ = finite_count >= 2 ? maxpair : 1.0;
    inf_radius_ = 1e3 * std::max(scale_, maxabs);
    if (finite_count == 0) inf_radius_ = 1e3;

    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].location.at_infinity) continue;
        double best = -1.0;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (j == i || pts[j].location.at_infinity) continue;
            const double d = std::abs(pts[i].location.z - pts[j].location.z);
            if (best < 0 || d < best) best = d;
        }
        nearest_[i] = best > 0 ? best : scale_;
        if (pts[i].is_finite_critical()) directions_[i] = critical_directions(qd_, pts[i]);
    }

    const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
    double half = 0.5 * std::max(hi_x - lo_x, hi_y - lo_y);
    if (half <= 0.0) half = 0.5 * scale_;
    half *= 3.0;
    grid_origin_ = cplx(cx - half, cy - half);
    grid_extent_ = 2.0 * half;
}

double TraceField::local_scale(cplx z) const {
    double best = -1.0;
    for (const auto& p : inv_.points) {
        if (p.location.at_infinity || p.kind == CriticalKind::Regular) continue;
        const double d = std::abs(z - p.location.z);
        if (best < 0 || d < best) best = d;
    }
    return best < 0 ? scale_ : best;
}

double TraceField::launch_offset(std::size_t point) const { return 1e-4 * nearest_.at(point); }
double TraceField::landing_radius(std::size_t point) const { return 10.0 * launch_offset(point); }
double TraceField::pole_capture_radius(std::size_t point) const { return 1e-3 * nearest_.at(point); }

// ---------------------------------------------------------------------------

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct StepResult {
    cplx z;
    cplx z4;  // embedded 4th order solution
    bool ok = false;
    bool branch_jump = false;
};

class Integrator {
public:
    Integrator(const TraceField& field, cplx rot, const TraceBudget& budget, const TraceOptions& opts)
        : field_(field), qd_(field.qd()), rot_(rot), budget_(budget), opts_(opts) {}

    cplx velocity(cplx z, cplx& s_ref, bool& bad) const {
        const cplx fz = qd_.f(z);
        if (!std::isfinite(fz.real()) || !std::isfinite(fz.imag()) || fz == cplx{}) {
            bad = true;
            return {};
        }
        s_ref = continue_branch(fz, s_ref);
        return rot_ / s_ref;
    }

    // Dormand-Prince 5(4).
    StepResult dopri(cplx z, cplx s0, double h) const {
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                                a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                                a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                                b6 = 11.0 / 84;
        static constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                                e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
        StepResult r;
        bool bad = false;
        cplx s = s0;
        const cplx k1 = velocity(z, s, bad);
        s = s0;
        const cplx k2 = velocity(z + h * (a21 * k1), s, bad);
        s = s0;
        const cplx k3 = velocity(z + h * (a31 * k1 + a32 * k2), s, bad);
        s = s0;
        const cplx k4 = velocity(z + h * (a41 * k1 + a42 * k2 + a43 * k3), s, bad);
        s = s0;
        const cplx k5 = velocity(z + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), s, bad);
        s = s0;
        const cplx k6 = velocity(z + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), s, bad);
        if (bad) return r;
        r.z = z + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        s = s0;
        const cplx k7 = velocity(r.z, s, bad);
        if (bad) return r;
        r.z4 = z + h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        // Reject if the branch turned by more than ~30 degrees inside the step.
        r.branch_jump = std::abs(std::arg(s / s0)) > 0.5;
        r.ok = true;
        return r;
    }

    cplx hermite(cplx za, cplx va, cplx zb, cplx vb, double h, double tau) const {
        const double t2 = tau * tau, t3 = t2 * tau;
        return (2 * t3 - 3 * t2 + 1) * za + (t3 - 2 * t2 + tau) * h * va + (-2 * t3 + 3 * t2) * zb +
               (t3 - t2) * h * vb;
    }

    TrajectorySegment run(cplx seed, cplx s_seed, TrajectoryKind kind, std::size_t start_point);

private:
    const TraceField& field_;
    const RationalQD& qd_;
    cplx rot_;
    const TraceBudget& budget_;
    const TraceOptions& opts_;
};

struct Crossing {
    double lambda = 2.0;
    int obstacle = -1;
    std::size_t segment = 0;
    double fraction = 0.0;
};

std::optional<std::pair<double, double>> chord_intersection(cplx a, cplx b, cplx c, cplx d) {
    const cplx r = b - a, s = d - c;
    const double denom = r.real() * s.imag() - r.imag() * s.real();
    if (denom == 0.0) return std::nullopt;
    const cplx ca = c - a;
    const double lam = (ca.real() * s.imag() - ca.imag() * s.real()) / denom;
    const double mu = (ca.real() * r.imag() - ca.imag() * r.real()) / denom;
    if (lam < 0.0 || lam > 1.0 || mu < 0.0 || mu > 1.0) return std::nullopt;
    return std::make_pair(lam, mu);
}

TrajectorySegment Integrator::run(cplx seed, cplx s_seed, TrajectoryKind kind, std::size_t start_point) {
    TrajectorySegment seg;
    seg.kind = kind;
    seg.samples.push_back(seed);
    seg.times.push_back(0.0);
    seg.start_branch = s_seed;

    const auto& inv = field_.inventory();
    const double hit = budget_.hit_radius > 0.0 ? budget_.hit_radius : 1e-3 * field_.local_scale(seed);
    const cplx v0 = rot_ / s_seed;

    std::map<std::pair<int, int>, int> cells;
    const int ncell = budget_.grid.cells;
    const double cell = field_.grid_extent() / ncell;
    auto cell_of = [&](cplx z) -> std::optional<std::pair<int, int>> {
        const cplx off = z - field_.grid_origin();
        const int ix = static_cast<int>(std::floor(off.real() / cell));
        const int iy = static_cast<int>(std::floor(off.imag() / cell));
        if (ix < 0 || iy < 0 || ix >= ncell || iy >= ncell) return std::nullopt;
        return std::make_pair(ix, iy);
    };
    auto last_cell = cell_of(seed);
    if (last_cell) cells[*last_cell] = 1;

    std::vector<int> capture_count(inv.points.size(), 0);
    std::vector<double> capture_prev(inv.points.size(), -1.0);

    cplx z = seed, s = s_seed;
    double t = 0.0;
    cplx w{};
    bool left_start = false;
    bool left_start_point = start_point == npos;
    double h = std::min(0.01, budget_.max_step_fraction) * field_.local_scale(seed) * std::abs(s);
    int steps = 0;
    bool last_reject_branch = false;

    auto finish = [&](AnchorKind kind_end) {
        seg.end.kind = kind_end;
        seg.psi_length = t;
        seg.w_increment = w;
    };

    for (;;) {
        if (steps >= budget_.max_steps || t >= budget_.max_psi_length) {
            finish(AnchorKind::BudgetExhausted);
            break;
        }
        const double local = field_.local_scale(z);
        const double growth = std::max(std::abs(z), field_.feature_scale());
        const double dz_cap = budget_.max_step_fraction * std::min(local, growth);
        h = std::min(h, dz_cap * std::abs(s));
        bool truncated = false;
        if (t + h >= budget_.max_psi_length) {
            h = budget_.max_psi_length - t;
            truncated = true;
        }
        const double hmin = 1e-15 * std::max(1.0, t);
        if (h < hmin) {
            throw Error(last_reject_branch ? Errc::BranchContinuationFailure : Errc::StepSizeUnderflow, "tracer",
                        "step size underflow near z = (" + std::to_string(z.real()) + ", " +
                            std::to_string(z.imag()) + ")");
        }

        const StepResult r = dopri(z, s, h);
        if (!r.ok || r.branch_jump) {
            last_reject_branch = r.ok && r.branch_jump;
            h *= 0.25;
            continue;
        }
        const double err = std::abs(r.z - r.z4);
        const double tol = budget_.rel_tol * std::min(local, growth);
        if (err > tol && !truncated) {
            h *= std::max(0.1, 0.9 * std::pow(tol / err, 0.2));
            last_reject_branch = false;
            continue;
        }
        if (err > tol && truncated) {
            h *= 0.5;
            continue;
        }
        last_reject_branch = false;

        const cplx za = z, sa = s;
        const double ta = t;
        const double step = h;
        bool bad = false;
        cplx sb = sa;
        const cplx vb = velocity(r.z, sb, bad);
        if (bad) {
            h *= 0.25;
            continue;
        }
        const cplx va = rot_ / sa;
        const cplx dw = ray_integral(qd_, za, r.z, sa);
        z = r.z;
        s = sb;
        t += step;
        w += dw;
        ++steps;
        seg.samples.push_back(z);
        seg.times.push_back(t);
        const double grow = err > 0 ? 0.9 * std::pow(tol / err, 0.2) : 5.0;
        h = step * std::clamp(grow, 0.2, 5.0);

        if (!left_start_point && start_point != npos &&
            std::abs(z - inv.points[start_point].location.z) > 2.0 * field_.landing_radius(start_point))
            left_start_point = true;

        // Landing on a finite critical point.
        if (opts_.capture_finite) {
            bool landed = false;
            for (auto idx : inv.finite_critical) {
                const auto& pt = inv.points[idx];
                if (pt.location.at_infinity) continue;
                if (idx == start_point && !left_start_point) continue;
                const cplx q = pt.location.z;
                if (std::abs(z - q) >= field_.landing_radius(idx)) continue;
                const cplx rest = ray_integral(qd_, z, q, s);
                const cplx ratio = rest / rot_;
                if (ratio.real() <= 0.0 || std::abs(ratio.imag()) > 1e-7 * std::max(1.0, t)) continue;
                t += ratio.real();
                w += rest;
                seg.samples.push_back(q);
                seg.times.push_back(t);
                seg.end.point = idx;
                const auto& dirs = field_.directions(idx);
                const double ang = std::arg(z - q);
                int best = -1;
                double best_d = 0.0;
                for (std::size_t k = 0; k < dirs.size(); ++k) {
                    double d = std::fmod(std::abs(ang - dirs[k]), kTwoPi);
                    d = std::min(d, kTwoPi - d);
                    if (best < 0 || d < best_d) {
                        best = static_cast<int>(k);
                        best_d = d;
                    }
                }
                seg.end.direction = best;
                finish(AnchorKind::FiniteCritical);
                landed = true;
                break;
            }
            if (landed) break;
        }

        // Capture by a pole of order >= 2.
        bool captured = false;
        for (auto idx : inv.infinite_critical) {
            const auto& pt = inv.points[idx];
            double d;
            bool inside;
            if (pt.location.at_infinity) {
                d = 1.0 / std::abs(z);
                inside = std::abs(z) > field_.infinity_capture_radius();
            } else {
                d = std::abs(z - pt.location.z);
                inside = d < field_.pole_capture_radius(idx);
            }
            if (inside && capture_prev[idx] >= 0.0 && d < capture_prev[idx]) ++capture_count[idx];
            else capture_count[idx] = 0;
            capture_prev[idx] = d;
            if (capture_count[idx] >= 3) {
                seg.end.point = idx;
                finish(AnchorKind::InfiniteCritical);
                captured = true;
                break;
            }
        }
        if (captured) break;

        // Return to the seed with the starting direction.
        if (opts_.detect_closure && left_start && start_point == npos) {
            double best_tau = 0.0, best_d = std::abs(za - seed);
            for (int k = 1; k <= 32; ++k) {
                const double tau = k / 32.0;
                const double d = std::abs(hermite(za, va, z, vb, step, tau) - seed);
                if (d < best_d) {
                    best_d = d;
                    best_tau = tau;
                }
            }
            if (best_d < 4.0 * hit) {
                double lo = std::max(0.0, best_tau - 1.0 / 32), hi = std::min(1.0, best_tau + 1.0 / 32);
                for (int it = 0; it < 40; ++it) {
                    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
                    if (std::abs(hermite(za, va, z, vb, step, m1) - seed) <
                        std::abs(hermite(za, va, z, vb, step, m2) - seed))
                        hi = m2;
                    else
                        lo = m1;
                }
                double sub = 0.5 * (lo + hi) * step;
                cplx zc = za, vc = va;
                bool refined = true;
                for (int it = 0; it < 4 && refined; ++it) {
                    const StepResult rc = dopri(za, sa, sub);
                    if (!rc.ok) { refined = false; break; }
                    cplx sc = sa;
                    bool badc = false;
                    vc = velocity(rc.z, sc, badc);
                    if (badc) { refined = false; break; }
                    zc = rc.z;
                    const double dt = ((seed - zc) * std::conj(vc)).real() / std::norm(vc);
                    sub += dt;
                }
                const double dir_err = std::abs(std::arg(vc / v0));
                if (refined && std::abs(zc - seed) < hit && dir_err < 1e-3) {
                    // Replace the last step by the partial step that closes onto the seed.
                    t = ta + sub;
                    w = w - dw + ray_integral(qd_, za, seed, sa);
                    seg.samples.back() = seed;
                    seg.times.back() = t;
                    finish(AnchorKind::ClosureToStart);
                    break;
                }
            }
        }

        if (!left_start && std::abs(z - seed) > 2.0 * hit) left_start = true;

        // Obstacle crossing (probe traces).
        if (!opts_.obstacles.empty()) {
            Crossing best;
            for (const auto& ob : opts_.obstacles) {
                const auto& pl = ob.polyline;
                for (std::size_t k = 0; k + 1 < pl.size(); ++k) {
                    const auto hitp = chord_intersection(za, z, pl[k], pl[k + 1]);
                    if (!hitp) continue;
                    if (steps == 1 && ob.id == opts_.ignore_obstacle_at_start && hitp->first < 1e-6) continue;
                    if (hitp->first < best.lambda) {
                        best.lambda = hitp->first;
                        best.obstacle = ob.id;
                        best.segment = k;
                        best.fraction = hitp->second;
                    }
                }
            }
            if (best.obstacle >= 0) {
                cplx zc = za + best.lambda * (z - za);
                double sub = best.lambda * step;
                if (seg.kind == TrajectoryKind::Vertical) {
                    // Obstacles are horizontal trajectories: move onto the level Im w of the crossed one.
                    std::span<const cplx> pl;
                    for (const auto& ob : opts_.obstacles)
                        if (ob.id == best.obstacle) pl = ob.polyline;
                    const cplx anchor = best.fraction < 0.5 ? pl[best.segment] : pl[best.segment + 1];
                    if (const StepResult r0 = dopri(za, sa, sub); r0.ok) zc = r0.z;
                    for (int it = 0; it < 3; ++it) {
                        const cplx se = std::sqrt(qd_.f(zc));
                        const double g = -ray_integral(qd_, zc, anchor, se).imag();
                        bool badp = false;
                        cplx sp = sa;
                        const cplx vp = velocity(zc, sp, badp);
                        const double sigma = (se * vp).imag();
                        if (badp || std::abs(sigma) < 0.5) break;
                        const double dt = -g / sigma;
                        if (std::abs(dt) > step) break;
                        const StepResult rc = dopri(za, sa, sub + dt);
                        if (!rc.ok) break;
                        sub += dt;
                        zc = rc.z;
                    }
                }
                t = ta + sub;
                w = w - dw + ray_integral(qd_, za, zc, sa);
                seg.samples.back() = zc;
                seg.times.back() = t;
                seg.end.obstacle = best.obstacle;
                seg.end.obstacle_segment = best.segment;
                seg.end.obstacle_fraction = best.fraction;
                finish(AnchorKind::EdgeCrossing);
                break;
            }
        }

        // Recurrence grid.
        const auto c = cell_of(z);
        if (c && c != last_cell) {
            const int n = ++cells[*c];
            seg.max_cell_crossings = std::max(seg.max_cell_crossings, n);
        }
        last_cell = c;
        if (seg.max_cell_crossings > budget_.grid.crossing_cap * budget_.early_stop_factor) {
            finish(AnchorKind::Recurrence);
            break;
        }
        if (truncated) {
            finish(AnchorKind::BudgetExhausted);
            break;
        }
    }
    return seg;
}

void check_seed(const TraceField& field, cplx seed) {
    const cplx fz = field.qd().f(seed);
    if (fz == cplx{} || !std::isfinite(fz.real()) || !std::isfinite(fz.imag()) ||
        field.local_scale(seed) < 1e-12 * field.feature_scale())
        throw Error(Errc::SeedAtCriticalPoint, "tracer", "seed coincides with a critical point");
}

}  // namespace

TrajectorySegment trace_horizontal(const TraceField& field, cplx seed, cplx direction, const TraceBudget& budget,
                                   const TraceOptions& opts) {
    check_seed(field, seed);
    cplx s = std::sqrt(field.qd().f(seed));
    if ((s * direction).real() < 0.0) s = -s;
    Integrator integ(field, 1.0, budget, opts);
    return integ.run(seed, s, TrajectoryKind::Horizontal, npos);
}

TrajectorySegment trace_horizontal(const RationalQD& qd, cplx seed, cplx direction, const TraceBudget& budget) {
    return trace_horizontal(TraceField(qd), seed, direction, budget);
}

TrajectorySegment trace_vertical(const TraceField& field, cplx seed, const TraceBudget& budget,
                                 std::optional<cplx> direction, const TraceOptions& opts) {
    check_seed(field, seed);
    cplx s = std::sqrt(field.qd().f(seed));
    const cplx i(0.0, 1.0);
    if (direction && ((i / s) * std::conj(*direction)).real() < 0.0) s = -s;
    TraceOptions o = opts;
    o.detect_closure = false;
    Integrator integ(field, i, budget, o);
    return integ.run(seed, s, TrajectoryKind::Vertical, npos);
}

TrajectorySegment trace_vertical(const RationalQD& qd, cplx seed, const TraceBudget& budget,
                                 std::optional<cplx> direction) {
    return trace_vertical(TraceField(qd), seed, budget, direction);
}

std::vector<TrajectorySegment> launch_critical(const TraceField& field, const TraceBudget& budget) {
    std::vector<TrajectorySegment> out;
    const auto& inv = field.inventory();
    for (auto idx : inv.finite_critical) {
        const auto& pt = inv.points[idx];
        if (pt.location.at_infinity)
            throw Error(Errc::Unsupported, "tracer", "finite critical point at infinity cannot be launched from");
        const auto& dirs = field.directions(idx);
        for (std::size_t k = 0; k < dirs.size(); ++k) {
            const cplx e = std::polar(1.0, dirs[k]);
            const cplx q = pt.location.z;
            const cplx seed = q + field.launch_offset(idx) * e;
            cplx s = std::sqrt(field.qd().f(seed));
            if ((s * e).real() < 0.0) s = -s;
            const cplx head = -ray_integral(field.qd(), seed, q, s);  // from q to the seed
            TraceOptions opts;
            opts.detect_closure = false;
            Integrator integ(field, 1.0, budget, opts);
            TrajectorySegment seg = integ.run(seed, s, TrajectoryKind::Horizontal, idx);
            const double offset = head.real();
            for (auto& tt : seg.times) tt += offset;
            seg.samples.insert(seg.samples.begin(), q);
            seg.times.insert(seg.times.begin(), 0.0);
            seg.psi_length += offset;
            seg.w_increment += head;
            seg.start.kind = AnchorKind::FiniteCritical;
            seg.start.point = idx;
            seg.start.direction = static_cast<int>(k);
            out.push_back(std::move(seg));
        }
    }
    return out;
}

RecurrenceVerdict recurrence_verdict(const TrajectorySegment& segment, const TraceBudget& budget) {
    if (segment.end.kind == AnchorKind::ClosureToStart) return RecurrenceVerdict::Closed;
    const bool unresolved =
        segment.end.kind == AnchorKind::BudgetExhausted || segment.end.kind == AnchorKind::Recurrence;
    if (unresolved && segment.max_cell_crossings > budget.grid.crossing_cap) return RecurrenceVerdict::RecurrentSuspect;
    return RecurrenceVerdict::Transient;
}

cplx point_at(const RationalQD& qd, const TrajectorySegment& seg, double t) {
    const auto& ts = seg.times;
    if (ts.empty()) return {};
    if (t <= ts.front()) return seg.samples.front();
    if (t >= ts.back()) return seg.samples.back();
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - ts.begin()) - 1;
    const cplx za = seg.samples[k], zb = seg.samples[k + 1];
    const double h = ts[k + 1] - ts[k];
    const double tau = h > 0 ? (t - ts[k]) / h : 0.0;
    const cplx rot = seg.kind == TrajectoryKind::Horizontal ? cplx(1.0) : cplx(0.0, 1.0);
    const cplx chord = zb - za;
    auto vel = [&](cplx z, bool& ok) {
        const cplx fz = qd.f(z);
        if (fz == cplx{} || !std::isfinite(fz.real()) || !std::isfinite(fz.imag())) {
            ok = false;
            return cplx{};
        }
        cplx v = rot / std::sqrt(fz);
        if ((v * std::conj(chord)).real() < 0.0) v = -v;
        return v;
    };
    bool ok = true;
    const cplx va = vel(za, ok), vb = vel(zb, ok);
    if (!ok || h <= 0) return za + tau * chord;
    const double t2 = tau * tau, t3 = t2 * tau;
    return (2 * t3 - 3 * t2 + 1) * za + (t3 - 2 * t2 + tau) * h * va + (-2 * t3 + 3 * t2) * zb + (t3 - t2) * h * vb;
}

}  // namespace qd
