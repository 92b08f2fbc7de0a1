#include "qdkit/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "qdkit/error.hpp"

namespace qd {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double segment_distance(cplx p, cplx a, cplx b) {
    const cplx d = b - a;
    const double len2 = std::norm(d);
    if (len2 == 0.0) return std::abs(p - a);
    const double t = std::clamp(((p - a) * std::conj(d)).real() / len2, 0.0, 1.0);
    return std::abs(p - (a + t * d));
}

double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

double segment_gap(cplx p, cplx q, cplx a, cplx b) {
    const double d1 = cross(q - p, a - p), d2 = cross(q - p, b - p);
    const double d3 = cross(b - a, p - a), d4 = cross(b - a, q - a);
    if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0))) return 0.0;
    return std::min({segment_distance(p, a, b), segment_distance(q, a, b), segment_distance(a, p, q),
                     segment_distance(b, p, q)});
}

double signed_area(const std::vector<cplx>& p) {
    double a = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const cplx u = p[i], v = p[(i + 1) % p.size()];
        a += u.real() * v.imag() - u.imag() * v.real();
    }
    return 0.5 * a;
}

std::vector<cplx> open_contour(const std::vector<cplx>& c) {
    std::vector<cplx> out = c;
    while (out.size() > 1 && std::abs(out.back() - out.front()) <= 1e-12 * (1.0 + std::abs(out.front())))
        out.pop_back();
    return out;
}

// Point at psi-arclength t along an edge. The intervals touching a critical endpoint are solved
// exactly along the chord, where the cubic model breaks down.
cplx edge_point(const RationalQD& qd, const TrajectorySegment& view, double t) {
    const auto& ts = view.times;
    const auto& zs = view.samples;
    const std::size_t last = zs.size() - 1;
    std::size_t k = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
    k = std::clamp<std::size_t>(k, 1, last) - 1;
    if (k != 0 && k + 1 != last) return point_at(qd, view, t);
    const bool at_tail = k == 0;
    const cplx crit = at_tail ? zs.front() : zs.back();
    const cplx other = at_tail ? zs[1] : zs[last - 1];
    const double target = at_tail ? t - ts.front() : ts.back() - t;
    auto dist = [&](double s) {
        const cplx p = crit + s * (other - crit);
        return std::abs(ray_integral(qd, p, crit, std::sqrt(qd.f(p))));
    };
    double lo = 0.0, hi = 1.0;
    if (dist(hi) < target) return point_at(qd, view, t);
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (dist(mid) < target ? lo : hi) = mid;
    }
    return crit + 0.5 * (lo + hi) * (other - crit);
}

}  // namespace

std::vector<Atom> SignedMeasure::finite_atoms() const {
    std::vector<Atom> out;
    for (const auto& t : edge_terms) out.insert(out.end(), t.atoms.begin(), t.atoms.end());
    for (const auto& p : pole_masses)
        if (!p.location.at_infinity) out.push_back({p.location.z, p.mass});
    out.insert(out.end(), extra_atoms.begin(), extra_atoms.end());
    return out;
}

double SignedMeasure::finite_mass() const {
    double s = 0.0;
    for (const auto& a : finite_atoms()) s += a.weight;
    return s;
}

double SignedMeasure::variation() const {
    double s = 0.0;
    for (const auto& a : finite_atoms()) s += std::abs(a.weight);
    for (const auto& p : pole_masses)
        if (p.location.at_infinity) s += std::abs(p.mass);
    return s;
}

bool SignedMeasure::edges_nonnegative() const {
    return std::all_of(edge_terms.begin(), edge_terms.end(), [](const EdgeTerm& t) { return t.coefficient >= 0; });
}

bool SignedMeasure::empty() const {
    for (const auto& a : finite_atoms())
        if (a.weight != 0.0) return false;
    return true;
}

SignedMeasure SignedMeasure::scaled(double factor) const {
    SignedMeasure m = *this;
    for (auto& t : m.edge_terms)
        for (auto& a : t.atoms) a.weight *= factor;
    for (auto& p : m.pole_masses) p.mass *= factor;
    for (auto& a : m.extra_atoms) a.weight *= factor;
    m.total_mass *= factor;
    return m;
}

SignedMeasure build_levy_measure(const TraceField& field, const CriticalGraph& cg, const BoundarySystem& bs,
                                 const ReebGraph& reeb, const Orientation& o, const MeasureOptions& opts) {
    if (o.forward.size() != reeb.edges.size())
        throw Error(Errc::InvalidInput, "measures", "orientation size does not match the Reeb graph");
    try {
        integrate_potential(reeb, o);
    } catch (const Error& e) {
        if (e.code() == Errc::InconsistentCocycle)
            throw Error(Errc::NotGradientOrientation, "measures", "orientation is not a gradient orientation");
        throw;
    }
    const auto& qd = field.qd();
    SignedMeasure m;
    double active_length = 0.0;
    for (const auto& e : cg.edges) {
        EdgeTerm t;
        t.edge = e.id;
        for (int b : bs.edge_sides.at(e.id)) {
            const auto& r = reeb.edges.at(reeb.edge_of_boundary.at(b));
            t.coefficient += o.toward(r, b) ? 1 : -1;
        }
        if (t.coefficient != 0) {
            if (e.psi_length.is_infinite())
                throw Error(Errc::InfiniteDensityEdge, "measures",
                            "nonzero density on the infinite edge " + std::to_string(e.id));
            if (e.polyline.size() < 2)
                throw Error(Errc::InvalidInput, "measures", "edge " + std::to_string(e.id) + " has no polyline");
            t.psi_length = e.psi_length.value();
            active_length += t.psi_length;
        } else if (e.psi_length.is_finite()) {
            t.psi_length = e.psi_length.value();
        }
        m.edge_terms.push_back(std::move(t));
    }
    for (auto& t : m.edge_terms) {
        if (t.coefficient == 0) continue;
        const auto& e = cg.edges[t.edge];
        const auto n = std::max<std::size_t>(
            8, static_cast<std::size_t>(std::llround(static_cast<double>(opts.total_atoms) * t.psi_length / active_length)));
        TrajectorySegment view;
        view.samples = e.polyline;
        view.times = e.times;
        if (view.times.size() != view.samples.size()) {
            view.times.assign(1, 0.0);
            for (std::size_t i = 1; i < e.polyline.size(); ++i)
                view.times.push_back(view.times.back() + std::abs(e.polyline[i] - e.polyline[i - 1]));
        }
        const double span = view.times.back();
        const double w = t.coefficient * t.psi_length / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double tk = (static_cast<double>(k) + 0.5) * span / static_cast<double>(n);
            t.atoms.push_back({edge_point(qd, view, tk), w});
            if (k > 0) m.atom_spacing = std::max(m.atom_spacing, std::abs(t.atoms[k].point - t.atoms[k - 1].point));
        }
    }
    const auto& inv = field.inventory();
    for (const auto& r : reeb.edges) {
        if (!r.is_leaf() || r.kind != DomainKind::Circle || r.pole == npos) continue;
        const double width = r.width.value();
        m.pole_masses.push_back({r.pole, inv.points.at(r.pole).location, o.forward[r.id] ? width : -width});
    }
    for (const auto& t : m.edge_terms)
        for (const auto& a : t.atoms) m.total_mass += a.weight;
    for (const auto& p : m.pole_masses) m.total_mass += p.mass;
    return m;
}

double green_mass_oracle(const std::function<double(cplx)>& F, const std::vector<cplx>& contour, double step,
                         const std::vector<std::vector<cplx>>& support) {
    const auto c = open_contour(contour);
    if (c.size() < 3) throw Error(Errc::InvalidInput, "measures", "contour needs at least three points");
    if (!(step > 0.0)) throw Error(Errc::InvalidInput, "measures", "finite-difference step must be positive");
    for (const auto& poly : support)
        for (std::size_t j = 0; j < poly.size(); ++j) {
            const cplx p = poly[j], q = j + 1 < poly.size() ? poly[j + 1] : poly[j];
            for (std::size_t i = 0; i < c.size(); ++i) {
                const cplx a = c[i], b = c[(i + 1) % c.size()];
                if (segment_gap(p, q, a, b) < 2.0 * step)
                    throw Error(Errc::ContourTouchesSupport, "measures", "contour passes through the support");
            }
        }
    const bool ccw = signed_area(c) > 0.0;
    // 3-point Gauss-Legendre along every chord.
    static constexpr double nodes[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static constexpr double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    double flux = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const cplx a = c[i], b = c[(i + 1) % c.size()];
        const cplx d = b - a;
        const double len = std::abs(d);
        if (len == 0.0) continue;
        const cplx n = (ccw ? cplx(0, -1) : cplx(0, 1)) * d / len;
        for (int g = 0; g < 3; ++g) {
            const cplx p = 0.5 * (a + b) + 0.5 * nodes[g] * d;
            const double dn = (F(p + step * n) - F(p - step * n)) / (2.0 * step);
            flux += 0.5 * len * weights[g] * dn;
        }
    }
    return flux;
}

std::function<double(cplx)> core_level_function(const RationalQD& qd, const ReebEdge& e, const Orientation& o,
                                                const CriticalGraph& cg) {
    const auto core = open_contour(e.core_curve);
    if (core.size() < 3) throw Error(Errc::InvalidInput, "measures", "Reeb edge has no core curve");
    const bool ccw = signed_area(core) > 0.0;
    const std::size_t n = core.size();
    std::vector<cplx> branch(n);
    std::vector<double> sense(n);
    for (std::size_t k = 0; k < n; ++k) {
        const cplx fz = qd.f(core[k]);
        branch[k] = k == 0 ? std::sqrt(fz) : continue_branch(fz, branch[k - 1]);
        const cplx t = core[(k + 1) % n] - core[(k + n - 1) % n];
        const cplx out = (ccw ? cplx(0, -1) : cplx(0, 1)) * t / std::abs(t);
        sense[k] = (branch[k] * out).imag() >= 0.0 ? 1.0 : -1.0;
    }
    const cplx inside_probe = cg.vertices.at(cg.component_vertices(e.tail).front()).location;
    const bool tail_inside = point_in_polygon(inside_probe, core);
    const bool rises_to_head = o.forward.at(e.id) == 0;
    const double outward = tail_inside == rises_to_head ? 1.0 : -1.0;
    return [qd, core, branch, sense, outward, hint = std::size_t(0)](cplx z) mutable {
        const std::size_t n = core.size();
        auto d2 = [&](std::size_t k) { return std::norm(z - core[k % n]); };
        // Local search around the previous answer, full scan when it runs to the window edge.
        std::size_t best = hint;
        double bd = d2(hint);
        for (std::size_t j = 1; j <= 16; ++j)
            for (std::size_t k : {hint + j, hint + n - j})
                if (d2(k) < bd) {
                    bd = d2(k);
                    best = k % n;
                }
        const std::size_t off = (best + n - hint) % n;
        if (off >= 16 && off <= n - 16) {
            for (std::size_t k = 0; k < n; ++k)
                if (d2(k) < bd) {
                    bd = d2(k);
                    best = k;
                }
        }
        hint = best;
        return outward * sense[best] * ray_integral(qd, core[best], z, branch[best]).imag();
    };
}

std::vector<double> green_component_masses(const RationalQD& qd, const CriticalGraph& cg, const ReebGraph& reeb,
                                           const Orientation& o) {
    std::vector<double> mass(static_cast<std::size_t>(reeb.vertex_count), 0.0);
    std::vector<std::vector<cplx>> support;
    for (const auto& e : cg.edges) support.push_back(e.polyline);
    for (const auto& e : reeb.edges) {
        if (e.kind != DomainKind::Ring && e.kind != DomainKind::Circle) continue;
        const auto core = open_contour(e.core_curve);
        double extent = 0.0;
        for (auto z : core) extent = std::max(extent, std::abs(z - core.front()));
        const double flux = green_mass_oracle(core_level_function(qd, e, o, cg), core, 1e-6 * extent, support);
        auto inside = [&](int v) {
            return point_in_polygon(cg.vertices.at(cg.component_vertices(v).front()).location, core);
        };
        mass[e.tail] += inside(e.tail) ? flux : -flux;
        if (!e.is_leaf()) mass[e.head] += inside(e.head) ? flux : -flux;
    }
    return mass;
}

std::vector<TransformSample> evaluate_transforms(const SignedMeasure& m, const std::vector<cplx>& points,
                                                 bool check_identity) {
    const auto atoms = m.finite_atoms();
    double total = 0.0;
    for (const auto& a : atoms) total += std::abs(a.weight);
    auto u_at = [&](cplx z) {
        double u = 0.0;
        for (const auto& a : atoms) u += a.weight * std::log(std::abs(z - a.point));
        return u;
    };
    std::vector<TransformSample> out;
    for (cplx z : points) {
        double dmin = std::numeric_limits<double>::infinity();
        for (const auto& a : atoms) dmin = std::min(dmin, std::abs(z - a.point));
        if (m.atom_spacing > 0.0 && dmin < 5.0 * m.atom_spacing)
            throw Error(Errc::PointTooCloseToSupport, "measures", "sample point within 5 atom spacings of the support");
        if (dmin == 0.0) throw Error(Errc::PointTooCloseToSupport, "measures", "sample point on an atom");
        TransformSample s;
        s.point = z;
        for (const auto& a : atoms) s.cauchy += a.weight / (z - a.point);
        s.log_potential = u_at(z);
        if (check_identity && !atoms.empty()) {
            const double h = 1e-3 * dmin;
            auto d4 = [&](cplx dir) {
                return (-u_at(z + 2.0 * h * dir) + 8.0 * u_at(z + h * dir) - 8.0 * u_at(z - h * dir) +
                        u_at(z - 2.0 * h * dir)) /
                       (12.0 * h);
            };
            const cplx grad = cplx(d4(1.0), -d4(cplx(0, 1)));
            s.identity_residual = std::abs(s.cauchy - grad) / (total / dmin);
        }
        out.push_back(s);
    }
    return out;
}

BranchResidual verify_branch_equation(const SignedMeasure& m, const RationalQD& qd, const std::vector<cplx>& points,
                                      double tol) {
    const auto& num = qd.numerator();
    const auto& den = qd.denominator();
    if (den.degree() - num.degree() != 2)
        throw Error(Errc::DegreeMismatch, "measures", "branch equation needs deg U2 - deg U1 = 2");
    BranchResidual r;
    r.normalization = m.finite_mass();
    if (std::abs(r.normalization) < 1e-300) throw Error(Errc::InvalidInput, "measures", "measure has zero finite mass");
    const auto samples = evaluate_transforms(m.scaled(1.0 / r.normalization), points, false);
    // Psi = -U1/U2 dz^2 with U1/U2 = kappa (monic ratio); a unit-mass transform behaves like 1/z.
    const double kappa = std::abs(num.leading() / den.leading());
    for (const auto& s : samples) {
        const cplx target = -qd.f(s.point) / kappa;
        const double res = std::abs(s.cauchy * s.cauchy - target);
        r.max = std::max(r.max, res);
        r.mean += res;
    }
    if (!samples.empty()) r.mean /= static_cast<double>(samples.size());
    r.pass = r.max <= tol;
    return r;
}

int RealMeasureSet::positive_count() const {
    return static_cast<int>(std::count_if(measures.begin(), measures.end(), [](const RealMeasure& m) { return m.positive; }));
}

RealMeasureSet enumerate_real_measures(const TraceField& field, const CriticalGraph& cg, const BoundarySystem& bs,
                                       const ReebGraph& reeb, const MeasureOptions& opts) {
    const auto& qd = field.qd();
    if (qd.denominator().degree() - qd.numerator().degree() != 2)
        throw Error(Errc::NotStrebelForm, "measures", "differential is not of the form -U1/U2 dz^2 with deg U2 - deg U1 = 2");
    if (!is_strebel(reeb).strebel) throw Error(Errc::NotStrebelForm, "measures", "differential is not Strebel");
    const std::size_t infinity = field.inventory().infinity_index();
    int fixed = -1;
    for (const auto& e : reeb.edges)
        if (e.is_leaf() && e.pole == infinity) fixed = e.id;
    if (fixed < 0) throw Error(Errc::NotStrebelForm, "measures", "no circle domain around infinity");
    RealMeasureSet set;
    set.domains = static_cast<int>(reeb.edges.size());
    if (reeb.edges.size() > 24) throw Error(Errc::TooLarge, "measures", "too many domains to enumerate");
    std::vector<cplx> probes;
    double extent = 0.0;
    for (const auto& e : cg.edges)
        for (auto z : e.polyline) extent = std::max(extent, std::abs(z));
    for (int k = 0; k < 12; ++k) probes.push_back((2.0 * extent + 1.0) * std::polar(1.0, kTwoPi * (k + 0.25) / 12));
    const std::size_t free_bits = reeb.edges.size() - 1;
    for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << free_bits); ++mask) {
        RealMeasure rm;
        rm.orientation.forward.assign(reeb.edges.size(), 0);
        std::size_t bit = 0;
        for (const auto& e : reeb.edges)
            if (e.id != fixed) rm.orientation.forward[e.id] = (mask >> bit++) & 1;
        const auto raw = build_levy_measure(field, cg, bs, reeb, rm.orientation, opts);
        rm.residual = verify_branch_equation(raw, qd, probes);
        rm.measure = raw.scaled(1.0 / rm.residual.normalization);
        rm.positive = rm.measure.edges_nonnegative();
        for (const auto& p : rm.measure.pole_masses)
            if (!p.location.at_infinity && p.mass < 0.0) rm.positive = false;
        set.measures.push_back(std::move(rm));
    }
    return set;
}

bool reconstruct_check(const SignedMeasure& m, const RationalQD& qd, std::vector<cplx> points, double rel_tol) {
    if (m.empty()) return true;
    if (points.empty()) {
        double extent = 0.0;
        for (const auto& a : m.finite_atoms()) extent = std::max(extent, std::abs(a.point));
        for (int k = 0; k < 16; ++k) points.push_back((2.0 * extent + 1.0) * std::polar(1.0, kTwoPi * (k + 0.3) / 16));
    }
    for (const auto& s : evaluate_transforms(m, points, false)) {
        const cplx c = s.cauchy / kTwoPi;
        const cplx f = qd.f(s.point);
        if (std::abs(-c * c - f) > rel_tol * std::abs(f)) return false;
    }
    return true;
}

void write_atoms_csv(std::ostream& os, const SignedMeasure& m) {
    os << "point_re,point_im,weight\n";
    os.precision(17);
    for (const auto& a : m.finite_atoms()) os << a.point.real() << ',' << a.point.imag() << ',' << a.weight << '\n';
}

}  // namespace qd
