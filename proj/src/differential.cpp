#include "qdkit/differential.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "qdkit/error.hpp"
#include "qdkit/expression.hpp"

namespace qd {

std::string_view errc_name(Errc code) {
    switch (code) {
        case Errc::InvalidInput: return "InvalidInput";
        case Errc::EmptyPolynomial: return "EmptyPolynomial";
        case Errc::UnreducibleWithinTolerance: return "UnreducibleWithinTolerance";
        case Errc::ZeroDifferential: return "ZeroDifferential";
        case Errc::RootFindingFailure: return "RootFindingFailure";
        case Errc::NotDoublePole: return "NotDoublePole";
        case Errc::NotFiniteCritical: return "NotFiniteCritical";
        case Errc::Unsupported: return "Unsupported";
        case Errc::SeedAtCriticalPoint: return "SeedAtCriticalPoint";
        case Errc::StepSizeUnderflow: return "StepSizeUnderflow";
        case Errc::BranchContinuationFailure: return "BranchContinuationFailure";
        case Errc::GluingAmbiguity: return "GluingAmbiguity";
        case Errc::NoFiniteCritical: return "NoFiniteCritical";
        case Errc::ChaoticInput: return "ChaoticInput";
        case Errc::ProbeInconsistency: return "ProbeInconsistency";
        case Errc::TooLarge: return "TooLarge";
        case Errc::InconsistentCocycle: return "InconsistentCocycle";
        case Errc::IndeterminateInfinity: return "IndeterminateInfinity";
        case Errc::NonPlanarInput: return "NonPlanarInput";
        case Errc::NotGradientOrientation: return "NotGradientOrientation";
        case Errc::InfiniteDensityEdge: return "InfiniteDensityEdge";
        case Errc::ContourTouchesSupport: return "ContourTouchesSupport";
        case Errc::PointTooCloseToSupport: return "PointTooCloseToSupport";
        case Errc::DegreeMismatch: return "DegreeMismatch";
        case Errc::NotStrebelForm: return "NotStrebelForm";
        case Errc::NoConvergence: return "NoConvergence";
        case Errc::RootCollision: return "RootCollision";
        case Errc::BudgetExhausted: return "BudgetExhausted";
        case Errc::NonConvergingChain: return "NonConvergingChain";
    }
    return "Unknown";
}

std::string_view kind_name(CriticalKind k) {
    switch (k) {
        case CriticalKind::Zero: return "zero";
        case CriticalKind::SimplePole: return "simple-pole";
        case CriticalKind::HigherPole: return "higher-pole";
        case CriticalKind::Regular: return "regular";
    }
    return "regular";
}

int CriticalPoint::signed_order() const {
    switch (kind) {
        case CriticalKind::Zero: return order;
        case CriticalKind::SimplePole: return -1;
        case CriticalKind::HigherPole: return -order;
        case CriticalKind::Regular: return 0;
    }
    return 0;
}

int CriticalInventory::euler_balance() const {
    int balance = 0;
    for (const auto& p : points) balance -= p.signed_order();
    return balance;
}

cplx canonical_sign(cplx v) {
    if (v.imag() < 0.0 || (v.imag() == 0.0 && v.real() < 0.0)) return -v;
    return v;
}

namespace {

Polynomial divide_out(const Polynomial& p, cplx root, int times) {
    Polynomial q = p;
    for (int k = 0; k < times; ++k) q = Polynomial::divmod(q, Polynomial({-root, 1.0})).first;
    return q;
}

double root_scale(const std::vector<Root>& a, const std::vector<Root>& b) {
    double s = 1.0;
    for (const auto& r : a) s = std::max(s, std::abs(r.value));
    for (const auto& r : b) s = std::max(s, std::abs(r.value));
    return s;
}

}  // namespace

RationalQD RationalQD::make(Polynomial numerator, Polynomial denominator, int sign, const ReductionOptions& opts) {
    if (sign != 1 && sign != -1) throw Error(Errc::InvalidInput, "qd-core", "sign must be +1 or -1");
    if (denominator.is_zero()) throw Error(Errc::EmptyPolynomial, "qd-core", "denominator is the zero polynomial");
    if (numerator.is_zero()) throw Error(Errc::ZeroDifferential, "qd-core", "numerator is the zero polynomial");

    auto num_roots = find_roots(numerator, opts.roots);
    auto den_roots = find_roots(denominator, opts.roots);
    const double scale = root_scale(num_roots, den_roots);

    // Greedy cancellation of matched roots; ambiguous near-matches are refused.
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < num_roots.size() && !changed; ++i) {
            for (std::size_t j = 0; j < den_roots.size() && !changed; ++j) {
                const double d = std::abs(num_roots[i].value - den_roots[j].value);
                if (d < opts.cancel_tol * scale) {
                    const int k = std::min(num_roots[i].multiplicity, den_roots[j].multiplicity);
                    const cplx c = 0.5 * (num_roots[i].value + den_roots[j].value);
                    numerator = divide_out(numerator, c, k);
                    denominator = divide_out(denominator, c, k);
                    num_roots[i].multiplicity -= k;
                    den_roots[j].multiplicity -= k;
                    if (num_roots[i].multiplicity == 0) num_roots.erase(num_roots.begin() + static_cast<std::ptrdiff_t>(i));
                    if (den_roots[j].multiplicity == 0) den_roots.erase(den_roots.begin() + static_cast<std::ptrdiff_t>(j));
                    changed = true;
                } else if (d < opts.ambiguous_tol * scale) {
                    throw Error(Errc::UnreducibleWithinTolerance, "qd-core",
                                "numerator and denominator roots are within " + std::to_string(d) +
                                    " but do not match to the cancellation tolerance");
                }
            }
        }
    }
    return RationalQD(std::move(numerator), std::move(denominator), sign);
}

RationalQD RationalQD::scaled(cplx factor) const { return RationalQD(factor * num_, den_, sign_); }

namespace {

cplx parse_coefficient(const nlohmann::json& c) {
    if (c.is_number()) return {c.get<double>(), 0.0};
    if (c.is_array() && c.size() == 2 && c[0].is_number() && c[1].is_number())
        return {c[0].get<double>(), c[1].get<double>()};
    throw Error(Errc::InvalidInput, "qd-core", "coefficient must be a number or an [re, im] pair");
}

Polynomial parse_poly_field(const nlohmann::json& doc, const char* key) {
    if (!doc.contains(key)) throw Error(Errc::InvalidInput, "qd-core", std::string("missing field '") + key + "'");
    const auto& v = doc.at(key);
    if (v.is_string()) {
        Polynomial p = parse_polynomial_expression(v.get<std::string>());
        if (p.is_zero() && std::string(key) == "denominator")
            throw Error(Errc::EmptyPolynomial, "qd-core", "denominator expression is zero");
        return p;
    }
    if (!v.is_array()) throw Error(Errc::InvalidInput, "qd-core", std::string("field '") + key + "' must be an array");
    if (v.empty()) throw Error(Errc::EmptyPolynomial, "qd-core", std::string("field '") + key + "' is empty");
    std::vector<cplx> coeffs;
    coeffs.reserve(v.size());
    for (const auto& c : v) coeffs.push_back(parse_coefficient(c));
    if (coeffs.back() == cplx{})
        throw Error(Errc::InvalidInput, "qd-core", std::string("leading coefficient of '") + key + "' is zero");
    return Polynomial(std::move(coeffs));
}

}  // namespace

RationalQD parse_differential(std::string_view json_text, const ReductionOptions& opts) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidInput, "qd-core", std::string("malformed document: ") + e.what());
    }
    if (!doc.is_object()) throw Error(Errc::InvalidInput, "qd-core", "document must be an object");
    Polynomial num = parse_poly_field(doc, "numerator");
    Polynomial den = parse_poly_field(doc, "denominator");
    const int sign = doc.value("sign", 1);
    if (num.is_zero()) throw Error(Errc::ZeroDifferential, "qd-core", "numerator is identically zero");
    return RationalQD::make(std::move(num), std::move(den), sign, opts);
}

CriticalInventory critical_inventory(const RationalQD& qd, const RootOptions& opts) {
    CriticalInventory inv;
    for (const auto& r : find_roots(qd.numerator(), opts))
        inv.points.push_back({Location::finite(r.value), CriticalKind::Zero, r.multiplicity});
    for (const auto& r : find_roots(qd.denominator(), opts)) {
        const auto kind = r.multiplicity == 1 ? CriticalKind::SimplePole : CriticalKind::HigherPole;
        inv.points.push_back({Location::finite(r.value), kind, r.multiplicity});
    }
    std::sort(inv.points.begin(), inv.points.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        if (a.location.z.real() != b.location.z.real()) return a.location.z.real() < b.location.z.real();
        return a.location.z.imag() < b.location.z.imag();
    });

    CriticalPoint inf{Location::infinity(), CriticalKind::Regular, 0};
    const int k = qd.infinity_pole_order();
    if (k >= 2) inf = {Location::infinity(), CriticalKind::HigherPole, k};
    else if (k == 1) inf = {Location::infinity(), CriticalKind::SimplePole, 1};
    else if (k < 0) inf = {Location::infinity(), CriticalKind::Zero, -k};
    inv.points.push_back(inf);

    for (std::size_t i = 0; i < inv.points.size(); ++i) {
        if (inv.points[i].is_finite_critical()) inv.finite_critical.push_back(i);
        if (inv.points[i].is_infinite_critical()) inv.infinite_critical.push_back(i);
    }
    if (inv.euler_balance() != 4)
        throw Error(Errc::RootFindingFailure, "qd-core",
                    "pole/zero balance is " + std::to_string(inv.euler_balance()) + ", expected 4");
    return inv;
}

cplx local_leading_coefficient(const RationalQD& qd, const CriticalPoint& point) {
    if (point.location.at_infinity)
        throw Error(Errc::Unsupported, "qd-core", "local coefficient at infinity is taken in the w = 1/z chart");
    const cplx p = point.location.z;
    const double s = static_cast<double>(qd.sign());
    switch (point.kind) {
        case CriticalKind::Zero: {
            const Polynomial t = qd.numerator().taylor_shift(p);
            return s * t[static_cast<std::size_t>(point.order)] / qd.denominator()(p);
        }
        case CriticalKind::SimplePole:
        case CriticalKind::HigherPole: {
            const Polynomial t = qd.denominator().taylor_shift(p);
            return s * qd.numerator()(p) / t[static_cast<std::size_t>(point.order)];
        }
        case CriticalKind::Regular: return qd.f(p);
    }
    return {};
}

SqrtResidue sqrt_residue(const RationalQD& qd, const CriticalPoint& pole) {
    if (pole.kind != CriticalKind::HigherPole || pole.order != 2)
        throw Error(Errc::NotDoublePole, "qd-core", "sqrt residue requires a pole of order exactly 2");
    cplx c;
    if (pole.location.at_infinity) {
        c = static_cast<double>(qd.sign()) * qd.numerator().leading() / qd.denominator().leading();
    } else {
        c = local_leading_coefficient(qd, pole);
    }
    return {pole.location, canonical_sign(std::sqrt(c)), c};
}

SqrtResidue sqrt_residue(const RationalQD& qd, const Location& pole) {
    const auto inv = critical_inventory(qd);
    if (pole.at_infinity) return sqrt_residue(qd, inv.infinity());
    const CriticalPoint* best = nullptr;
    double best_d = 0.0;
    for (const auto& p : inv.points) {
        if (p.location.at_infinity) continue;
        const double d = std::abs(p.location.z - pole.z);
        if (!best || d < best_d) { best = &p; best_d = d; }
    }
    if (!best || best_d > 1e-6 * std::max(1.0, std::abs(pole.z)))
        throw Error(Errc::NotDoublePole, "qd-core", "no pole at the requested location");
    return sqrt_residue(qd, *best);
}

std::vector<double> critical_directions(const RationalQD& qd, const CriticalPoint& point) {
    if (!point.is_finite_critical())
        throw Error(Errc::NotFiniteCritical, "qd-core", "critical directions need a zero or a simple pole");
    if (point.location.at_infinity)
        throw Error(Errc::Unsupported, "qd-core", "finite critical points at infinity are not traced");
    const int n = point.kind == CriticalKind::Zero ? point.order + 2 : 1;
    const cplx a = local_leading_coefficient(qd, point);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        double th = std::fmod((-std::arg(a) + two_pi * k) / n, two_pi);
        if (th < 0.0) th += two_pi;
        if (th >= two_pi) th -= two_pi;
        out.push_back(th);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace qd
