#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qdkit/polynomial.hpp"

namespace qd {

/// A point of the Riemann sphere. Infinity is symbolic.
struct Location {
    cplx z{};
    bool at_infinity = false;

    static Location infinity() { return {cplx{}, true}; }
    static Location finite(cplx z) { return {z, false}; }
    friend bool operator==(const Location&, const Location&) = default;
};

enum class CriticalKind { Zero, SimplePole, HigherPole, Regular };

std::string_view kind_name(CriticalKind k);

struct CriticalPoint {
    Location location;
    CriticalKind kind = CriticalKind::Regular;
    /// Multiplicity of the zero or order of the pole; 0 when regular.
    int order = 0;

    bool is_finite_critical() const { return kind == CriticalKind::Zero || kind == CriticalKind::SimplePole; }
    bool is_infinite_critical() const { return kind == CriticalKind::HigherPole; }
    /// Signed order of f at the point: +m for a zero of order m, -k for a pole of order k.
    int signed_order() const;
};

struct ReductionOptions {
    double cancel_tol = 1e-8;     ///< roots matched within this * scale are cancelled
    double ambiguous_tol = 1e-6;  ///< closer than this but not matched raises
    RootOptions roots{};
};

/// Psi = sign * U1(z)/U2(z) dz^2 in reduced form.
class RationalQD {
public:
    /// Validates, reduces common roots and returns the differential.
    static RationalQD make(Polynomial numerator, Polynomial denominator, int sign = +1,
                           const ReductionOptions& opts = {});

    const Polynomial& numerator() const { return num_; }
    const Polynomial& denominator() const { return den_; }
    int sign() const { return sign_; }

    /// f(z) with Psi = f(z) dz^2.
    cplx f(cplx z) const { return static_cast<double>(sign_) * num_(z) / den_(z); }
    /// Order of the pole at infinity (negative values are zeros there).
    int infinity_pole_order() const { return 4 + num_.degree() - den_.degree(); }

    /// Same zero/pole structure with f multiplied by a constant.
    RationalQD scaled(cplx factor) const;

private:
    RationalQD(Polynomial n, Polynomial d, int s) : num_(std::move(n)), den_(std::move(d)), sign_(s) {}
    Polynomial num_;
    Polynomial den_;
    int sign_ = +1;
};

/// All critical points; finite ones sorted by (re, im), infinity always last.
struct CriticalInventory {
    std::vector<CriticalPoint> points;
    std::vector<std::size_t> finite_critical;    ///< zeros and simple poles
    std::vector<std::size_t> infinite_critical;  ///< poles of order >= 2

    const CriticalPoint& infinity() const { return points.back(); }
    std::size_t infinity_index() const { return points.size() - 1; }
    /// Sum of pole orders minus sum of zero orders, including infinity.
    int euler_balance() const;
};

struct SqrtResidue {
    Location pole;
    /// Representative with Im >= 0 (Re >= 0 on ties); the residue is the pair +-value.
    cplx value;
    /// value^2, the branch-free Laurent coefficient of (z-p)^-2.
    cplx squared;
};

/// Parses {"numerator": [...], "denominator": [...], "sign": +-1}. Coefficients
/// are [re, im] pairs, plain numbers, or a polynomial expression string.
RationalQD parse_differential(std::string_view json_text, const ReductionOptions& opts = {});

CriticalInventory critical_inventory(const RationalQD& qd, const RootOptions& opts = {});

/// Local leading coefficient a with f(z) ~ a (z - p)^order near a finite point p.
cplx local_leading_coefficient(const RationalQD& qd, const CriticalPoint& point);

SqrtResidue sqrt_residue(const RationalQD& qd, const CriticalPoint& pole);
SqrtResidue sqrt_residue(const RationalQD& qd, const Location& pole);

/// Horizontal directions at a finite critical point, ascending in [0, 2pi).
std::vector<double> critical_directions(const RationalQD& qd, const CriticalPoint& point);

/// Normalizes a complex number to the +-representative used for residues.
cplx canonical_sign(cplx v);

}  // namespace qd
