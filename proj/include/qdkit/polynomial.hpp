#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace qd {

using cplx = std::complex<double>;

/// Dense univariate polynomial, coefficients ascending by degree.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<cplx> coeffs);
    Polynomial(std::initializer_list<cplx> coeffs);

    /// Degree of the trimmed polynomial; -1 for the zero polynomial.
    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    bool is_zero() const { return coeffs_.empty(); }
    std::span<const cplx> coeffs() const { return coeffs_; }
    cplx operator[](std::size_t i) const { return i < coeffs_.size() ? coeffs_[i] : cplx{}; }
    cplx leading() const { return coeffs_.empty() ? cplx{} : coeffs_.back(); }

    cplx operator()(cplx z) const;
    /// Value and first derivative in one Horner pass.
    std::pair<cplx, cplx> eval_with_derivative(cplx z) const;

    Polynomial derivative() const;
    /// Coefficients of p(center + h) as a polynomial in h.
    Polynomial taylor_shift(cplx center) const;
    /// Sum of coefficient magnitudes weighted by |z|^k; the natural residual scale at z.
    double magnitude_at(cplx z) const;
    double max_abs_coeff() const;

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(cplx s, const Polynomial& p);
    friend Polynomial operator-(const Polynomial& p) { return cplx(-1.0) * p; }

    /// Quotient and remainder of Euclidean division.
    static std::pair<Polynomial, Polynomial> divmod(const Polynomial& num, const Polynomial& den);
    static Polynomial from_roots(std::span<const cplx> roots, cplx leading = 1.0);
    static Polynomial monomial(int degree, cplx c = 1.0);

    Polynomial monic() const;

private:
    void trim();
    std::vector<cplx> coeffs_;
};

struct Root {
    cplx value;
    int multiplicity = 1;
};

struct RootOptions {
    /// Roots closer than this (times the root scale) are candidates for one multiple root.
    double cluster_tol = 1e-4;
    /// Residual acceptance |p(r)| <= tol * magnitude_at(r).
    double residual_tol = 1e-10;
    int max_iterations = 800;
    std::uint64_t seed = 0x5eed;
};

/// Aberth-Ehrlich simultaneous iteration, Newton polishing and multiplicity
/// clustering. Throws RootFindingFailure if the residual check fails.
std::vector<Root> find_roots(const Polynomial& p, const RootOptions& opts = {});

/// Roots listed once per multiplicity.
std::vector<cplx> expand_roots(std::span<const Root> roots);

}  // namespace qd
