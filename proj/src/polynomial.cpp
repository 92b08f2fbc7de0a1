#include "qdkit/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "qdkit/error.hpp"

namespace qd {

Polynomial::Polynomial(std::vector<cplx> coeffs) : coeffs_(std::move(coeffs)) { trim(); }
Polynomial::Polynomial(std::initializer_list<cplx> coeffs) : coeffs_(coeffs) { trim(); }

void Polynomial::trim() {
    while (!coeffs_.empty() && coeffs_.back() == cplx{}) coeffs_.pop_back();
}

cplx Polynomial::operator()(cplx z) const {
    cplx acc{};
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * z + *it;
    return acc;
}

std::pair<cplx, cplx> Polynomial::eval_with_derivative(cplx z) const {
    cplx p{}, dp{};
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
        dp = dp * z + p;
        p = p * z + *it;
    }
    return {p, dp};
}

Polynomial Polynomial::derivative() const {
    if (coeffs_.size() <= 1) return {};
    std::vector<cplx> d(coeffs_.size() - 1);
    for (std::size_t k = 1; k < coeffs_.size(); ++k) d[k - 1] = coeffs_[k] * static_cast<double>(k);
    return Polynomial(std::move(d));
}

Polynomial Polynomial::taylor_shift(cplx center) const {
    // Repeated synthetic division by (z - center).
    std::vector<cplx> a = coeffs_;
    const std::size_t n = a.size();
    for (std::size_t k = 0; k + 1 < n; ++k) {
        for (std::size_t j = n - 1; j > k; --j) a[j - 1] += center * a[j];
    }
    return Polynomial(std::move(a));
}

double Polynomial::magnitude_at(cplx z) const {
    double acc = 0.0;
    const double r = std::abs(z);
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * r + std::abs(*it);
    return acc;
}

double Polynomial::max_abs_coeff() const {
    double m = 0.0;
    for (const auto& c : coeffs_) m = std::max(m, std::abs(c));
    return m;
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<cplx> c(std::max(a.coeffs_.size(), b.coeffs_.size()));
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a[i] + b[i];
    return Polynomial(std::move(c));
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<cplx> c(a.coeffs_.size() + b.coeffs_.size() - 1);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
        for (std::size_t j = 0; j < b.coeffs_.size(); ++j) c[i + j] += a.coeffs_[i] * b.coeffs_[j];
    return Polynomial(std::move(c));
}

Polynomial operator*(cplx s, const Polynomial& p) {
    std::vector<cplx> c = p.coeffs_;
    for (auto& x : c) x *= s;
    return Polynomial(std::move(c));
}

std::pair<Polynomial, Polynomial> Polynomial::divmod(const Polynomial& num, const Polynomial& den) {
    if (den.is_zero()) throw Error(Errc::InvalidInput, "polynomial", "division by the zero polynomial");
    if (num.degree() < den.degree()) return {Polynomial{}, num};
    std::vector<cplx> r = num.coeffs_;
    const int dn = den.degree();
    std::vector<cplx> q(static_cast<std::size_t>(num.degree() - dn + 1));
    for (int k = num.degree() - dn; k >= 0; --k) {
        const cplx c = r[static_cast<std::size_t>(k + dn)] / den.leading();
        q[static_cast<std::size_t>(k)] = c;
        for (int j = 0; j <= dn; ++j) r[static_cast<std::size_t>(k + j)] -= c * den.coeffs_[static_cast<std::size_t>(j)];
    }
    r.resize(static_cast<std::size_t>(dn));
    return {Polynomial(std::move(q)), Polynomial(std::move(r))};
}

Polynomial Polynomial::from_roots(std::span<const cplx> roots, cplx leading) {
    Polynomial p({leading});
    for (const auto& r : roots) p = p * Polynomial({-r, 1.0});
    return p;
}

Polynomial Polynomial::monomial(int degree, cplx c) {
    std::vector<cplx> v(static_cast<std::size_t>(degree + 1));
    v.back() = c;
    return Polynomial(std::move(v));
}

Polynomial Polynomial::monic() const {
    if (is_zero()) return {};
    return (1.0 / leading()) * *this;
}

namespace {

std::vector<cplx> aberth(const Polynomial& p, const RootOptions& opts) {
    const int n = p.degree();
    std::vector<cplx> z(static_cast<std::size_t>(n));
    double ratio = 0.0;
    for (int k = 0; k < n; ++k) ratio = std::max(ratio, std::abs(p[static_cast<std::size_t>(k)] / p.leading()));
    const double radius = 1.0 + ratio;
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double offset = 2.0 * std::numbers::pi * unit(rng);
    for (int k = 0; k < n; ++k) {
        const double jitter = 1.0 + 0.1 * (unit(rng) - 0.5);
        z[static_cast<std::size_t>(k)] =
            std::polar(radius * jitter, offset + 2.0 * std::numbers::pi * k / n);
    }
    std::vector<bool> done(z.size(), false);
    for (int it = 0; it < opts.max_iterations; ++it) {
        bool all = true;
        for (std::size_t k = 0; k < z.size(); ++k) {
            if (done[k]) continue;
            auto [v, dv] = p.eval_with_derivative(z[k]);
            if (v == cplx{}) { done[k] = true; continue; }
            const cplx ratio_k = v / dv;
            cplx sum{};
            for (std::size_t j = 0; j < z.size(); ++j)
                if (j != k) sum += 1.0 / (z[k] - z[j]);
            const cplx step = ratio_k / (1.0 - ratio_k * sum);
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) {
                z[k] += cplx(1e-8, 1e-8) * (1.0 + std::abs(z[k]));
                all = false;
                continue;
            }
            z[k] -= step;
            if (std::abs(step) <= 4e-16 * std::max(1.0, std::abs(z[k]))) done[k] = true;
            else all = false;
        }
        if (all) break;
    }
    return z;
}

cplx newton_polish(const Polynomial& p, cplx z, int iters) {
    double best = std::abs(p(z));
    for (int i = 0; i < iters; ++i) {
        auto [v, dv] = p.eval_with_derivative(z);
        if (dv == cplx{}) break;
        const cplx cand = z - v / dv;
        const double r = std::abs(p(cand));
        if (!(r < best)) break;
        best = r;
        z = cand;
    }
    return z;
}

}  // namespace

std::vector<Root> find_roots(const Polynomial& p, const RootOptions& opts) {
    std::vector<Root> out;
    if (p.degree() <= 0) return out;

    // Exact zero roots are factored out symbolically.
    std::size_t zeros = 0;
    while (p[zeros] == cplx{}) ++zeros;
    std::vector<cplx> rest(p.coeffs().begin() + static_cast<std::ptrdiff_t>(zeros), p.coeffs().end());
    const Polynomial q(std::move(rest));
    if (zeros > 0) out.push_back({cplx{}, static_cast<int>(zeros)});

    if (q.degree() == 1) {
        out.push_back({-q[0] / q[1], 1});
    } else if (q.degree() > 1) {
        std::vector<cplx> z = aberth(q, opts);
        double scale = 1.0;
        for (const auto& r : z) scale = std::max(scale, std::abs(r));
        const double link = opts.cluster_tol * scale;

        // Single-linkage clustering of candidate multiple roots.
        std::vector<std::size_t> parent(z.size());
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](std::size_t a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (std::size_t i = 0; i < z.size(); ++i)
            for (std::size_t j = i + 1; j < z.size(); ++j)
                if (std::abs(z[i] - z[j]) < link) parent[find(i)] = find(j);

        std::vector<std::vector<std::size_t>> clusters(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) clusters[find(i)].push_back(i);

        for (const auto& members : clusters) {
            if (members.empty()) continue;
            const int k = static_cast<int>(members.size());
            if (k == 1) {
                out.push_back({newton_polish(q, z[members[0]], 6), 1});
                continue;
            }
            cplx c{};
            for (auto i : members) c += z[i];
            c /= static_cast<double>(k);
            Polynomial g = q;
            for (int d = 0; d < k - 1; ++d) g = g.derivative();
            c = newton_polish(g, c, 60);
            const Polynomial t = q.taylor_shift(c);
            bool multiple = std::abs(t[static_cast<std::size_t>(k)]) > 0.0;
            for (int j = 0; j < k && multiple; ++j) {
                const double bound = 1e-3 * std::abs(t[static_cast<std::size_t>(k)]) * std::pow(link, k - j);
                const double noise = 64.0 * 2.2e-16 * q.magnitude_at(c) * std::pow(std::max(1.0, std::abs(c)), -j);
                if (std::abs(t[static_cast<std::size_t>(j)]) > std::max(bound, noise)) multiple = false;
            }
            if (multiple) {
                out.push_back({c, k});
            } else {
                for (auto i : members) out.push_back({newton_polish(q, z[i], 10), 1});
            }
        }
    }

    for (const auto& r : out) {
        if (r.multiplicity > 1 && r.value == cplx{}) continue;
        const double res = std::abs(p(r.value));
        if (!(res <= opts.residual_tol * p.magnitude_at(r.value) * std::pow(10.0, 2 * (r.multiplicity - 1)))) {
            throw Error(Errc::RootFindingFailure, "qd-core",
                        "root residual above tolerance (|p(r)| = " + std::to_string(res) + ")");
        }
    }
    std::sort(out.begin(), out.end(), [](const Root& a, const Root& b) {
        if (a.value.real() != b.value.real()) return a.value.real() < b.value.real();
        return a.value.imag() < b.value.imag();
    });
    return out;
}

std::vector<cplx> expand_roots(std::span<const Root> roots) {
    std::vector<cplx> v;
    for (const auto& r : roots)
        for (int k = 0; k < r.multiplicity; ++k) v.push_back(r.value);
    return v;
}

}  // namespace qd
