#include "qdkit/heine_stieltjes.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qdkit/error.hpp"

namespace qd {

namespace {

bool lex_less(cplx a, cplx b) { return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag()); }

double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

double segment_distance(cplx p, cplx a, cplx b) {
    const cplx d = b - a;
    const double len2 = std::norm(d);
    if (len2 == 0.0) return std::abs(p - a);
    const double t = std::clamp(((p - a) * std::conj(d)).real() / len2, 0.0, 1.0);
    return std::abs(p - (a + t * d));
}

double diameter(const std::vector<cplx>& pts) {
    double d = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, std::abs(pts[i] - pts[j]));
    return d;
}

double coeff_distance(const Polynomial& a, const Polynomial& b) {
    double d = 0.0;
    const int deg = std::max(a.degree(), b.degree());
    for (int i = 0; i <= deg; ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

struct Electrostatic {
    const HSProblem& prob;
    Polynomial dP, dQ;

    explicit Electrostatic(const HSProblem& p) : prob(p), dP(p.P.derivative()), dQ(p.Q.derivative()) {}

    // Residual vector and the relative scale of each equation.
    bool eval(const std::vector<cplx>& z, Eigen::VectorXcd& F, double& scale) const {
        const auto n = z.size();
        F.resize(static_cast<Eigen::Index>(n));
        scale = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const cplx p = prob.P(z[k]);
            const cplx ratio = prob.Q(z[k]) / p;
            cplx s = ratio;
            double mag = 0.0, pw = 1.0;
            for (int i = 0; i <= prob.Q.degree(); ++i, pw *= std::abs(z[k]))
                mag += std::abs(prob.Q[static_cast<std::size_t>(i)]) * pw;
            mag /= std::abs(p);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == k) continue;
                const cplx t = 2.0 / (z[k] - z[j]);
                s += t;
                mag += std::abs(t);
            }
            if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return false;
            F[static_cast<Eigen::Index>(k)] = s;
            scale = std::max(scale, mag);
        }
        return true;
    }

    Eigen::MatrixXcd jacobian(const std::vector<cplx>& z) const {
        const auto n = static_cast<Eigen::Index>(z.size());
        Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(n, n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const cplx zk = z[static_cast<std::size_t>(k)];
            const cplx p = prob.P(zk);
            cplx diag = (dQ(zk) * p - prob.Q(zk) * dP(zk)) / (p * p);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == k) continue;
                const cplx d = zk - z[static_cast<std::size_t>(j)];
                const cplx t = 2.0 / (d * d);
                J(k, j) = t;
                diag -= t;
            }
            J(k, k) = diag;
        }
        return J;
    }
};

bool same_solution(const HSSolution& a, const HSSolution& b, double tol) {
    for (std::size_t k = 0; k < a.s_roots.size(); ++k)
        if (std::abs(a.s_roots[k] - b.s_roots[k]) > tol) return false;
    return true;
}

}  // namespace

void HSProblem::validate() const {
    if (P.degree() < 2) throw Error(Errc::InvalidInput, "heine-stieltjes", "deg P must be at least 2");
    if (Q.degree() > P.degree() - 1) throw Error(Errc::InvalidInput, "heine-stieltjes", "deg Q must be below deg P");
    if (n < 1) throw Error(Errc::InvalidInput, "heine-stieltjes", "Stieltjes degree must be positive");
}

HSSolution certify(const HSProblem& prob, std::vector<cplx> roots, const HSOptions& opts) {
    std::sort(roots.begin(), roots.end(), lex_less);
    const double scale = std::max(1.0, diameter(roots));
    for (std::size_t i = 0; i < roots.size(); ++i)
        for (std::size_t j = i + 1; j < roots.size(); ++j)
            if (std::abs(roots[i] - roots[j]) < opts.collision_tol * scale)
                throw Error(Errc::RootCollision, "heine-stieltjes", "two roots of S coincide");
    HSSolution sol;
    sol.s_roots = roots;
    const Polynomial S = Polynomial::from_roots(roots);
    const Polynomial dS = S.derivative();
    const Polynomial a = prob.P * dS.derivative();
    const Polynomial b = prob.Q * dS;
    auto [quot, rem] = Polynomial::divmod(a + b, S);
    sol.V = -quot;
    const Polynomial full = a + b + sol.V * S;
    const double denom = std::max({a.max_abs_coeff(), b.max_abs_coeff(), (sol.V * S).max_abs_coeff(), 1e-300});
    sol.residual = full.max_abs_coeff() / denom;

    Electrostatic es(prob);
    Eigen::VectorXcd F;
    double es_scale = 0.0;
    if (es.eval(roots, F, es_scale))
        sol.electrostatic_residual = F.cwiseAbs().maxCoeff() / std::max(es_scale, 1e-300);
    else
        sol.electrostatic_residual = std::numeric_limits<double>::infinity();
    return sol;
}

std::vector<HSSolution> solve_stieltjes(const HSProblem& prob, int starts, const HSOptions& opts) {
    prob.validate();
    if (starts < 1) throw Error(Errc::InvalidInput, "heine-stieltjes", "at least one start is required");
    const auto proots = find_roots(prob.P);
    for (const auto& r : proots)
        if (r.multiplicity > 1) throw Error(Errc::InvalidInput, "heine-stieltjes", "P must have simple roots");
    std::vector<cplx> anchors;
    for (const auto& r : proots) anchors.push_back(r.value);
    const double diam = std::max(1.0, diameter(anchors));
    cplx centre{};
    for (cplx a : anchors) centre += a;
    centre /= static_cast<double>(anchors.size());
    const double max_step = 0.5 * diam, bound = 4.0 * diam;

    std::mt19937_64 rng(opts.seed);
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> unit(0.02, 0.98);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < anchors.size(); ++i)
        for (std::size_t j = i + 1; j < anchors.size(); ++j) pairs.emplace_back(i, j);
    Electrostatic es(prob);
    std::vector<HSSolution> found;
    const auto n = static_cast<std::size_t>(prob.n);
    for (int s = 0; s < starts; ++s) {
        std::vector<cplx> z(n);
        if (s % 4 == 3) {
            // Dirichlet(1) point of the convex hull of the roots of P for every root.
            for (auto& zk : z) {
                std::vector<double> w(anchors.size());
                double tot = 0.0;
                for (auto& x : w) tot += (x = expo(rng));
                zk = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) zk += w[i] / tot * anchors[i];
            }
        } else {
            // Segments between roots of P drawn with per-start Dirichlet weights, so the number of
            // roots per segment varies widely between starts.
            std::vector<double> w(pairs.size());
            for (auto& x : w) x = expo(rng);
            std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
            for (auto& zk : z) {
                const auto [i, j] = pairs[pick(rng)];
                zk = anchors[i] + unit(rng) * (anchors[j] - anchors[i]);
            }
        }
        Eigen::VectorXcd F;
        double scale = 0.0;
        if (!es.eval(z, F, scale)) continue;
        double norm = F.cwiseAbs().maxCoeff();
        bool converged = norm <= opts.tolerance * scale;
        int it = 0;
        for (; it < opts.max_iterations && !converged; ++it) {
            Eigen::VectorXcd step = es.jacobian(z).partialPivLu().solve(-F);
            if (!step.allFinite()) break;
            // No root moves past half its distance to the nearest other root or pole.
            double cap = 1.0;
            for (std::size_t k = 0; k < n; ++k) {
                double d = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < n; ++j)
                    if (j != k) d = std::min(d, std::abs(z[k] - z[j]));
                for (cplx a : anchors) d = std::min(d, std::abs(z[k] - a));
                const double len = std::abs(step[static_cast<Eigen::Index>(k)]);
                if (len > 0.5 * d) cap = std::min(cap, 0.5 * d / len);
            }
            step *= cap;
            const double len = step.cwiseAbs().maxCoeff();
            if (len > max_step) step *= max_step / len;
            double lambda = 1.0;
            bool accepted = false;
            for (int h = 0; h < 30; ++h, lambda *= 0.5) {
                std::vector<cplx> trial = z;
                bool inside = true;
                for (std::size_t k = 0; k < n; ++k) {
                    trial[k] += lambda * step[static_cast<Eigen::Index>(k)];
                    inside = inside && std::abs(trial[k] - centre) <= bound;
                }
                if (!inside) continue;
                Eigen::VectorXcd Ft;
                double st = 0.0;
                if (!es.eval(trial, Ft, st)) continue;
                const double nt = Ft.cwiseAbs().maxCoeff();
                if (nt < norm) {
                    z = std::move(trial);
                    F = Ft;
                    scale = st;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                converged = norm <= 1e3 * opts.tolerance * scale;
                break;
            }
            converged = norm <= opts.tolerance * scale;
        }
        if (!converged) continue;
        HSSolution sol;
        try {
            sol = certify(prob, z, opts);
        } catch (const Error&) {
            continue;
        }
        if (sol.residual > opts.residual_tol) continue;
        sol.iterations = it;
        const bool dup = std::any_of(found.begin(), found.end(), [&](const HSSolution& f) {
            return same_solution(f, sol, opts.dedup_tol * diam);
        });
        if (!dup) found.push_back(std::move(sol));
    }
    if (found.empty()) throw Error(Errc::NoConvergence, "heine-stieltjes", "no start converged to a certified solution");
    std::sort(found.begin(), found.end(), [](const HSSolution& a, const HSSolution& b) {
        return std::lexicographical_compare(a.s_roots.begin(), a.s_roots.end(), b.s_roots.begin(), b.s_roots.end(),
                                            lex_less);
    });
    return found;
}

std::uint64_t heine_count(int n, int m) {
    // binom(n + m - 2, m - 2)
    const int k = m - 2;
    std::uint64_t c = 1;
    for (int i = 1; i <= k; ++i) c = c * static_cast<std::uint64_t>(n + i) / static_cast<std::uint64_t>(i);
    return c;
}

HSEnumeration enumerate_solutions(const HSProblem& prob, int start_budget, const HSOptions& opts) {
    prob.validate();
    HSEnumeration e;
    e.starts = start_budget;
    e.expected = heine_count(prob.n, prob.m());
    try {
        e.solutions = solve_stieltjes(prob, start_budget, opts);
    } catch (const Error& err) {
        if (err.code() != Errc::NoConvergence) throw;
    }
    e.count = static_cast<int>(e.solutions.size());
    e.complete = static_cast<std::uint64_t>(e.count) >= e.expected;
    e.note = "expected count binom(n+l-2, l-2) with l = deg P";
    if (!e.complete) e.note += "; start budget exhausted with a partial count";
    return e;
}

std::vector<cplx> convex_hull(std::vector<cplx> pts) {
    std::sort(pts.begin(), pts.end(), lex_less);
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<cplx> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

double distance_to_hull(cplx z, const std::vector<cplx>& hull) {
    if (hull.empty()) return std::numeric_limits<double>::infinity();
    if (hull.size() == 1) return std::abs(z - hull[0]);
    if (hull.size() == 2) return segment_distance(z, hull[0], hull[1]);
    bool inside = true;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const cplx a = hull[i], b = hull[(i + 1) % hull.size()];
        if (cross(b - a, z - a) < 0) inside = false;
        d = std::min(d, segment_distance(z, a, b));
    }
    return inside ? 0.0 : d;
}

bool localization_check(const HSSolution& sol, const HSProblem& prob, double eps) {
    std::vector<cplx> anchors = expand_roots(find_roots(prob.P));
    const auto hull = convex_hull(anchors);
    const double slack = eps + 1e-9 * std::max(1.0, diameter(anchors));
    std::vector<cplx> pts = sol.s_roots;
    if (sol.V.degree() >= 1) {
        const auto vr = expand_roots(find_roots(sol.V));
        pts.insert(pts.end(), vr.begin(), vr.end());
    }
    return std::all_of(pts.begin(), pts.end(), [&](cplx z) { return distance_to_hull(z, hull) <= slack; });
}

std::vector<HSSolution> build_chain(const HSProblem& prob, int n0, int n1, int starts_per_degree,
                                    const HSOptions& opts) {
    if (n0 < 1 || n1 < n0) throw Error(Errc::InvalidInput, "heine-stieltjes", "invalid degree range");
    std::vector<HSSolution> chain;
    for (int n = n0; n <= n1; ++n) {
        HSProblem p = prob;
        p.n = n;
        HSOptions o = opts;
        o.seed = opts.seed + static_cast<std::uint64_t>(n);
        auto sols = solve_stieltjes(p, starts_per_degree, o);
        std::size_t pick = 0;
        if (!chain.empty()) {
            const Polynomial prev = chain.back().V.monic();
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < sols.size(); ++i) {
                const double d = coeff_distance(sols[i].V.monic(), prev);
                if (d < best) {
                    best = d;
                    pick = i;
                }
            }
        }
        chain.push_back(sols[pick]);
    }
    return chain;
}

AsymptoticReport asymptotic_compare(const std::vector<HSSolution>& chain, const HSProblem& prob,
                                    const std::vector<std::vector<cplx>>& support, std::vector<cplx> sample_points,
                                    double stable_tol) {
    if (chain.empty()) throw Error(Errc::InvalidInput, "heine-stieltjes", "empty chain");
    const Polynomial limit = chain.back().V.monic();
    if (chain.size() >= 2 && coeff_distance(chain[chain.size() - 2].V.monic(), limit) > stable_tol)
        throw Error(Errc::NonConvergingChain, "heine-stieltjes", "monic Van Vleck polynomials have not stabilized");
    const Polynomial P = prob.P.monic();
    AsymptoticReport rep;
    if (sample_points.empty()) {
        const auto anchors = expand_roots(find_roots(prob.P));
        cplx c{};
        for (auto a : anchors) c += a;
        c /= static_cast<double>(anchors.size());
        double r = 0.0;
        for (auto a : anchors) r = std::max(r, std::abs(a - c));
        for (int k = 0; k < 8; ++k) sample_points.push_back(c + (2.0 * r + 1.0) * std::polar(1.0, 0.785398 * k + 0.3));
    }
    rep.sample_points = sample_points;
    for (const auto& sol : chain) {
        ChainStep st;
        st.n = static_cast<int>(sol.s_roots.size());
        st.solution = sol;
        st.monic_V = sol.V.monic();
        for (cplx z : sample_points) {
            cplx C{};
            for (cplx r : sol.s_roots) C += 1.0 / (z - r);
            C /= static_cast<double>(st.n);
            st.transform_residual = std::max(st.transform_residual, std::abs(C * C - limit(z) / P(z)));
        }
        if (!support.empty()) {
            st.support_distance = 0.0;
            for (cplx r : sol.s_roots) {
                double d = std::numeric_limits<double>::infinity();
                for (const auto& poly : support) {
                    if (poly.size() == 1) d = std::min(d, std::abs(r - poly[0]));
                    for (std::size_t i = 0; i + 1 < poly.size(); ++i)
                        d = std::min(d, segment_distance(r, poly[i], poly[i + 1]));
                }
                st.support_distance = std::max(st.support_distance, d);
            }
        }
        rep.steps.push_back(std::move(st));
    }
    rep.decreasing = true;
    for (std::size_t i = 1; i < rep.steps.size(); ++i)
        if (rep.steps[i].transform_residual > rep.steps[i - 1].transform_residual * (1.0 + 1e-9) + 1e-15)
            rep.decreasing = false;
    return rep;
}

}  // namespace qd
