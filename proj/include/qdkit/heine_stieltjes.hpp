#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdkit/polynomial.hpp"

namespace qd {

/// P S'' + Q S' + V S = 0 with deg P = m >= 2, deg Q <= m - 1, deg S = n.
struct HSProblem {
    Polynomial P;
    Polynomial Q;
    int n = 1;

    int m() const { return P.degree(); }
    void validate() const;
};

struct HSSolution {
    std::vector<cplx> s_roots;  ///< sorted by (re, im)
    Polynomial V;
    double residual = 0.0;               ///< ODE coefficient residual, relative
    double electrostatic_residual = 0.0;  ///< max |sum 2/(z_k - z_j) + Q/P (z_k)|, relative
    int iterations = 0;

    Polynomial stieltjes() const { return Polynomial::from_roots(s_roots); }
};

struct HSOptions {
    int max_iterations = 200;
    double tolerance = 1e-12;
    double residual_tol = 1e-10;
    double dedup_tol = 1e-6;
    double collision_tol = 1e-8;
    std::uint64_t seed = 1;
};

/// Multi-start damped Newton on the electrostatic system. Throws NoConvergence when every start fails.
std::vector<HSSolution> solve_stieltjes(const HSProblem& prob, int starts, const HSOptions& opts = {});

/// Certifies a candidate root set; throws RootCollision for coincident roots.
HSSolution certify(const HSProblem& prob, std::vector<cplx> roots, const HSOptions& opts = {});

std::uint64_t heine_count(int n, int m);

struct HSEnumeration {
    int count = 0;
    std::uint64_t expected = 0;  ///< Heine count with l = m
    bool complete = false;       ///< count reached the expectation
    int starts = 0;
    std::vector<HSSolution> solutions;
    std::string note;
};

HSEnumeration enumerate_solutions(const HSProblem& prob, int start_budget, const HSOptions& opts = {});

/// Roots of S and V within eps of the convex hull of the roots of P.
bool localization_check(const HSSolution& sol, const HSProblem& prob, double eps);

/// Convex hull of points, counterclockwise, collinear points dropped.
std::vector<cplx> convex_hull(std::vector<cplx> points);
double distance_to_hull(cplx z, const std::vector<cplx>& hull);

struct ChainStep {
    int n = 0;
    HSSolution solution;
    Polynomial monic_V;
    double transform_residual = 0.0;  ///< max |C_mu_n^2 - V~/P| over the sample points
    double support_distance = -1.0;   ///< max distance from a root of S to the support, -1 without support
};

struct AsymptoticReport {
    std::vector<ChainStep> steps;
    std::vector<cplx> sample_points;
    bool decreasing = false;  ///< transform residual non-increasing along the chain
};

/// Solutions for n0..n1 following the monic Van Vleck polynomial closest to the previous one.
std::vector<HSSolution> build_chain(const HSProblem& prob, int n0, int n1, int starts_per_degree,
                                    const HSOptions& opts = {});

/// Root-counting measures of a chain against C^2 = V~/P; throws NonConvergingChain when the
/// last two monic Van Vleck polynomials differ by more than `stable_tol`.
AsymptoticReport asymptotic_compare(const std::vector<HSSolution>& chain, const HSProblem& prob,
                                    const std::vector<std::vector<cplx>>& support = {},
                                    std::vector<cplx> sample_points = {}, double stable_tol = 1e-3);

}  // namespace qd
