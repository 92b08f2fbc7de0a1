#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "qdkit/classify.hpp"

namespace qd {

struct Atom {
    cplx point;
    double weight = 0.0;
};

struct EdgeTerm {
    int edge = -1;
    int coefficient = 0;  ///< -2, 0 or +2 per unit psi-length
    double psi_length = 0.0;
    std::vector<Atom> atoms;
};

struct PoleMass {
    std::size_t pole = npos;  ///< inventory index
    Location location;
    double mass = 0.0;
};

struct SignedMeasure {
    std::vector<EdgeTerm> edge_terms;
    std::vector<PoleMass> pole_masses;
    std::vector<Atom> extra_atoms;  ///< free atoms (model measures)
    double total_mass = 0.0;
    double atom_spacing = 0.0;  ///< largest distance between neighbouring atoms on an edge

    /// Atoms in the finite plane: edge atoms, finite pole masses, free atoms.
    std::vector<Atom> finite_atoms() const;
    double finite_mass() const;
    double variation() const;  ///< sum of |weights| and |pole masses|
    bool edges_nonnegative() const;
    bool empty() const;
    SignedMeasure scaled(double factor) const;
};

struct MeasureOptions {
    std::size_t total_atoms = 10000;
};

/// Levy measure of the potential selected by a gradient orientation.
SignedMeasure build_levy_measure(const TraceField& field, const CriticalGraph& cg, const BoundarySystem& bs,
                                 const ReebGraph& reeb, const Orientation& o, const MeasureOptions& opts = {});

/// Closed-contour flux of grad F by central differences along the outward normals.
/// `support` polylines must stay farther than `step` from the contour.
double green_mass_oracle(const std::function<double(cplx)>& F, const std::vector<cplx>& contour, double step,
                         const std::vector<std::vector<cplx>>& support = {});

/// Level function F near the core curve of a ring or circle edge, increasing in the direction
/// fixed by the orientation (arrows point toward decreasing F).
std::function<double(cplx)> core_level_function(const RationalQD& qd, const ReebEdge& e, const Orientation& o,
                                                const CriticalGraph& cg);

/// Green's-formula mass of every Reeb vertex from the core curves of its incident edges.
std::vector<double> green_component_masses(const RationalQD& qd, const CriticalGraph& cg, const ReebGraph& reeb,
                                           const Orientation& o);

struct TransformSample {
    cplx point;
    cplx cauchy;
    double log_potential = 0.0;
    double identity_residual = 0.0;  ///< |C - (u_x - i u_y)| relative to sum |weight| / distance to the support
};

std::vector<TransformSample> evaluate_transforms(const SignedMeasure& m, const std::vector<cplx>& points,
                                                 bool check_identity = true);

struct BranchResidual {
    double max = 0.0;
    double mean = 0.0;
    bool pass = false;
    double normalization = 1.0;  ///< finite mass divided out
};

/// |C^2 - U1/U2| for Psi = -U1/U2 dz^2, after normalizing to unit finite mass. U1/U2 is divided by the
/// modulus of its leading ratio, so a non-positive leading ratio fails the check.
BranchResidual verify_branch_equation(const SignedMeasure& m, const RationalQD& qd, const std::vector<cplx>& points,
                                      double tol = 1e-4);

struct RealMeasure {
    Orientation orientation;
    SignedMeasure measure;  ///< unit finite mass
    bool positive = false;
    BranchResidual residual;
};

struct RealMeasureSet {
    int domains = 0;  ///< d, components of the complement of the critical graph
    std::vector<RealMeasure> measures;
    int positive_count() const;
};

/// The 2^(d-1) real measures of a Strebel differential -U1/U2 dz^2 with deg U2 - deg U1 = 2.
RealMeasureSet enumerate_real_measures(const TraceField& field, const CriticalGraph& cg, const BoundarySystem& bs,
                                       const ReebGraph& reeb, const MeasureOptions& opts = {});

/// Psi recovered as -(C/2pi)^2 matches f within 1e-6 relative at sample points off the support.
bool reconstruct_check(const SignedMeasure& m, const RationalQD& qd, std::vector<cplx> points = {},
                       double rel_tol = 1e-6);

void write_atoms_csv(std::ostream& os, const SignedMeasure& m);

}  // namespace qd
