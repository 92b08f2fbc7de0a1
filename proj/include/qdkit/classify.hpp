#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qdkit/topology.hpp"

namespace qd {

/// forward[e] = 1 orients Reeb edge e from tail to head (for a leaf: from the component to the leaf).
struct Orientation {
    std::vector<std::uint8_t> forward;
    bool operator==(const Orientation&) const = default;
    bool toward(const ReebEdge& e, int vertex_side_boundary) const;
};

struct Potential {
    std::vector<double> values;  ///< per Reeb vertex, minimum 0
    Orientation orientation;
};

struct NonChaoticEvidence {
    bool non_chaotic = true;
    std::vector<std::size_t> flagged;  ///< indices of recurrent-suspect or unresolved segments
    std::string note;
};

NonChaoticEvidence is_nonchaotic(const std::vector<TrajectorySegment>& segments, const TraceBudget& budget = {});

struct StrebelCheck {
    bool strebel = false;
    bool necessary_conditions = true;  ///< no pole of order > 2, double-pole residues squared real negative
    std::vector<std::string> notes;
};

StrebelCheck is_strebel(const ReebGraph& reeb);
StrebelCheck is_strebel(const ReebGraph& reeb, const RationalQD& qd, const CriticalInventory& inv);

struct GradientOptions {
    double rel_tol = 1e-9;
    std::size_t brute_force_limit = 20;  ///< finite edges handled by plain enumeration
    std::size_t max_edges = 30;
    std::size_t max_listed = std::size_t(1) << 20;
};

/// All orientations whose length cocycle is exact. Leaves are enumerated in both directions.
std::vector<Orientation> gradient_orientations(const ReebGraph& reeb, const GradientOptions& opts = {});

Potential integrate_potential(const ReebGraph& reeb, const Orientation& o, double rel_tol = 1e-9);

struct PotentialCount {
    std::uint64_t with_leaves = 0;  ///< every Reeb edge carries an orientation bit
    std::uint64_t finite_only = 0;  ///< leaves not counted
    bool power_of_two = true;
    bool flip_closed = true;        ///< witness set closed under a ^ b ^ c
};

/// Counts orientations and reports whether they form a power of two and a coset of a flip subgroup.
PotentialCount count_potentials(const ReebGraph& reeb, const GradientOptions& opts = {});

struct Clause {
    int a = 0;  ///< literal: 2*var + (negated ? 1 : 0)
    int b = 0;
    int critical_edge = -1;
};

struct TwoSatResult {
    bool satisfiable = false;
    Orientation orientation;            ///< valid when satisfiable
    int conflict_variable = -1;         ///< variable whose literals share a strongly connected component
    std::vector<int> conflict_component;  ///< literals of that component
};

/// Clauses "some Reeb edge on a side of this critical edge points toward its component".
std::vector<Clause> positivity_clauses(const ReebGraph& reeb, const BoundarySystem& bs);

TwoSatResult solve_2sat(int variables, const std::vector<Clause>& clauses);
TwoSatResult positivity_2sat(const ReebGraph& reeb, const BoundarySystem& bs);

bool satisfies(const Orientation& o, const std::vector<Clause>& clauses);

struct PositiveGradient {
    bool gradient = false;
    bool positive = false;
    std::optional<Orientation> witness;
    TwoSatResult clause_system;  ///< 2-SAT over the clauses alone
};

/// Gradient orientations intersected with the positivity clauses.
PositiveGradient positive_gradient(const ReebGraph& reeb, const BoundarySystem& bs, const GradientOptions& opts = {});

/// Sum of incoming widths minus outgoing widths at a Reeb vertex.
Extended component_mass(const ReebGraph& reeb, const Orientation& o, int vertex);

struct SimpleCycleResult {
    bool admits_positive = true;
    std::vector<int> support;             ///< critical edges in no simple cycle
    std::vector<std::vector<int>> cycles;  ///< edge sets
    std::optional<std::pair<int, int>> inside_attachment;  ///< (cycle index, edge attached inside)
    bool truncated = false;
};

SimpleCycleResult simple_cycle_criterion(const CriticalGraph& cg, const BoundarySystem& bs,
                                         std::size_t cycle_cap = 100000);

bool point_in_polygon(cplx p, const std::vector<cplx>& polygon);

struct Verdict {
    NonChaoticEvidence non_chaotic;
    std::optional<StrebelCheck> strebel;
    bool gradient = false;
    bool positive = false;
    std::optional<PotentialCount> potentials;
    std::optional<Orientation> positive_witness;
    std::optional<TwoSatResult> clause_system;
    std::vector<std::string> notes;
};

}  // namespace qd
