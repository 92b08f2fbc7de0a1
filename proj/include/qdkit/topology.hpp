#pragma once

#include <array>
#include <optional>
#include <vector>

#include "qdkit/extended.hpp"
#include "qdkit/tracer.hpp"

namespace qd {

struct GraphVertex {
    int id = -1;
    std::size_t inventory_index = npos;  ///< npos for abstract instances
    cplx location{};
    CriticalKind kind = CriticalKind::Zero;
    int order = 1;
    int degree = 0;                  ///< number of edge-ends (slots), counterclockwise
    std::vector<double> slot_angles;  ///< optional, ascending
};

/// One end of a critical edge at a vertex: (vertex, counterclockwise slot index).
struct EdgeEnd {
    int vertex = -1;
    int slot = -1;
    bool open() const { return vertex < 0; }
};

struct GraphEdge {
    int id = -1;
    EdgeEnd tail;
    EdgeEnd head;                  ///< open() for an edge running into a pole of order >= 2
    std::size_t pole = npos;        ///< inventory index of that pole
    Extended psi_length;
    std::vector<cplx> polyline;     ///< tail to head; may be empty for abstract input
    std::vector<double> times;      ///< canonical arclength of each polyline point from the tail
    bool is_open() const { return head.open(); }
};

struct CriticalGraph {
    std::vector<GraphVertex> vertices;
    std::vector<GraphEdge> edges;
    std::vector<int> component_of_vertex;
    int component_count = 0;

    /// Edge id and end (0 tail, 1 head) attached to slot `slot` of vertex `v`.
    std::pair<int, int> slot_edge(int v, int slot) const;
    std::vector<int> component_vertices(int c) const;
    std::vector<int> component_edges(int c) const;
    int component_of_edge(int e) const { return component_of_vertex.at(edges.at(e).tail.vertex); }

    /// Fills component_of_vertex/component_count and checks slot consistency.
    void finalize();
};

/// Traversal of a critical edge. `reversed` walks head to tail.
struct Dart {
    int edge = -1;
    bool reversed = false;
    bool operator==(const Dart&) const = default;
};

struct BoundaryOrbit {
    int id = -1;                ///< global boundary id
    int component = -1;
    std::vector<Dart> darts;    ///< face lies to the right of every dart
    bool closed = true;         ///< false: walk from a pole back to a pole
    Extended length;            ///< total psi-length of the darts
};

struct FatGraph {
    int component = -1;
    std::vector<EdgeEnd> flags;     ///< closed flags: (vertex, slot)
    std::vector<int> flag_edge;
    std::vector<int> sigma0;        ///< counterclockwise successor at the vertex
    std::vector<int> sigma1;        ///< other end of the edge, -1 for an open edge
    std::vector<BoundaryOrbit> orbits;
};

/// Global boundary bookkeeping over all fat graphs.
struct BoundarySystem {
    std::vector<FatGraph> fat_graphs;
    std::vector<BoundaryOrbit> boundaries;      ///< indexed by global id
    /// boundary id of the right side of each edge, traversed tail to head and head to tail
    std::vector<std::array<int, 2>> edge_sides;
    int boundary_of(Dart d) const { return edge_sides.at(d.edge)[d.reversed ? 1 : 0]; }
};

enum class DomainKind { Ring, Circle, Strip, End };
std::string_view domain_name(DomainKind k);
std::optional<DomainKind> parse_domain(std::string_view s);

struct ProbeRecord {
    TrajectorySegment vertical;
    std::optional<TrajectorySegment> horizontal;
    int from_boundary = -1;
    int to_boundary = -1;          ///< -1 when the probe fell into a pole
};

struct ReebEdge {
    int id = -1;
    DomainKind kind = DomainKind::Ring;
    int tail = -1;                  ///< Reeb vertex (component)
    int head = -1;                  ///< -1 for a leaf (pole)
    int tail_boundary = -1;
    int head_boundary = -1;         ///< -1 for a leaf
    std::size_t pole = npos;        ///< pole at the leaf, when known
    Extended length;
    Extended width;
    std::vector<cplx> core_curve;   ///< closed horizontal probe (ring/circle), may be empty
    bool is_leaf() const { return head < 0; }
};

struct ReebGraph {
    int vertex_count = 0;
    std::vector<ReebEdge> edges;
    std::vector<int> edge_of_boundary;   ///< boundary id -> Reeb edge
    std::vector<ProbeRecord> probes;

    std::vector<int> incident_edges(int v) const;
    double max_finite_length() const;
};

/// Critical graph from launched critical trajectories.
CriticalGraph build_critical_graph(const std::vector<TrajectorySegment>& segments, const TraceField& field,
                                   const TraceBudget& budget = {});

/// Fat graph of one component.
FatGraph fat_graph(const CriticalGraph& cg, int component);
BoundarySystem boundary_system(const CriticalGraph& cg);

/// Domains by vertical and horizontal probes from every boundary orbit.
ReebGraph build_reeb(const TraceField& field, const CriticalGraph& cg, const BoundarySystem& bs,
                     const TraceBudget& budget = {});

/// Relative mismatch between ring/circle widths and the lengths of their boundary orbits.
double width_mismatch(const ReebGraph& reeb, const BoundarySystem& bs);

/// V - E + B per component, the Euler characteristic of the thickened component (2 - 2g).
std::vector<int> euler_characteristics(const CriticalGraph& cg, const BoundarySystem& bs);

}  // namespace qd
