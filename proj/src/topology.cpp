#include "qdkit/topology.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <cstdio>
#include <cstdlib>

#include "qdkit/error.hpp"

namespace qd {

std::string_view domain_name(DomainKind k) {
    switch (k) {
        case DomainKind::Ring: return "ring";
        case DomainKind::Circle: return "circle";
        case DomainKind::Strip: return "strip";
        case DomainKind::End: return "end";
    }
    return "ring";
}

std::optional<DomainKind> parse_domain(std::string_view s) {
    if (s == "ring") return DomainKind::Ring;
    if (s == "circle") return DomainKind::Circle;
    if (s == "strip") return DomainKind::Strip;
    if (s == "end") return DomainKind::End;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// CriticalGraph

std::pair<int, int> CriticalGraph::slot_edge(int v, int slot) const {
    for (const auto& e : edges) {
        if (e.tail.vertex == v && e.tail.slot == slot) return {e.id, 0};
        if (e.head.vertex == v && e.head.slot == slot) return {e.id, 1};
    }
    throw Error(Errc::InvalidInput, "topology",
                "vertex " + std::to_string(v) + " slot " + std::to_string(slot) + " has no edge");
}

std::vector<int> CriticalGraph::component_vertices(int c) const {
    std::vector<int> out;
    for (std::size_t v = 0; v < vertices.size(); ++v)
        if (component_of_vertex[v] == c) out.push_back(static_cast<int>(v));
    return out;
}

std::vector<int> CriticalGraph::component_edges(int c) const {
    std::vector<int> out;
    for (const auto& e : edges)
        if (component_of_edge(e.id) == c) out.push_back(e.id);
    return out;
}

void CriticalGraph::finalize() {
    const int n = static_cast<int>(vertices.size());
    std::vector<std::vector<int>> used(vertices.size());
    for (int v = 0; v < n; ++v) {
        if (vertices[v].id != v) throw Error(Errc::InvalidInput, "topology", "vertex ids must be 0..n-1 in order");
        used[v].assign(static_cast<std::size_t>(vertices[v].degree), 0);
    }
    auto claim = [&](const EdgeEnd& end, int e) {
        if (end.vertex < 0 || end.vertex >= n || end.slot < 0 || end.slot >= vertices[end.vertex].degree)
            throw Error(Errc::InvalidInput, "topology", "edge " + std::to_string(e) + " has an invalid end");
        if (used[end.vertex][end.slot]++)
            throw Error(Errc::InvalidInput, "topology", "slot claimed twice by edge " + std::to_string(e));
    };
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (edges[i].id != static_cast<int>(i))
            throw Error(Errc::InvalidInput, "topology", "edge ids must be 0..m-1 in order");
        claim(edges[i].tail, edges[i].id);
        if (!edges[i].head.open()) claim(edges[i].head, edges[i].id);
    }
    for (int v = 0; v < n; ++v)
        for (int k = 0; k < vertices[v].degree; ++k)
            if (!used[v][k])
                throw Error(Errc::InvalidInput, "topology",
                            "slot " + std::to_string(k) + " of vertex " + std::to_string(v) + " is unused");

    std::vector<int> parent(vertices.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& e : edges)
        if (!e.head.open()) parent[find(e.tail.vertex)] = find(e.head.vertex);
    component_of_vertex.assign(vertices.size(), -1);
    std::map<int, int> label;
    for (int v = 0; v < n; ++v) {
        const int r = find(v);
        auto it = label.find(r);
        if (it == label.end()) it = label.emplace(r, static_cast<int>(label.size())).first;
        component_of_vertex[v] = it->second;
    }
    component_count = static_cast<int>(label.size());
}

// ---------------------------------------------------------------------------

namespace {

double point_segment_distance(cplx p, cplx a, cplx b) {
    const cplx d = b - a;
    const double n = std::norm(d);
    if (n == 0.0) return std::abs(p - a);
    const double t = std::clamp(((p - a) * std::conj(d)).real() / n, 0.0, 1.0);
    return std::abs(p - (a + t * d));
}

double distance_to_polyline(cplx p, const std::vector<cplx>& pl) {
    if (pl.size() == 1) return std::abs(p - pl[0]);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < pl.size(); ++k) best = std::min(best, point_segment_distance(p, pl[k], pl[k + 1]));
    return best;
}

double hausdorff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    auto one_way = [](const std::vector<cplx>& x, const std::vector<cplx>& y) {
        double worst = 0.0;
        const std::size_t stride = std::max<std::size_t>(1, x.size() / 64);
        for (std::size_t k = 0; k < x.size(); k += stride) worst = std::max(worst, distance_to_polyline(x[k], y));
        return std::max(worst, distance_to_polyline(x.back(), y));
    };
    return std::max(one_way(a, b), one_way(b, a));
}

}  // namespace

CriticalGraph build_critical_graph(const std::vector<TrajectorySegment>& segments, const TraceField& field,
                                   const TraceBudget& budget) {
    (void)budget;
    const auto& inv = field.inventory();
    CriticalGraph cg;
    std::map<std::size_t, int> vertex_of;
    for (auto idx : inv.finite_critical) {
        const auto& pt = inv.points[idx];
        if (pt.location.at_infinity)
            throw Error(Errc::Unsupported, "topology", "finite critical point at infinity is not supported");
        GraphVertex v;
        v.id = static_cast<int>(cg.vertices.size());
        v.inventory_index = idx;
        v.location = pt.location.z;
        v.kind = pt.kind;
        v.order = pt.order;
        v.slot_angles = field.directions(idx);
        v.degree = static_cast<int>(v.slot_angles.size());
        vertex_of[idx] = v.id;
        cg.vertices.push_back(std::move(v));
    }

    std::map<std::pair<int, int>, std::size_t> segment_of;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (s.start.kind != AnchorKind::FiniteCritical)
            throw Error(Errc::InvalidInput, "topology", "segment is not launched from a critical point");
        segment_of[{vertex_of.at(s.start.point), s.start.direction}] = i;
    }

    const double gluing_tol = 1e-4 * field.feature_scale();
    std::map<std::pair<int, int>, int> edge_at;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        const std::pair<int, int> from{vertex_of.at(s.start.point), s.start.direction};
        if (edge_at.count(from)) continue;
        GraphEdge e;
        e.id = static_cast<int>(cg.edges.size());
        e.tail = {from.first, from.second};
        e.polyline = s.samples;
        e.times = s.times;
        if (s.end.kind == AnchorKind::FiniteCritical) {
            const std::pair<int, int> to{vertex_of.at(s.end.point), s.end.direction};
            if (to == from)
                throw Error(Errc::GluingAmbiguity, "topology", "critical trajectory returned along its own direction");
            if (edge_at.count(to))
                throw Error(Errc::GluingAmbiguity, "topology", "two critical trajectories arrive along one direction");
            const auto& back = segments.at(segment_of.at(to));
            const bool matches = back.end.kind == AnchorKind::FiniteCritical &&
                                 vertex_of.at(back.end.point) == from.first && back.end.direction == from.second;
            if (!matches)
                throw Error(Errc::GluingAmbiguity, "topology",
                            "critical trajectory from vertex " + std::to_string(to.first) +
                                " does not retrace the one arriving there");
            const double rel = std::abs(back.psi_length - s.psi_length) / std::max(1.0, s.psi_length);
            if (rel > 1e-6 || hausdorff(s.samples, back.samples) > gluing_tol)
                throw Error(Errc::GluingAmbiguity, "topology",
                            "traces of one critical edge disagree (relative length mismatch " + std::to_string(rel) +
                                ")");
            e.head = {to.first, to.second};
            e.psi_length = 0.5 * (s.psi_length + back.psi_length);
            edge_at[to] = e.id;
        } else if (s.end.kind == AnchorKind::InfiniteCritical) {
            e.pole = s.end.point;
            e.psi_length = Extended::infinity();
        } else {
            throw Error(Errc::ChaoticInput, "topology",
                        std::string("critical trajectory ended with anchor ") + std::string(anchor_name(s.end.kind)));
        }
        edge_at[from] = e.id;
        cg.edges.push_back(std::move(e));
    }
    cg.finalize();
    return cg;
}

// ---------------------------------------------------------------------------
// Fat graphs

FatGraph fat_graph(const CriticalGraph& cg, int component) {
    FatGraph fg;
    fg.component = component;
    std::map<std::pair<int, int>, int> flag_id;
    for (int v : cg.component_vertices(component))
        for (int k = 0; k < cg.vertices[v].degree; ++k) {
            flag_id[{v, k}] = static_cast<int>(fg.flags.size());
            fg.flags.push_back({v, k});
        }
    fg.flag_edge.assign(fg.flags.size(), -1);
    fg.sigma1.assign(fg.flags.size(), -1);
    fg.sigma0.assign(fg.flags.size(), -1);
    for (std::size_t f = 0; f < fg.flags.size(); ++f) {
        const auto [v, k] = fg.flags[f];
        fg.sigma0[f] = flag_id.at({v, (k + 1) % cg.vertices[v].degree});
    }
    for (int eid : cg.component_edges(component)) {
        const auto& e = cg.edges[eid];
        const int a = flag_id.at({e.tail.vertex, e.tail.slot});
        fg.flag_edge[a] = eid;
        if (!e.is_open()) {
            const int b = flag_id.at({e.head.vertex, e.head.slot});
            fg.flag_edge[b] = eid;
            fg.sigma1[a] = b;
            fg.sigma1[b] = a;
        }
    }

    // Darts: leaving a flag along its edge. A dart from the head flag is reversed.
    auto out_dart = [&](int f) {
        const int eid = fg.flag_edge[f];
        const auto& e = cg.edges[eid];
        const bool from_tail = e.tail.vertex == fg.flags[f].vertex && e.tail.slot == fg.flags[f].slot;
        return Dart{eid, !from_tail};
    };
    auto arrival_flag = [&](Dart d) -> int {
        const auto& e = cg.edges[d.edge];
        const EdgeEnd end = d.reversed ? e.tail : e.head;
        if (end.open()) return -1;
        return flag_id.at({end.vertex, end.slot});
    };

    std::vector<char> seen(fg.flags.size(), 0);
    auto walk = [&](BoundaryOrbit& orb, Dart d) {
        for (;;) {
            orb.darts.push_back(d);
            const int g = arrival_flag(d);
            if (g < 0) {
                orb.closed = false;
                return;
            }
            const int nf = fg.sigma0[g];
            if (seen[nf]) return;
            seen[nf] = 1;
            d = out_dart(nf);
        }
    };
    for (int eid : cg.component_edges(component)) {
        const auto& e = cg.edges[eid];
        if (!e.is_open()) continue;
        BoundaryOrbit orb;
        orb.component = component;
        walk(orb, Dart{eid, true});
        fg.orbits.push_back(std::move(orb));
    }
    for (std::size_t f = 0; f < fg.flags.size(); ++f) {
        if (seen[f]) continue;
        seen[f] = 1;
        BoundaryOrbit orb;
        orb.component = component;
        walk(orb, out_dart(static_cast<int>(f)));
        fg.orbits.push_back(std::move(orb));
    }
    for (auto& orb : fg.orbits) {
        Extended len = 0.0;
        for (const auto& d : orb.darts) len += cg.edges[d.edge].psi_length;
        orb.length = len;
    }
    return fg;
}

BoundarySystem boundary_system(const CriticalGraph& cg) {
    BoundarySystem bs;
    bs.edge_sides.assign(cg.edges.size(), {-1, -1});
    for (int c = 0; c < cg.component_count; ++c) {
        FatGraph fg = fat_graph(cg, c);
        for (auto& orb : fg.orbits) {
            orb.id = static_cast<int>(bs.boundaries.size());
            for (const auto& d : orb.darts) bs.edge_sides[d.edge][d.reversed ? 1 : 0] = orb.id;
            bs.boundaries.push_back(orb);
        }
        bs.fat_graphs.push_back(std::move(fg));
    }
    return bs;
}

std::vector<int> euler_characteristics(const CriticalGraph& cg, const BoundarySystem& bs) {
    std::vector<int> chi(static_cast<std::size_t>(cg.component_count), 0);
    std::vector<std::vector<std::size_t>> poles(chi.size());
    for (std::size_t v = 0; v < cg.vertices.size(); ++v) chi[cg.component_of_vertex[v]] += 1;
    for (const auto& e : cg.edges) {
        const int c = cg.component_of_edge(e.id);
        chi[c] -= 1;
        if (e.is_open()) poles[c].push_back(e.pole);
    }
    for (std::size_t c = 0; c < chi.size(); ++c) {
        std::sort(poles[c].begin(), poles[c].end());
        chi[c] += static_cast<int>(std::unique(poles[c].begin(), poles[c].end()) - poles[c].begin());
    }
    for (const auto& b : bs.boundaries) chi[b.component] += 1;
    return chi;
}

// ---------------------------------------------------------------------------
// Reeb graph

std::vector<int> ReebGraph::incident_edges(int v) const {
    std::vector<int> out;
    for (const auto& e : edges)
        if (e.tail == v || e.head == v) out.push_back(e.id);
    return out;
}

double ReebGraph::max_finite_length() const {
    double m = 0.0;
    for (const auto& e : edges)
        if (e.length.is_finite()) m = std::max(m, e.length.value());
    return m;
}

namespace {

struct ProbeBase {
    cplx z;
    cplx tangent;  // unit horizontal direction of the dart
};

ProbeBase probe_base(const TraceField& field, const GraphEdge& e, bool reversed) {
    const auto& pl = e.polyline;
    if (pl.size() < 3) throw Error(Errc::ProbeInconsistency, "topology", "critical edge polyline too short to probe");
    std::size_t k = 0;
    if (e.psi_length.is_finite()) {
        // Off-centre so symmetric instances do not send the probe into a pole.
        const double half = 0.41 * e.psi_length.value();
        k = static_cast<std::size_t>(std::lower_bound(e.times.begin(), e.times.end(), half) - e.times.begin());
    } else {
        const double reach = 0.5 * field.local_scale(pl.front() + 1e-3 * (pl[1] - pl.front()));
        const double want = std::max(reach, 0.5 * std::abs(pl[1] - pl.front()));
        k = 1;
        while (k + 2 < pl.size() && std::abs(pl[k] - pl.front()) < want) ++k;
    }
    k = std::clamp<std::size_t>(k, 1, pl.size() - 2);
    const cplx z = pl[k];
    cplx chord = pl[k + 1] - pl[k - 1];
    if (reversed) chord = -chord;
    cplx s = std::sqrt(field.qd().f(z));
    cplx v = 1.0 / s;
    if ((v * std::conj(chord)).real() < 0.0) v = -v;
    return {z, v / std::abs(v)};
}

double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

}  // namespace

ReebGraph build_reeb(const TraceField& field, const CriticalGraph& cg, const BoundarySystem& bs,
                     const TraceBudget& budget) {
    if (cg.vertices.empty())
        throw Error(Errc::NoFiniteCritical, "topology", "no finite critical points: the critical graph is empty");
    const auto& qd = field.qd();
    ReebGraph reeb;
    reeb.vertex_count = cg.component_count;

    std::vector<Obstacle> obstacles;
    for (const auto& e : cg.edges) obstacles.push_back({e.id, std::span<const cplx>(e.polyline)});

    const std::size_t nb = bs.boundaries.size();
    reeb.probes.resize(nb);
    std::vector<int> target(nb, -1);
    std::vector<char> closed(nb, 0);
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& orb = bs.boundaries[b];
        Dart pick = orb.darts.front();
        double best = -1.0;
        for (const auto& d : orb.darts) {
            const auto& len = cg.edges[d.edge].psi_length;
            if (len.is_finite() && len.value() > best) {
                best = len.value();
                pick = d;
            }
        }
        const ProbeBase base = probe_base(field, cg.edges[pick.edge], pick.reversed);
        TraceOptions vopts;
        vopts.capture_finite = false;
        vopts.obstacles = obstacles;
        vopts.ignore_obstacle_at_start = pick.edge;
        ProbeRecord& rec = reeb.probes[b];
        rec.from_boundary = static_cast<int>(b);
        rec.vertical = trace_vertical(field, base.z, budget, base.tangent * cplx(0.0, -1.0), vopts);
        const auto& vt = rec.vertical;
        if (vt.end.kind == AnchorKind::EdgeCrossing) {
            const auto& hit = cg.edges.at(static_cast<std::size_t>(vt.end.obstacle));
            const cplx p = hit.polyline[vt.end.obstacle_segment];
            const cplx d = hit.polyline[vt.end.obstacle_segment + 1] - p;
            const cplx before = vt.samples[vt.samples.size() - 2];
            const bool from_left = cross(d, before - p) > 0.0;
            rec.to_boundary = bs.edge_sides[hit.id][from_left ? 1 : 0];
            target[b] = rec.to_boundary;
        } else if (vt.end.kind != AnchorKind::InfiniteCritical) {
            throw Error(Errc::ChaoticInput, "topology",
                        std::string("vertical probe ended with anchor ") + std::string(anchor_name(vt.end.kind)));
        }

        // Horizontal probe through the middle of the domain.
        cplx zh;
        if (vt.end.kind == AnchorKind::EdgeCrossing) {
            zh = point_at(qd, vt, 0.5 * vt.psi_length);
        } else {
            const double want = 0.25 * field.local_scale(base.z);
            std::size_t k = 1;
            while (k + 1 < vt.samples.size() && std::abs(vt.samples[k] - base.z) < want) ++k;
            zh = vt.samples[k];
        }
        TraceOptions hopts;
        rec.horizontal = trace_horizontal(field, zh, base.tangent, budget, hopts);
        const auto& ht = *rec.horizontal;
        if (ht.end.kind == AnchorKind::ClosureToStart) {
            closed[b] = 1;
        } else if (ht.end.kind != AnchorKind::InfiniteCritical) {
            throw Error(recurrence_verdict(ht, budget) == RecurrenceVerdict::RecurrentSuspect ? Errc::ChaoticInput
                                                                                               : Errc::ProbeInconsistency,
                        "topology",
                        std::string("horizontal probe ended with anchor ") + std::string(anchor_name(ht.end.kind)));
        }
    }

    reeb.edge_of_boundary.assign(nb, -1);
    for (std::size_t b = 0; b < nb; ++b) {
        if (reeb.edge_of_boundary[b] >= 0) continue;
        const int other = target[b];
        if (other >= 0 && static_cast<std::size_t>(other) != b) {
            if (target[other] != static_cast<int>(b) || reeb.edge_of_boundary[other] >= 0)
                throw Error(Errc::ProbeInconsistency, "topology",
                            "probes from boundaries " + std::to_string(b) + " and " + std::to_string(other) +
                                " do not meet");
            if (closed[b] != closed[other])
                throw Error(Errc::ProbeInconsistency, "topology", "probes of one domain disagree on its kind");
        }
        ReebEdge e;
        e.id = static_cast<int>(reeb.edges.size());
        e.tail_boundary = static_cast<int>(b);
        e.tail = bs.boundaries[b].component;
        const auto& rec = reeb.probes[b];
        if (other >= 0) {
            e.head_boundary = other;
            e.head = bs.boundaries[other].component;
            double len = rec.vertical.psi_length;
            if (static_cast<std::size_t>(other) != b) {
                const double len2 = reeb.probes[other].vertical.psi_length;
                if (std::abs(len - len2) > 1e-5 * std::max(len, len2))
                    throw Error(Errc::ProbeInconsistency, "topology", "probes of one domain disagree on its height");
                len = 0.5 * (len + len2);
            }
            e.length = len;
        } else {
            e.length = Extended::infinity();
            e.pole = rec.vertical.end.point;
        }
        const bool finite = other >= 0;
        if (closed[b]) {
            e.kind = finite ? DomainKind::Ring : DomainKind::Circle;
            e.width = rec.horizontal->psi_length;
            e.core_curve = rec.horizontal->samples;
        } else {
            e.kind = finite ? DomainKind::Strip : DomainKind::End;
            e.width = Extended::infinity();
        }
        reeb.edge_of_boundary[b] = e.id;
        if (other >= 0) reeb.edge_of_boundary[other] = e.id;
        reeb.edges.push_back(std::move(e));
    }
    return reeb;
}

double width_mismatch(const ReebGraph& reeb, const BoundarySystem& bs) {
    double worst = 0.0;
    for (const auto& e : reeb.edges) {
        if (!e.width.is_finite()) continue;
        for (int b : {e.tail_boundary, e.head_boundary}) {
            if (b < 0) continue;
            const auto& len = bs.boundaries[b].length;
            if (!len.is_finite()) return std::numeric_limits<double>::infinity();
            worst = std::max(worst, std::abs(len.value() - e.width.value()) / e.width.value());
        }
    }
    return worst;
}

}  // namespace qd
