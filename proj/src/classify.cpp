#include "qdkit/classify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <set>

#include "qdkit/error.hpp"

namespace qd {

bool Orientation::toward(const ReebEdge& e, int boundary) const {
    if (e.tail_boundary == e.head_boundary) return true;
    const bool fwd = forward.at(static_cast<std::size_t>(e.id)) != 0;
    if (boundary == e.head_boundary) return fwd;
    if (boundary == e.tail_boundary) return !fwd;
    throw Error(Errc::InvalidInput, "classify", "boundary is not incident to the Reeb edge");
}

NonChaoticEvidence is_nonchaotic(const std::vector<TrajectorySegment>& segments, const TraceBudget& budget) {
    NonChaoticEvidence ev;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        const bool unresolved = s.end.kind == AnchorKind::BudgetExhausted || s.end.kind == AnchorKind::Recurrence;
        if (unresolved || recurrence_verdict(s, budget) == RecurrenceVerdict::RecurrentSuspect) ev.flagged.push_back(i);
    }
    ev.non_chaotic = ev.flagged.empty();
    ev.note = ev.non_chaotic ? "every critical trajectory ends at a critical point"
                             : "recurrence-grid evidence of a density domain (heuristic, not a proof)";
    return ev;
}

StrebelCheck is_strebel(const ReebGraph& reeb) {
    StrebelCheck c;
    c.strebel = !reeb.edges.empty();
    for (const auto& e : reeb.edges)
        if (e.kind != DomainKind::Ring && e.kind != DomainKind::Circle) c.strebel = false;
    return c;
}

StrebelCheck is_strebel(const ReebGraph& reeb, const RationalQD& qd, const CriticalInventory& inv) {
    StrebelCheck c = is_strebel(reeb);
    for (auto idx : inv.infinite_critical) {
        const auto& p = inv.points[idx];
        if (p.order > 2) {
            c.necessary_conditions = false;
            c.notes.push_back("pole of order " + std::to_string(p.order) + " present");
            continue;
        }
        const cplx r2 = sqrt_residue(qd, p).squared;
        if (!(r2.real() < 0.0 && std::abs(r2.imag()) <= 1e-9 * std::abs(r2))) {
            c.necessary_conditions = false;
            c.notes.push_back("double pole whose squared residue is not real negative");
        }
    }
    if (c.strebel && !c.necessary_conditions) c.notes.push_back("domain structure contradicts the pole conditions");
    return c;
}

// ---------------------------------------------------------------------------
// Gradient orientations

namespace {

struct FiniteSystem {
    std::vector<int> finite;  // Reeb edge ids with both ends at components
    std::vector<int> leaves;
    double tol = 0.0;
};

FiniteSystem split_edges(const ReebGraph& reeb, const GradientOptions& opts) {
    FiniteSystem fs;
    for (const auto& e : reeb.edges) {
        if (e.is_leaf()) {
            fs.leaves.push_back(e.id);
            continue;
        }
        if (!e.length.is_finite())
            throw Error(Errc::InvalidInput, "classify", "infinite-length Reeb edge must end at a leaf");
        if (!(e.length.value() > 0.0))
            throw Error(Errc::InvalidInput, "classify", "Reeb edge " + std::to_string(e.id) + " has zero length");
        fs.finite.push_back(e.id);
    }
    if (fs.finite.size() + fs.leaves.size() > opts.max_edges)
        throw Error(Errc::TooLarge, "classify", "more than " + std::to_string(opts.max_edges) + " Reeb edges");
    fs.tol = opts.rel_tol * reeb.max_finite_length();
    return fs;
}

// Value propagation; `bit(k)` is the orientation of finite edge k. Returns false on an inconsistent cycle.
bool propagate(const ReebGraph& reeb, const FiniteSystem& fs, const std::function<bool(std::size_t)>& bit,
               std::vector<double>& value, std::vector<char>& set, std::span<const std::size_t> which) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t k : which) {
            const auto& e = reeb.edges[fs.finite[k]];
            const double d = bit(k) ? e.length.value() : -e.length.value();  // value(head) - value(tail)
            if (set[e.tail] && !set[e.head]) {
                value[e.head] = value[e.tail] + d;
                set[e.head] = 1;
                changed = true;
            } else if (set[e.head] && !set[e.tail]) {
                value[e.tail] = value[e.head] - d;
                set[e.tail] = 1;
                changed = true;
            }
        }
        if (!changed) {
            for (int v = 0; v < reeb.vertex_count; ++v)
                if (!set[v]) {
                    bool touched = false;
                    for (std::size_t k : which) {
                        const auto& e = reeb.edges[fs.finite[k]];
                        if (e.tail == v || e.head == v) touched = true;
                    }
                    if (touched) {
                        value[v] = 0.0;
                        set[v] = 1;
                        changed = true;
                        break;
                    }
                }
        }
    }
    for (std::size_t k : which) {
        const auto& e = reeb.edges[fs.finite[k]];
        const double d = bit(k) ? e.length.value() : -e.length.value();
        if (std::abs(value[e.head] - value[e.tail] - d) > fs.tol) return false;
    }
    return true;
}

std::vector<std::uint64_t> finite_masks(const ReebGraph& reeb, const FiniteSystem& fs, const GradientOptions& opts) {
    const std::size_t n = fs.finite.size();
    std::vector<std::size_t> all(n);
    for (std::size_t k = 0; k < n; ++k) all[k] = k;
    std::vector<std::uint64_t> out;
    const auto nv = static_cast<std::size_t>(reeb.vertex_count);

    if (n <= opts.brute_force_limit) {
        for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << n); ++mask) {
            std::vector<double> value(nv, 0.0);
            std::vector<char> set(nv, 0);
            if (propagate(reeb, fs, [&](std::size_t k) { return (mask >> k) & 1; }, value, set, all))
                out.push_back(mask);
        }
        return out;
    }

    // Spanning forest: tree bits are free, every other edge is forced by the values.
    std::vector<int> parent(nv);
    for (std::size_t v = 0; v < nv; ++v) parent[v] = static_cast<int>(v);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    std::vector<std::size_t> tree, rest;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& e = reeb.edges[fs.finite[k]];
        const int a = find(e.tail), b = find(e.head);
        if (a != b) {
            parent[a] = b;
            tree.push_back(k);
        } else {
            rest.push_back(k);
        }
    }
    for (std::uint64_t tmask = 0; tmask < (std::uint64_t(1) << tree.size()); ++tmask) {
        std::uint64_t mask = 0;
        for (std::size_t i = 0; i < tree.size(); ++i)
            if ((tmask >> i) & 1) mask |= std::uint64_t(1) << tree[i];
        std::vector<double> value(nv, 0.0);
        std::vector<char> set(nv, 0);
        propagate(reeb, fs, [&](std::size_t k) { return (mask >> k) & 1; }, value, set, tree);
        bool ok = true;
        for (std::size_t k : rest) {
            const auto& e = reeb.edges[fs.finite[k]];
            const double diff = value[e.head] - value[e.tail];
            if (std::abs(diff - e.length.value()) <= fs.tol) mask |= std::uint64_t(1) << k;
            else if (std::abs(diff + e.length.value()) > fs.tol) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(mask);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Orientation assemble(const ReebGraph& reeb, const FiniteSystem& fs, std::uint64_t fmask, std::uint64_t lmask) {
    Orientation o;
    o.forward.assign(reeb.edges.size(), 0);
    for (std::size_t k = 0; k < fs.finite.size(); ++k) o.forward[fs.finite[k]] = (fmask >> k) & 1;
    for (std::size_t k = 0; k < fs.leaves.size(); ++k) o.forward[fs.leaves[k]] = (lmask >> k) & 1;
    return o;
}

}  // namespace

std::vector<Orientation> gradient_orientations(const ReebGraph& reeb, const GradientOptions& opts) {
    const FiniteSystem fs = split_edges(reeb, opts);
    const auto masks = finite_masks(reeb, fs, opts);
    const std::uint64_t leaf_count = std::uint64_t(1) << fs.leaves.size();
    if (masks.size() * leaf_count > opts.max_listed)
        throw Error(Errc::TooLarge, "classify", "too many gradient orientations to list");
    std::vector<Orientation> out;
    for (auto m : masks)
        for (std::uint64_t l = 0; l < leaf_count; ++l) out.push_back(assemble(reeb, fs, m, l));
    return out;
}

Potential integrate_potential(const ReebGraph& reeb, const Orientation& o, double rel_tol) {
    GradientOptions opts;
    opts.rel_tol = rel_tol;
    opts.max_edges = std::numeric_limits<std::size_t>::max();
    const FiniteSystem fs = split_edges(reeb, opts);
    std::vector<std::size_t> all(fs.finite.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    const auto nv = static_cast<std::size_t>(reeb.vertex_count);
    std::vector<double> value(nv, 0.0);
    std::vector<char> set(nv, 0);
    if (!propagate(reeb, fs, [&](std::size_t k) { return o.forward.at(fs.finite[k]) != 0; }, value, set, all))
        throw Error(Errc::InconsistentCocycle, "classify", "orientation does not integrate to a potential");
    if (!value.empty()) {
        const double lo = *std::min_element(value.begin(), value.end());
        for (auto& v : value) v -= lo;
    }
    return {value, o};
}

PotentialCount count_potentials(const ReebGraph& reeb, const GradientOptions& opts) {
    const FiniteSystem fs = split_edges(reeb, opts);
    const auto masks = finite_masks(reeb, fs, opts);
    PotentialCount c;
    c.finite_only = masks.size();
    c.with_leaves = c.finite_only << fs.leaves.size();
    c.power_of_two = c.finite_only == 0 || std::has_single_bit(c.finite_only);
    const std::set<std::uint64_t> lookup(masks.begin(), masks.end());
    const std::size_t lim = std::min<std::size_t>(masks.size(), 48);
    for (std::size_t a = 0; a < lim && c.flip_closed; ++a)
        for (std::size_t b = 0; b < lim && c.flip_closed; ++b)
            for (std::size_t d = 0; d < lim; ++d)
                if (!lookup.count(masks[a] ^ masks[b] ^ masks[d])) {
                    c.flip_closed = false;
                    break;
                }
    return c;
}

// ---------------------------------------------------------------------------
// 2-SAT

std::vector<Clause> positivity_clauses(const ReebGraph& reeb, const BoundarySystem& bs) {
    std::vector<Clause> out;
    auto literal = [&](int b) -> std::optional<int> {
        const auto& e = reeb.edges.at(static_cast<std::size_t>(reeb.edge_of_boundary.at(b)));
        if (e.tail_boundary == e.head_boundary) return std::nullopt;  // always toward
        return b == e.head_boundary ? 2 * e.id : 2 * e.id + 1;
    };
    for (std::size_t e = 0; e < bs.edge_sides.size(); ++e) {
        const auto l1 = literal(bs.edge_sides[e][0]);
        const auto l2 = literal(bs.edge_sides[e][1]);
        if (!l1 || !l2) continue;
        out.push_back({*l1, *l2, static_cast<int>(e)});
    }
    return out;
}

TwoSatResult solve_2sat(int variables, const std::vector<Clause>& clauses) {
    const int n = 2 * variables;
    std::vector<std::vector<int>> g(static_cast<std::size_t>(n)), gt(static_cast<std::size_t>(n));
    for (const auto& c : clauses) {
        g[c.a ^ 1].push_back(c.b);
        g[c.b ^ 1].push_back(c.a);
        gt[c.b].push_back(c.a ^ 1);
        gt[c.a].push_back(c.b ^ 1);
    }
    // Kosaraju, iterative.
    std::vector<int> order;
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::vector<std::pair<int, std::size_t>> stack{{s, 0}};
        seen[s] = 1;
        while (!stack.empty()) {
            auto& [v, i] = stack.back();
            if (i < g[v].size()) {
                const int w = g[v][i++];
                if (!seen[w]) {
                    seen[w] = 1;
                    stack.push_back({w, 0});
                }
            } else {
                order.push_back(v);
                stack.pop_back();
            }
        }
    }
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    int label = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (comp[*it] >= 0) continue;
        std::vector<int> stack{*it};
        comp[*it] = label;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w : gt[v])
                if (comp[w] < 0) {
                    comp[w] = label;
                    stack.push_back(w);
                }
        }
        ++label;
    }
    TwoSatResult r;
    r.orientation.forward.assign(static_cast<std::size_t>(variables), 0);
    for (int x = 0; x < variables; ++x) {
        if (comp[2 * x] == comp[2 * x + 1]) {
            r.satisfiable = false;
            r.conflict_variable = x;
            for (int l = 0; l < n; ++l)
                if (comp[l] == comp[2 * x]) r.conflict_component.push_back(l);
            return r;
        }
        // Components are numbered in topological order of the implication graph.
        r.orientation.forward[x] = comp[2 * x] > comp[2 * x + 1];
    }
    r.satisfiable = true;
    return r;
}

bool satisfies(const Orientation& o, const std::vector<Clause>& clauses) {
    auto value = [&](int lit) { return (o.forward.at(static_cast<std::size_t>(lit / 2)) != 0) != (lit % 2 == 1); };
    for (const auto& c : clauses)
        if (!value(c.a) && !value(c.b)) return false;
    return true;
}

TwoSatResult positivity_2sat(const ReebGraph& reeb, const BoundarySystem& bs) {
    return solve_2sat(static_cast<int>(reeb.edges.size()), positivity_clauses(reeb, bs));
}

PositiveGradient positive_gradient(const ReebGraph& reeb, const BoundarySystem& bs, const GradientOptions& opts) {
    PositiveGradient pg;
    const auto clauses = positivity_clauses(reeb, bs);
    const int nvar = static_cast<int>(reeb.edges.size());
    pg.clause_system = solve_2sat(nvar, clauses);
    const FiniteSystem fs = split_edges(reeb, opts);
    const auto masks = finite_masks(reeb, fs, opts);
    pg.gradient = !masks.empty();
    if (!pg.clause_system.satisfiable) return pg;
    if (masks.size() > opts.max_listed) throw Error(Errc::TooLarge, "classify", "too many gradient orientations");
    for (auto m : masks) {
        std::vector<Clause> fixed = clauses;
        for (std::size_t k = 0; k < fs.finite.size(); ++k) {
            const int lit = 2 * fs.finite[k] + (((m >> k) & 1) ? 0 : 1);
            fixed.push_back({lit, lit, -1});
        }
        auto r = solve_2sat(nvar, fixed);
        if (r.satisfiable) {
            pg.positive = true;
            pg.witness = r.orientation;
            break;
        }
    }
    return pg;
}

Extended component_mass(const ReebGraph& reeb, const Orientation& o, int vertex) {
    Extended in = 0.0, out = 0.0;
    for (const auto& e : reeb.edges) {
        const bool fwd = o.forward.at(static_cast<std::size_t>(e.id)) != 0;
        if (e.tail == vertex && e.head == vertex) {
            in += e.width;
            out += e.width;
        } else if (e.head == vertex) {
            (fwd ? in : out) += e.width;
        } else if (e.tail == vertex) {
            (fwd ? out : in) += e.width;
        }
    }
    return in - out;
}

// ---------------------------------------------------------------------------
// Simple cycles

bool point_in_polygon(cplx p, const std::vector<cplx>& poly) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const cplx a = poly[i], b = poly[j];
        if ((a.imag() > p.imag()) != (b.imag() > p.imag())) {
            const double x = a.real() + (p.imag() - a.imag()) * (b.real() - a.real()) / (b.imag() - a.imag());
            if (p.real() < x) inside = !inside;
        }
    }
    return inside;
}

namespace {

std::vector<cplx> edge_points(const CriticalGraph& cg, const GraphEdge& e) {
    if (!e.polyline.empty()) return e.polyline;
    if (e.is_open()) return {cg.vertices[e.tail.vertex].location};
    return {cg.vertices[e.tail.vertex].location, cg.vertices[e.head.vertex].location};
}

cplx interior_point(const CriticalGraph& cg, const GraphEdge& e) {
    const auto pts = edge_points(cg, e);
    if (pts.size() >= 3) return pts[pts.size() / 2];
    if (pts.size() == 2) return 0.5 * (pts[0] + pts[1]);
    return pts[0];
}

}  // namespace

SimpleCycleResult simple_cycle_criterion(const CriticalGraph& cg, const BoundarySystem& bs, std::size_t cycle_cap) {
    for (int chi : euler_characteristics(cg, bs))
        if (chi != 2) throw Error(Errc::NonPlanarInput, "classify", "a component of the critical graph is not planar");

    SimpleCycleResult res;
    const int nv = static_cast<int>(cg.vertices.size());
    std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(nv));  // (edge, other vertex)
    for (const auto& e : cg.edges) {
        if (e.is_open()) continue;
        if (e.tail.vertex == e.head.vertex) {
            res.cycles.push_back({e.id});
            continue;
        }
        adj[e.tail.vertex].push_back({e.id, e.head.vertex});
        adj[e.head.vertex].push_back({e.id, e.tail.vertex});
    }
    std::vector<std::vector<std::pair<int, bool>>> oriented;  // (edge, reversed) along each non-loop cycle
    for (const auto& c : res.cycles) oriented.push_back({{c[0], false}});

    std::vector<char> on_path(static_cast<std::size_t>(nv), 0);
    std::vector<std::pair<int, bool>> path;
    std::function<void(int, int)> dfs = [&](int start, int v) {
        if (res.truncated) return;
        for (auto [eid, w] : adj[v]) {
            if (!path.empty() && path.back().first == eid) continue;
            const bool rev = cg.edges[eid].tail.vertex != v;
            if (w == start) {
                if (path.empty() || path.front().first >= eid) continue;
                auto cyc = path;
                cyc.push_back({eid, rev});
                std::vector<int> ids;
                for (auto [x, r] : cyc) ids.push_back(x);
                res.cycles.push_back(ids);
                oriented.push_back(cyc);
                if (res.cycles.size() >= cycle_cap) {
                    res.truncated = true;
                    return;
                }
                continue;
            }
            if (w < start || on_path[w]) continue;
            on_path[w] = 1;
            path.push_back({eid, rev});
            dfs(start, w);
            path.pop_back();
            on_path[w] = 0;
        }
    };
    for (int s = 0; s < nv && !res.truncated; ++s) {
        on_path[s] = 1;
        dfs(s, s);
        on_path[s] = 0;
    }

    std::vector<char> in_cycle(cg.edges.size(), 0);
    for (std::size_t ci = 0; ci < res.cycles.size(); ++ci) {
        std::set<int> members(res.cycles[ci].begin(), res.cycles[ci].end());
        std::set<int> verts;
        std::vector<cplx> polygon;
        for (auto [eid, rev] : oriented[ci]) {
            in_cycle[eid] = 1;
            const auto& e = cg.edges[eid];
            verts.insert(e.tail.vertex);
            verts.insert(e.head.vertex);
            auto pts = edge_points(cg, e);
            if (rev) std::reverse(pts.begin(), pts.end());
            polygon.insert(polygon.end(), pts.begin(), pts.end());
        }
        if (res.inside_attachment) continue;
        for (const auto& e : cg.edges) {
            if (members.count(e.id)) continue;
            if (!verts.count(e.tail.vertex) && !(e.head.vertex >= 0 && verts.count(e.head.vertex))) continue;
            if (point_in_polygon(interior_point(cg, e), polygon)) {
                res.admits_positive = false;
                res.inside_attachment = std::make_pair(static_cast<int>(ci), e.id);
                break;
            }
        }
    }
    for (const auto& e : cg.edges)
        if (!in_cycle[e.id]) res.support.push_back(e.id);
    return res;
}

}  // namespace qd
