#include "qdkit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

#include "qdkit/error.hpp"

namespace qd {

namespace {

struct Collector {
    Json warnings = Json::array();
    Json notes = Json::array();
};

Json measure_json(const SignedMeasure& m, const Orientation& o, const std::optional<BranchResidual>& br,
                  double branch_tol, Collector& col) {
    const double variation = m.variation();
    const double exactness = variation > 0 ? std::abs(m.total_mass) / variation : 0.0;
    Json poles = Json::array();
    for (const auto& p : m.pole_masses) poles.push_back({{"location", to_json(p.location)}, {"mass", p.mass}});
    Json edges = Json::array();
    for (const auto& t : m.edge_terms)
        edges.push_back({{"edge", t.edge}, {"coefficient", t.coefficient}, {"psi_length", t.psi_length}});
    Json j = {{"orientation", to_json(o)},
              {"positive", m.edges_nonnegative()},
              {"total_mass", m.total_mass},
              {"finite_mass", m.finite_mass()},
              {"variation", variation},
              {"exactness", {{"value", exactness}, {"tolerance", 1e-6}, {"pass", exactness <= 1e-6}}},
              {"atom_spacing", m.atom_spacing},
              {"edges", edges},
              {"pole_masses", poles}};
    if (exactness > 1e-6) col.warnings.push_back("measure total mass is not zero within 1e-6 of its variation");
    if (br) j["branch_residual"] = {{"max", br->max}, {"mean", br->mean}, {"tolerance", branch_tol}, {"pass", br->pass}};
    return j;
}

// Verdicts and potentials shared by the analytic and abstract paths.
void classify_into(Json& doc, PipelineArtifacts& a, const StrebelCheck& st, bool non_chaotic, bool planar_geometry,
                   const PipelineConfig& cfg, Collector& col) {
    Json v = {{"non_chaotic", non_chaotic}, {"strebel", st.strebel && non_chaotic}};
    for (const auto& n : st.notes) col.notes.push_back(n);
    bool gradient = false, positive = false;
    Json potentials = nullptr;
    if (st.strebel && non_chaotic) {
        try {
            const auto count = count_potentials(a.reeb, cfg.gradient);
            potentials = to_json(count);
            potentials["tolerance"] = cfg.gradient.rel_tol;
            gradient = count.with_leaves > 0;
            if (!count.power_of_two) col.warnings.push_back("potential count is not a power of two");
            col.notes.push_back("potentials counted with leaf orientations (with_leaves) and without (finite_only)");
            if (a.has_sides) {
                const auto pg = positive_gradient(a.reeb, a.bs, cfg.gradient);
                positive = pg.positive;
                doc["clause_system"] = {{"satisfiable", pg.clause_system.satisfiable},
                                        {"conflict_variable", pg.clause_system.conflict_variable}};
                if (pg.witness) doc["positive_witness"] = to_json(*pg.witness);
            }
        } catch (const Error& e) {
            if (e.code() != Errc::TooLarge) throw;
            col.warnings.push_back(std::string("gradient decision skipped: ") + e.what());
        }
        if (planar_geometry && a.has_sides) {
            try {
                const auto sc = simple_cycle_criterion(a.cg, a.bs, cfg.cycle_cap);
                doc["simple_cycle"] = {{"admits_positive", sc.admits_positive},
                                       {"cycles", sc.cycles.size()},
                                       {"truncated", sc.truncated}};
                if (sc.truncated) col.warnings.push_back("simple-cycle enumeration hit its cap; 2-SAT verdict used");
            } catch (const Error& e) {
                if (e.code() != Errc::NonPlanarInput) throw;
                col.notes.push_back(std::string("simple-cycle criterion not applicable: ") + e.what());
            }
        }
    } else {
        col.notes.push_back("gradient and positivity are decided only for Strebel differentials");
    }
    v["gradient"] = gradient;
    v["positive"] = a.has_sides ? Json(positive) : Json(nullptr);
    if (!a.has_sides) col.notes.push_back("no critical-edge incidence given: positivity not decided");
    v["chain_monotone"] = (!positive || gradient) && (!gradient || v["strebel"].get<bool>());
    doc["verdicts"] = v;
    doc["potentials"] = potentials;
}

void finish(AnalysisReport& r, Collector& col) {
    r.doc["warnings"] = col.warnings;
    r.doc["notes"] = col.notes;
    r.exit_code = col.warnings.empty() ? 0 : 2;
}

std::vector<cplx> outer_points(const SignedMeasure& m) {
    double r = 0.0;
    for (const auto& a : m.finite_atoms()) r = std::max(r, std::abs(a.point));
    std::vector<cplx> out;
    for (int k = 0; k < 8; ++k) out.push_back(std::polar(2.0 * r + 1.0, 0.25 * std::numbers::pi * k + 0.3));
    return out;
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

}  // namespace

Json error_json(const Error& e) {
    return {{"code", errc_name(e.code())}, {"module", e.module()}, {"message", e.what()}};
}

Json trace_summary(const TraceField& field, const std::vector<TrajectorySegment>& segments) {
    Json segs = Json::array();
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        auto anchor = [&](const Anchor& an) {
            Json j = {{"kind", anchor_name(an.kind)}};
            if (an.point != npos) j["point"] = to_json(field.inventory().points[an.point].location);
            return j;
        };
        segs.push_back({{"id", i},
                        {"start", anchor(s.start)},
                        {"end", anchor(s.end)},
                        {"psi_length", s.psi_length},
                        {"samples", s.samples.size()},
                        {"recurrence", verdict_name(recurrence_verdict(s))}});
    }
    return {{"segment_count", segments.size()}, {"feature_scale", field.feature_scale()}, {"segments", segs}};
}

void write_segments_csv(std::ostream& os, const std::vector<TrajectorySegment>& segments) {
    os << "segment_id,t,re,im\n";
    char buf[128];
    for (std::size_t i = 0; i < segments.size(); ++i)
        for (std::size_t k = 0; k < segments[i].samples.size(); ++k) {
            const cplx z = segments[i].samples[k];
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, segments[i].times[k], z.real(), z.imag());
            os << buf;
        }
}

AnalysisReport analyze_differential(const RationalQD& qd, const Json& input_echo, const PipelineConfig& cfg) {
    AnalysisReport r;
    auto& a = r.artifacts;
    Collector col;
    r.doc["input"] = input_echo;
    r.doc["tolerances"] = {{"trace_rel_tol", cfg.trace.rel_tol},
                           {"cycle_rel_tol", cfg.gradient.rel_tol},
                           {"branch_tol", cfg.branch_tol},
                           {"exactness_tol", 1e-6}};
    a.field = std::make_unique<TraceField>(qd);
    const auto& inv = a.field->inventory();
    r.doc["inventory"] = to_json(inv);
    a.segments = launch_critical(*a.field, cfg.trace);
    r.doc["trace"] = trace_summary(*a.field, a.segments);
    const auto nc = is_nonchaotic(a.segments, cfg.trace);
    if (!nc.non_chaotic)
        col.warnings.push_back("recurrence flags on " + std::to_string(nc.flagged.size()) + " critical trajectories");

    try {
        a.cg = build_critical_graph(a.segments, *a.field, cfg.trace);
        a.bs = boundary_system(a.cg);
        a.reeb = build_reeb(*a.field, a.cg, a.bs, cfg.trace);
        a.has_sides = true;
    } catch (const Error& e) {
        if (e.code() != Errc::NoFiniteCritical && e.code() != Errc::ChaoticInput) throw;
        col.warnings.push_back(std::string("no Reeb graph: ") + e.what());
        r.doc["graphs"] = nullptr;
        r.doc["verdicts"] = {{"non_chaotic", nc.non_chaotic && e.code() != Errc::ChaoticInput},
                             {"strebel", false},
                             {"gradient", false},
                             {"positive", false},
                             {"chain_monotone", true}};
        r.doc["potentials"] = nullptr;
        r.doc["measures"] = Json::array();
        finish(r, col);
        return r;
    }
    r.doc["graphs"] = {{"critical_graph", to_json(a.cg, cfg.polylines)},
                       {"boundary_system", to_json(a.bs)},
                       {"reeb", to_json(a.reeb)}};
    for (const auto& e : a.reeb.edges)
        if ((e.kind == DomainKind::Ring || e.kind == DomainKind::Circle) && e.width.is_infinite())
            col.warnings.push_back("Reeb edge " + std::to_string(e.id) + " has infinite width");
    const double mismatch = width_mismatch(a.reeb, a.bs);
    r.doc["width_mismatch"] = {{"value", mismatch}, {"tolerance", 1e-6}};

    const auto st = is_strebel(a.reeb, qd, inv);
    classify_into(r.doc, a, st, nc.non_chaotic, true, cfg, col);

    Json measures = Json::array();
    if (cfg.measures && r.doc["verdicts"]["gradient"].get<bool>()) {
        bool real_form = false;
        try {
            const auto set = enumerate_real_measures(*a.field, a.cg, a.bs, a.reeb, cfg.measure);
            real_form = true;
            r.doc["domains"] = set.domains;
            for (const auto& rm : set.measures) {
                BranchResidual br;
                try {
                    br = verify_branch_equation(rm.measure, qd, cfg.check_points, cfg.branch_tol);
                } catch (const Error& e) {
                    if (e.code() != Errc::PointTooCloseToSupport) throw;
                    br = verify_branch_equation(rm.measure, qd, outer_points(rm.measure), cfg.branch_tol);
                    col.notes.push_back("check points too close to the support; branch residual taken on an outer circle");
                }
                measures.push_back(measure_json(rm.measure, rm.orientation, br, cfg.branch_tol, col));
                a.measures.push_back(rm.measure);
                a.measure_orientations.push_back(rm.orientation);
            }
            col.notes.push_back("real measures: leaf at infinity fixed, 2^(d-1) orientations of the other edges");
        } catch (const Error& e) {
            if (e.code() != Errc::NotStrebelForm && e.code() != Errc::TooLarge) throw;
        }
        if (!real_form) {
            auto orients = gradient_orientations(a.reeb, cfg.gradient);
            if (orients.size() > cfg.max_levy_measures) {
                col.notes.push_back("Levy measures listed for the first " + std::to_string(cfg.max_levy_measures) +
                                    " gradient orientations");
                orients.resize(cfg.max_levy_measures);
            }
            for (const auto& o : orients) {
                try {
                    auto m = build_levy_measure(*a.field, a.cg, a.bs, a.reeb, o, cfg.measure);
                    measures.push_back(measure_json(m, o, std::nullopt, cfg.branch_tol, col));
                    a.measures.push_back(std::move(m));
                    a.measure_orientations.push_back(o);
                } catch (const Error& e) {
                    if (e.code() != Errc::InfiniteDensityEdge) throw;
                    col.notes.push_back(std::string("orientation skipped: ") + e.what());
                }
            }
        }
    }
    r.doc["measures"] = measures;
    finish(r, col);
    return r;
}

AnalysisReport analyze_abstract(const AbstractInstance& inst, const Json& input_echo, const PipelineConfig& cfg) {
    AnalysisReport r;
    auto& a = r.artifacts;
    Collector col;
    r.doc["input"] = input_echo;
    r.doc["tolerances"] = {{"cycle_rel_tol", cfg.gradient.rel_tol}};
    if (inst.critical_graph) a.cg = *inst.critical_graph;
    a.bs = inst.boundaries;
    a.reeb = inst.reeb;
    a.has_sides = inst.has_sides;
    Json graphs = {{"reeb", to_json(a.reeb)}};
    if (inst.critical_graph) {
        graphs["critical_graph"] = to_json(a.cg, cfg.polylines);
        graphs["boundary_system"] = to_json(a.bs);
    } else if (inst.has_sides) {
        graphs["edge_sides"] = to_json(a.bs)["edge_sides"];
    }
    r.doc["graphs"] = graphs;
    const bool planar = inst.critical_graph && std::all_of(a.cg.edges.begin(), a.cg.edges.end(), [](const GraphEdge& e) {
                            return e.polyline.size() >= 2;
                        });
    classify_into(r.doc, a, is_strebel(a.reeb), true, planar, cfg, col);
    col.notes.push_back("abstract instance: no analytic field, measures not constructed");
    r.doc["measures"] = Json::array();
    finish(r, col);
    return r;
}

AnalysisReport analyze_document(const Json& doc, const PipelineConfig& cfg) {
    if (is_abstract_document(doc)) return analyze_abstract(abstract_from_json(doc), doc, cfg);
    if (doc.contains("graphs") && doc.at("graphs").is_object() && doc.at("graphs").contains("reeb"))
        return analyze_abstract(abstract_from_json(doc.at("graphs")), doc.at("graphs"), cfg);
    return analyze_differential(parse_differential(doc.dump()), doc, cfg);
}

std::string render_svg(const PipelineArtifacts& art, const SignedMeasure* measure) {
    // Extent from the finite critical points.
    std::vector<cplx> pts;
    if (art.field)
        for (const auto& p : art.field->inventory().points)
            if (!p.location.at_infinity) pts.push_back(p.location.z);
    for (const auto& v : art.cg.vertices) pts.push_back(v.location);
    cplx centre{};
    for (cplx z : pts) centre += z;
    if (!pts.empty()) centre /= static_cast<double>(pts.size());
    double radius = 1.0;
    for (cplx z : pts) radius = std::max(radius, std::abs(z - centre));
    const double half = 1.6 * radius + 0.5;
    const double px = 600.0;
    auto X = [&](cplx z) { return (z.real() - centre.real() + half) / (2 * half) * px; };
    auto Y = [&](cplx z) { return (centre.imag() + half - z.imag()) / (2 * half) * px; };
    auto in_view = [&](cplx z) {
        return std::abs(z.real() - centre.real()) <= 3 * half && std::abs(z.imag() - centre.imag()) <= 3 * half;
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"600\" viewBox=\"0 0 760 600\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"600\" height=\"600\" fill=\"white\" stroke=\"#999\"/>\n";

    os << "<g id=\"probe-grid\" stroke=\"#c8c8c8\" stroke-width=\"1\">\n";
    if (art.field) {
        const int n = 15;
        const double tick = half / n * 0.6;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                const cplx z = centre + cplx(-half + (i + 0.5) * 2 * half / n, -half + (k + 0.5) * 2 * half / n);
                const cplx f = art.field->qd().f(z);
                if (!std::isfinite(std::abs(f)) || std::abs(f) == 0.0) continue;
                const cplx d = std::polar(tick, -0.5 * std::arg(f));
                os << "<line x1=\"" << fmt(X(z - d)) << "\" y1=\"" << fmt(Y(z - d)) << "\" x2=\"" << fmt(X(z + d))
                   << "\" y2=\"" << fmt(Y(z + d)) << "\"/>\n";
            }
    }
    os << "</g>\n";

    std::vector<int> coeff(art.cg.edges.size(), 0);
    bool signed_edges = false;
    if (measure) {
        for (const auto& t : measure->edge_terms)
            if (t.edge >= 0 && static_cast<std::size_t>(t.edge) < coeff.size()) coeff[static_cast<std::size_t>(t.edge)] = t.coefficient;
        signed_edges = true;
    }
    os << "<g id=\"critical\" fill=\"none\">\n";
    for (const auto& e : art.cg.edges) {
        std::string pts_attr;
        for (cplx z : e.polyline)
            if (in_view(z)) pts_attr += fmt(X(z)) + "," + fmt(Y(z)) + " ";
        if (pts_attr.empty()) continue;
        const int c = coeff[static_cast<std::size_t>(e.id)];
        std::string style = "stroke=\"black\" stroke-width=\"2\"";
        if (signed_edges && c < 0) style = "stroke=\"#b03030\" stroke-width=\"2\" stroke-dasharray=\"6,4\"";
        if (signed_edges && c == 0) style = "stroke=\"#808080\" stroke-width=\"1\"";
        os << "<polyline class=\"" << (signed_edges ? (c > 0 ? "positive" : c < 0 ? "negative" : "null") : "edge")
           << "\" " << style << " points=\"" << pts_attr << "\"/>\n";
    }
    os << "</g>\n";

    os << "<g id=\"critical-points\">\n";
    if (art.field)
        for (const auto& p : art.field->inventory().points) {
            if (p.location.at_infinity || p.kind == CriticalKind::Regular) continue;
            const double x = X(p.location.z), y = Y(p.location.z);
            if (p.kind == CriticalKind::Zero)
                os << "<circle class=\"zero\" cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"3\" fill=\"#2050c0\"/>\n";
            else if (p.kind == CriticalKind::SimplePole)
                os << "<path class=\"simple-pole\" d=\"M" << fmt(x - 4) << "," << fmt(y - 4) << " L" << fmt(x + 4) << ","
                   << fmt(y + 4) << " M" << fmt(x - 4) << "," << fmt(y + 4) << " L" << fmt(x + 4) << "," << fmt(y - 4)
                   << "\" stroke=\"#c06000\" stroke-width=\"2\"/>\n";
            else
                os << "<rect class=\"higher-pole\" x=\"" << fmt(x - 4) << "\" y=\"" << fmt(y - 4)
                   << "\" width=\"8\" height=\"8\" fill=\"#c06000\"/>\n";
        }
    os << "</g>\n";

    os << "<g id=\"pole-masses\" stroke=\"black\" stroke-width=\"1.5\">\n";
    if (measure)
        for (const auto& pm : measure->pole_masses) {
            if (pm.mass == 0.0) continue;
            const std::string fill = pm.mass > 0 ? "black" : "white";
            const std::string cls = pm.mass > 0 ? "positive" : "negative";
            if (pm.location.at_infinity) {
                os << "<text x=\"560\" y=\"30\" font-size=\"18\" stroke=\"none\">&#8734;</text>\n";
                os << "<circle class=\"" << cls << " infinity\" cx=\"585\" cy=\"24\" r=\"6\" fill=\"" << fill << "\"/>\n";
            } else {
                os << "<circle class=\"" << cls << "\" cx=\"" << fmt(X(pm.location.z)) << "\" cy=\"" << fmt(Y(pm.location.z))
                   << "\" r=\"6\" fill=\"" << fill << "\"/>\n";
            }
        }
    os << "</g>\n";

    os << "<g id=\"legend\" font-size=\"12\" font-family=\"sans-serif\">\n"
       << "<line x1=\"610\" y1=\"30\" x2=\"640\" y2=\"30\" stroke=\"black\" stroke-width=\"2\"/>"
       << "<text x=\"645\" y=\"34\">positive edge</text>\n"
       << "<line x1=\"610\" y1=\"50\" x2=\"640\" y2=\"50\" stroke=\"#b03030\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/>"
       << "<text x=\"645\" y=\"54\">negative edge</text>\n"
       << "<circle cx=\"625\" cy=\"70\" r=\"3\" fill=\"#2050c0\"/><text x=\"645\" y=\"74\">zero</text>\n"
       << "<rect x=\"621\" y=\"86\" width=\"8\" height=\"8\" fill=\"#c06000\"/><text x=\"645\" y=\"94\">pole</text>\n"
       << "<circle cx=\"625\" cy=\"110\" r=\"6\" fill=\"black\"/><text x=\"645\" y=\"114\">positive mass</text>\n"
       << "<circle cx=\"625\" cy=\"130\" r=\"6\" fill=\"white\" stroke=\"black\"/><text x=\"645\" y=\"134\">negative mass</text>\n"
       << "</g>\n</svg>\n";
    return os.str();
}

}  // namespace qd
