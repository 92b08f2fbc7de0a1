#include "qdkit/serialize.hpp"

#include <algorithm>
#include <cmath>

#include "qdkit/error.hpp"
#include "qdkit/expression.hpp"

namespace qd {

namespace {

Error bad(const std::string& what) { return Error(Errc::InvalidInput, "cli", what); }

Json number(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return nullptr;
    return x > 0 ? "inf" : "-inf";
}

CriticalKind kind_from(const std::string& s) {
    for (auto k : {CriticalKind::Zero, CriticalKind::SimplePole, CriticalKind::HigherPole, CriticalKind::Regular})
        if (kind_name(k) == s) return k;
    throw bad("unknown vertex kind '" + s + "'");
}

Json end_json(const EdgeEnd& e) {
    if (e.open()) return nullptr;
    return Json::array({e.vertex, e.slot});
}

EdgeEnd end_from(const Json& j) {
    if (j.is_null()) return {};
    if (!j.is_array() || j.size() != 2) throw bad("edge end must be [vertex, slot] or null");
    return {j[0].get<int>(), j[1].get<int>()};
}

int optional_int(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return -1;
    return j.at(key).get<int>();
}

}  // namespace

Json to_json(cplx z) { return Json::array({number(z.real()), number(z.imag())}); }

Json to_json(const Extended& x) {
    if (x.is_infinite()) return x.infinity_sign() > 0 ? "inf" : "-inf";
    return number(x.finite());
}

Json to_json(const Polynomial& p) {
    Json a = Json::array();
    for (int i = 0; i <= std::max(p.degree(), 0); ++i) a.push_back(to_json(p[static_cast<std::size_t>(i)]));
    return a;
}

Json to_json(const Location& l) {
    if (l.at_infinity) return "inf";
    return to_json(l.z);
}

Json to_json(const CriticalInventory& inv) {
    Json pts = Json::array();
    for (const auto& p : inv.points)
        pts.push_back({{"location", to_json(p.location)}, {"kind", kind_name(p.kind)}, {"order", p.order}});
    return {{"points", pts}, {"euler_balance", inv.euler_balance()}};
}

Json to_json(const CriticalGraph& cg, bool polylines) {
    Json vs = Json::array();
    for (const auto& v : cg.vertices) {
        Json j = {{"id", v.id}, {"kind", kind_name(v.kind)}, {"order", v.order}, {"degree", v.degree},
                  {"location", to_json(v.location)}};
        if (!v.slot_angles.empty()) j["slot_angles"] = v.slot_angles;
        vs.push_back(j);
    }
    Json es = Json::array();
    for (const auto& e : cg.edges) {
        Json j = {{"id", e.id}, {"tail", end_json(e.tail)}, {"head", end_json(e.head)}, {"length", to_json(e.psi_length)}};
        if (polylines && !e.polyline.empty()) {
            Json pl = Json::array();
            for (cplx z : e.polyline) pl.push_back(to_json(z));
            j["polyline"] = pl;
        }
        es.push_back(j);
    }
    return {{"vertices", vs}, {"edges", es}, {"components", cg.component_count}};
}

Json to_json(const BoundarySystem& bs) {
    Json sides = Json::array();
    for (const auto& s : bs.edge_sides) sides.push_back(Json::array({s[0], s[1]}));
    Json bnds = Json::array();
    for (const auto& b : bs.boundaries) {
        Json darts = Json::array();
        for (const auto& d : b.darts) darts.push_back(Json::array({d.edge, d.reversed ? 1 : 0}));
        bnds.push_back({{"id", b.id}, {"component", b.component}, {"closed", b.closed}, {"length", to_json(b.length)},
                        {"darts", darts}});
    }
    Json fats = Json::array();
    for (const auto& f : bs.fat_graphs) {
        Json flags = Json::array();
        for (const auto& fl : f.flags) flags.push_back(Json::array({fl.vertex, fl.slot}));
        fats.push_back({{"component", f.component}, {"flags", flags}, {"sigma0", f.sigma0}, {"sigma1", f.sigma1}});
    }
    return {{"edge_sides", sides}, {"boundaries", bnds}, {"fat_graphs", fats}};
}

Json to_json(const ReebGraph& reeb) {
    Json es = Json::array();
    for (const auto& e : reeb.edges) {
        Json j = {{"id", e.id},
                  {"kind", domain_name(e.kind)},
                  {"tail", e.tail},
                  {"head", e.is_leaf() ? Json(nullptr) : Json(e.head)},
                  {"tail_boundary", e.tail_boundary},
                  {"head_boundary", e.head_boundary < 0 ? Json(nullptr) : Json(e.head_boundary)},
                  {"length", to_json(e.length)},
                  {"width", to_json(e.width)}};
        es.push_back(j);
    }
    return {{"vertex_count", reeb.vertex_count}, {"edges", es}};
}

Json to_json(const Orientation& o) {
    Json a = Json::array();
    for (auto b : o.forward) a.push_back(static_cast<int>(b));
    return a;
}

Json to_json(const PotentialCount& c) {
    return {{"with_leaves", c.with_leaves},
            {"finite_only", c.finite_only},
            {"power_of_two", c.power_of_two},
            {"flip_closed", c.flip_closed}};
}

Json to_json(const HSSolution& s) {
    Json roots = Json::array();
    for (cplx z : s.s_roots) roots.push_back(to_json(z));
    return {{"roots", roots},
            {"V", to_json(s.V)},
            {"residual", s.residual},
            {"electrostatic_residual", s.electrostatic_residual},
            {"iterations", s.iterations}};
}

cplx complex_from_json(const Json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw bad("complex number must be a number or an [re, im] pair");
}

Extended extended_from_json(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return Extended::infinity();
        if (s == "-inf") return Extended::infinity(-1);
        try {
            return std::stod(s);
        } catch (const std::exception&) {
        }
    }
    throw bad("length must be a number or \"inf\"");
}

Polynomial polynomial_from_json(const Json& j) {
    if (j.is_string()) return parse_polynomial_expression(j.get<std::string>());
    if (!j.is_array() || j.empty()) throw bad("polynomial must be a non-empty coefficient array or an expression");
    std::vector<cplx> c;
    for (const auto& x : j) c.push_back(complex_from_json(x));
    return Polynomial(std::move(c));
}

bool is_abstract_document(const Json& doc) { return doc.is_object() && doc.contains("reeb"); }

AbstractInstance abstract_from_json(const Json& doc) {
    if (!is_abstract_document(doc)) throw bad("abstract instance needs a \"reeb\" member");
    AbstractInstance inst;
    try {
        if (doc.contains("critical_graph")) {
            const auto& g = doc.at("critical_graph");
            CriticalGraph cg;
            for (const auto& v : g.at("vertices")) {
                GraphVertex gv;
                gv.id = v.at("id").get<int>();
                gv.kind = kind_from(v.value("kind", std::string("zero")));
                gv.order = v.value("order", 1);
                gv.degree = v.at("degree").get<int>();
                if (v.contains("location")) gv.location = complex_from_json(v.at("location"));
                if (v.contains("slot_angles")) gv.slot_angles = v.at("slot_angles").get<std::vector<double>>();
                cg.vertices.push_back(std::move(gv));
            }
            for (const auto& e : g.at("edges")) {
                GraphEdge ge;
                ge.id = e.at("id").get<int>();
                ge.tail = end_from(e.at("tail"));
                ge.head = end_from(e.value("head", Json(nullptr)));
                ge.psi_length = e.contains("length") ? extended_from_json(e.at("length")) : Extended(1.0);
                if (e.contains("polyline"))
                    for (const auto& z : e.at("polyline")) ge.polyline.push_back(complex_from_json(z));
                cg.edges.push_back(std::move(ge));
            }
            cg.finalize();
            inst.boundaries = boundary_system(cg);
            inst.critical_graph = std::move(cg);
            inst.has_sides = true;
        } else if (doc.contains("boundary_system") || doc.contains("edge_sides")) {
            const auto& sides = doc.contains("edge_sides") ? doc.at("edge_sides") : doc.at("boundary_system").at("edge_sides");
            for (const auto& s : sides) inst.boundaries.edge_sides.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
            inst.has_sides = true;
        }

        const auto& r = doc.at("reeb");
        inst.reeb.vertex_count = r.at("vertex_count").get<int>();
        int max_boundary = -1;
        for (const auto& s : inst.boundaries.edge_sides) max_boundary = std::max({max_boundary, s[0], s[1]});
        for (const auto& e : r.at("edges")) {
            ReebEdge re;
            re.id = static_cast<int>(inst.reeb.edges.size());
            const auto kind = parse_domain(e.value("kind", std::string(e.contains("head") && !e.at("head").is_null()
                                                                             ? "ring"
                                                                             : "circle")));
            if (!kind) throw bad("unknown domain kind");
            re.kind = *kind;
            re.tail = e.at("tail").get<int>();
            re.head = optional_int(e, "head");
            re.tail_boundary = optional_int(e, "tail_boundary");
            re.head_boundary = optional_int(e, "head_boundary");
            re.length = e.contains("length") ? extended_from_json(e.at("length"))
                                             : (re.is_leaf() ? Extended::infinity() : Extended(1.0));
            re.width = e.contains("width") ? extended_from_json(e.at("width")) : Extended(1.0);
            if (re.tail < 0 || re.tail >= inst.reeb.vertex_count || re.head >= inst.reeb.vertex_count)
                throw bad("Reeb edge " + std::to_string(re.id) + " has an invalid endpoint");
            max_boundary = std::max({max_boundary, re.tail_boundary, re.head_boundary});
            inst.reeb.edges.push_back(re);
        }
        inst.reeb.edge_of_boundary.assign(static_cast<std::size_t>(max_boundary + 1), -1);
        for (const auto& e : inst.reeb.edges) {
            if (e.tail_boundary >= 0) inst.reeb.edge_of_boundary[static_cast<std::size_t>(e.tail_boundary)] = e.id;
            if (e.head_boundary >= 0) inst.reeb.edge_of_boundary[static_cast<std::size_t>(e.head_boundary)] = e.id;
        }
        if (inst.has_sides)
            for (const auto& s : inst.boundaries.edge_sides)
                for (int b : s)
                    if (b < 0 || inst.reeb.edge_of_boundary[static_cast<std::size_t>(b)] < 0)
                        throw bad("boundary " + std::to_string(b) + " is not attached to a Reeb edge");
    } catch (const nlohmann::json::exception& e) {
        throw bad(std::string("malformed abstract instance: ") + e.what());
    }
    return inst;
}

}  // namespace qd
