// qdtool: command-line front end for the quadratic-differential toolkit.
#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qdkit/error.hpp"
#include "qdkit/expression.hpp"
#include "qdkit/report.hpp"

using namespace qd;

namespace {

struct Flags {
    std::string input;
    std::string output;
    std::string config;
    std::string csv;
    std::string svg;
    std::size_t atoms = 10000;
    double branch_tol = 1e-4;
    double cycle_tol = 1e-9;
    double trace_tol = 1e-11;
    std::size_t cycle_cap = 100000;
    std::size_t max_levy = 16;
    bool no_polylines = false;
    std::string points;
    int measure_index = 0;

    std::string P, Q;
    int n = 1, n0 = 2, n1 = 12;
    int starts = 200;
    double hs_tol = 1e-12;
    double residual_tol = 1e-10;
    double localization_eps = 1e-9;
    double stable_tol = 1e-3;
    std::string support;
    std::uint64_t seed = 1;
};

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::InvalidInput, "cli", "cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidInput, "cli", "'" + path + "' is not valid JSON: " + e.what());
    }
}

// "2;0,2;-3" -> {2, 2i, -3}
std::vector<cplx> parse_points(const std::string& s) {
    std::vector<cplx> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        double re = 0, im = 0;
        char comma = 0;
        std::istringstream is(item);
        if (!(is >> re)) throw Error(Errc::InvalidInput, "cli", "bad point '" + item + "'");
        if (is >> comma && comma == ',' && !(is >> im)) throw Error(Errc::InvalidInput, "cli", "bad point '" + item + "'");
        out.emplace_back(re, im);
    }
    return out;
}

// The config document overrides flags.
void apply_config(Flags& f) {
    if (f.config.empty()) return;
    const Json c = read_json_file(f.config);
    auto set = [&](const char* key, auto& field) {
        if (c.contains(key)) field = c.at(key).get<std::decay_t<decltype(field)>>();
    };
    set("atoms", f.atoms);
    set("branch_tol", f.branch_tol);
    set("cycle_tol", f.cycle_tol);
    set("trace_tol", f.trace_tol);
    set("cycle_cap", f.cycle_cap);
    set("max_levy", f.max_levy);
    set("no_polylines", f.no_polylines);
    set("points", f.points);
    set("starts", f.starts);
    set("hs_tol", f.hs_tol);
    set("residual_tol", f.residual_tol);
    set("localization_eps", f.localization_eps);
    set("stable_tol", f.stable_tol);
    set("seed", f.seed);
}

PipelineConfig pipeline_config(const Flags& f) {
    PipelineConfig cfg;
    cfg.measure.total_atoms = f.atoms;
    cfg.branch_tol = f.branch_tol;
    cfg.gradient.rel_tol = f.cycle_tol;
    cfg.trace.rel_tol = f.trace_tol;
    cfg.cycle_cap = f.cycle_cap;
    cfg.max_levy_measures = f.max_levy;
    cfg.polylines = !f.no_polylines;
    if (!f.points.empty()) cfg.check_points = parse_points(f.points);
    return cfg;
}

HSOptions hs_options(const Flags& f) {
    HSOptions o;
    o.tolerance = f.hs_tol;
    o.residual_tol = f.residual_tol;
    o.seed = f.seed;
    return o;
}

void emit(const Flags& f, const Json& doc) {
    const std::string text = doc.dump(2) + "\n";
    if (f.output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(f.output);
    if (!out) throw Error(Errc::InvalidInput, "cli", "cannot write '" + f.output + "'");
    out << text;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::InvalidInput, "cli", "cannot write '" + path + "'");
    out << text;
}

const SignedMeasure& pick_measure(const AnalysisReport& r, int index) {
    const auto& ms = r.artifacts.measures;
    if (ms.empty()) throw Error(Errc::NotGradientOrientation, "cli", "the input has no measure to evaluate");
    if (index < 0 || static_cast<std::size_t>(index) >= ms.size())
        throw Error(Errc::InvalidInput, "cli", "measure index out of range");
    return ms[static_cast<std::size_t>(index)];
}

int run_analyze(const Flags& f, bool measures) {
    auto cfg = pipeline_config(f);
    cfg.measures = measures;
    auto r = analyze_document(read_json_file(f.input), cfg);
    if (!f.csv.empty()) {
        std::ofstream out(f.csv);
        write_segments_csv(out, r.artifacts.segments);
    }
    if (!f.svg.empty())
        write_file(f.svg, render_svg(r.artifacts, r.artifacts.measures.empty() ? nullptr : &r.artifacts.measures[0]));
    emit(f, r.doc);
    return r.exit_code;
}

int run_trace(const Flags& f) {
    const auto doc = read_json_file(f.input);
    const auto qd = parse_differential(doc.dump());
    TraceField field(qd);
    auto cfg = pipeline_config(f);
    const auto segments = launch_critical(field, cfg.trace);
    if (!f.csv.empty()) {
        std::ofstream out(f.csv);
        write_segments_csv(out, segments);
    }
    Json out = {{"input", doc}, {"inventory", to_json(field.inventory())}, {"trace", trace_summary(field, segments)}};
    const auto nc = is_nonchaotic(segments, cfg.trace);
    out["non_chaotic"] = nc.non_chaotic;
    emit(f, out);
    return nc.non_chaotic ? 0 : 2;
}

int run_measure(const Flags& f) {
    auto r = analyze_document(read_json_file(f.input), pipeline_config(f));
    if (!f.csv.empty()) {
        std::ofstream out(f.csv);
        write_atoms_csv(out, pick_measure(r, f.measure_index));
    }
    Json out = {{"input", r.doc["input"]}, {"verdicts", r.doc["verdicts"]}, {"measures", r.doc["measures"]},
                {"warnings", r.doc["warnings"]}, {"notes", r.doc["notes"]}};
    emit(f, out);
    return r.exit_code;
}

int run_verify_cauchy(const Flags& f) {
    auto cfg = pipeline_config(f);
    auto r = analyze_document(read_json_file(f.input), cfg);
    const auto& m = pick_measure(r, f.measure_index);
    const auto samples = evaluate_transforms(m, cfg.check_points, true);
    Json rows = Json::array();
    double worst = 0.0;
    for (const auto& s : samples) {
        rows.push_back({{"point", to_json(s.point)},
                        {"cauchy", to_json(s.cauchy)},
                        {"log_potential", s.log_potential},
                        {"identity_residual", s.identity_residual}});
        worst = std::max(worst, s.identity_residual);
    }
    Json out = {{"input", r.doc["input"]},
                {"measure_index", f.measure_index},
                {"samples", rows},
                {"identity", {{"max_residual", worst}, {"tolerance", 1e-6}, {"pass", worst <= 1e-6}}},
                {"notes", Json::array({"identity checked as C = u_x - i u_y for u the logarithmic potential"})}};
    if (r.artifacts.field) {
        const auto br = verify_branch_equation(m, r.artifacts.field->qd(), cfg.check_points, cfg.branch_tol);
        out["branch_residual"] = {{"max", br.max}, {"mean", br.mean}, {"tolerance", cfg.branch_tol}, {"pass", br.pass}};
    }
    emit(f, out);
    return worst <= 1e-6 ? 0 : 2;
}

HSProblem hs_problem(const Flags& f, int n) {
    if (f.P.empty() || f.Q.empty()) throw Error(Errc::InvalidInput, "cli", "--P and --Q are required");
    return {parse_polynomial_expression(f.P), parse_polynomial_expression(f.Q), n};
}

int run_hs_solve(const Flags& f) {
    const auto prob = hs_problem(f, f.n);
    const auto e = enumerate_solutions(prob, f.starts, hs_options(f));
    Json sols = Json::array();
    for (const auto& s : e.solutions) {
        Json j = to_json(s);
        j["localized"] = localization_check(s, prob, f.localization_eps);
        sols.push_back(j);
    }
    if (!f.csv.empty()) {
        std::ofstream out(f.csv);
        out << "solution,re,im\n";
        for (std::size_t i = 0; i < e.solutions.size(); ++i)
            for (cplx z : e.solutions[i].s_roots) out << i << ',' << z.real() << ',' << z.imag() << '\n';
    }
    Json out = {{"problem", {{"P", to_json(prob.P)}, {"Q", to_json(prob.Q)}, {"n", prob.n}, {"m", prob.m()}}},
                {"counts", {{"found", e.count}, {"expected", e.expected}, {"complete", e.complete}, {"starts", e.starts}}},
                {"tolerances", {{"newton", f.hs_tol}, {"residual", f.residual_tol}, {"localization", f.localization_eps}}},
                {"seed", f.seed},
                {"solutions", sols},
                {"notes", Json::array({e.note})}};
    emit(f, out);
    return e.complete ? 0 : 2;
}

int run_hs_compare(const Flags& f) {
    const auto prob = hs_problem(f, f.n0);
    const auto chain = build_chain(prob, f.n0, f.n1, f.starts, hs_options(f));
    std::vector<std::vector<cplx>> support;
    if (!f.support.empty()) support.push_back(parse_points(f.support));
    const auto rep = asymptotic_compare(chain, prob, support, f.points.empty() ? std::vector<cplx>{} : parse_points(f.points),
                                        f.stable_tol);
    Json steps = Json::array();
    for (const auto& st : rep.steps) {
        Json j = {{"n", st.n},
                  {"residual", st.solution.residual},
                  {"transform_residual", st.transform_residual},
                  {"monic_V", to_json(st.monic_V)}};
        if (st.support_distance >= 0) j["support_distance"] = st.support_distance;
        steps.push_back(j);
    }
    Json pts = Json::array();
    for (cplx z : rep.sample_points) pts.push_back(to_json(z));
    Json out = {{"problem", {{"P", to_json(prob.P)}, {"Q", to_json(prob.Q)}, {"n0", f.n0}, {"n1", f.n1}}},
                {"sample_points", pts},
                {"steps", steps},
                {"decreasing", rep.decreasing},
                {"tolerances", {{"stable", f.stable_tol}, {"residual", f.residual_tol}}},
                {"seed", f.seed}};
    emit(f, out);
    return rep.decreasing ? 0 : 2;
}

int run_emit_svg(const Flags& f) {
    auto cfg = pipeline_config(f);
    auto r = analyze_document(read_json_file(f.input), cfg);
    const auto& ms = r.artifacts.measures;
    const SignedMeasure* m = nullptr;
    if (!ms.empty()) m = &ms[std::min<std::size_t>(static_cast<std::size_t>(std::max(f.measure_index, 0)), ms.size() - 1)];
    const std::string svg = render_svg(r.artifacts, m);
    if (f.output.empty())
        std::cout << svg;
    else
        write_file(f.output, svg);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quadratic differentials: trajectories, Reeb graphs, measures, Heine-Stieltjes"};
    app.require_subcommand(1);
    Flags f;
    if (const char* s = std::getenv("QD_SEED")) f.seed = std::strtoull(s, nullptr, 10);

    auto common = [&](CLI::App* sub, bool with_input) {
        if (with_input) sub->add_option("input", f.input, "differential or abstract instance (JSON)")->required();
        sub->add_option("-o,--output", f.output, "output file (default stdout)");
        sub->add_option("--config", f.config, "JSON document overriding flags");
    };
    auto pipeline_flags = [&](CLI::App* sub) {
        sub->add_option("--atoms", f.atoms, "atoms per measure")->capture_default_str();
        sub->add_option("--branch-tol", f.branch_tol, "branch-equation tolerance")->capture_default_str();
        sub->add_option("--cycle-tol", f.cycle_tol, "relative cycle-sum tolerance")->capture_default_str();
        sub->add_option("--trace-tol", f.trace_tol, "integrator relative tolerance")->capture_default_str();
        sub->add_option("--cycle-cap", f.cycle_cap, "simple-cycle enumeration cap")->capture_default_str();
        sub->add_option("--max-levy", f.max_levy, "Levy measures listed at most")->capture_default_str();
        sub->add_option("--points", f.points, "check points, e.g. \"2;0,2;-3\"");
        sub->add_flag("--no-polylines", f.no_polylines, "omit polylines from the graph serialization");
    };
    auto hs_flags = [&](CLI::App* sub) {
        sub->add_option("--P", f.P, "P as an expression, e.g. \"z^2-1\"")->required();
        sub->add_option("--Q", f.Q, "Q as an expression")->required();
        sub->add_option("--starts", f.starts, "Newton starts per degree")->capture_default_str();
        sub->add_option("--tol", f.hs_tol, "Newton tolerance")->capture_default_str();
        sub->add_option("--residual-tol", f.residual_tol, "ODE residual tolerance")->capture_default_str();
        sub->add_option("--seed", f.seed, "random seed (QD_SEED)")->capture_default_str();
    };

    auto* analyze = app.add_subcommand("analyze", "full pipeline report");
    common(analyze, true);
    pipeline_flags(analyze);
    analyze->add_option("--csv", f.csv, "trajectory samples CSV");
    analyze->add_option("--svg", f.svg, "trajectory picture");

    auto* trace = app.add_subcommand("trace", "critical trajectories only");
    common(trace, true);
    trace->add_option("--trace-tol", f.trace_tol, "integrator relative tolerance")->capture_default_str();
    trace->add_option("--csv", f.csv, "trajectory samples CSV");

    auto* classify = app.add_subcommand("classify", "graphs and verdicts without measures");
    common(classify, true);
    pipeline_flags(classify);

    auto* measure = app.add_subcommand("measure", "measures with residual statistics");
    common(measure, true);
    pipeline_flags(measure);
    measure->add_option("--csv", f.csv, "atom CSV of the selected measure");
    measure->add_option("--index", f.measure_index, "measure index")->capture_default_str();

    auto* cauchy = app.add_subcommand("verify-cauchy", "Cauchy transform and logarithmic potential identity");
    common(cauchy, true);
    pipeline_flags(cauchy);
    cauchy->add_option("--index", f.measure_index, "measure index")->capture_default_str();

    auto* hs = app.add_subcommand("hs-solve", "Heine-Stieltjes solutions of P S'' + Q S' + V S = 0");
    common(hs, false);
    hs_flags(hs);
    hs->add_option("--n", f.n, "degree of S")->required();
    hs->add_option("--eps", f.localization_eps, "localization tolerance")->capture_default_str();
    hs->add_option("--csv", f.csv, "root cloud CSV");

    auto* cmp = app.add_subcommand("hs-compare", "root-counting measures of a chain against C^2 = V/P");
    common(cmp, false);
    hs_flags(cmp);
    cmp->add_option("--n0", f.n0, "first degree")->capture_default_str();
    cmp->add_option("--n1", f.n1, "last degree")->capture_default_str();
    cmp->add_option("--support", f.support, "support polyline, e.g. \"-1;1\"");
    cmp->add_option("--points", f.points, "sample points");
    cmp->add_option("--stable-tol", f.stable_tol, "Van Vleck stabilization tolerance")->capture_default_str();

    auto* svg = app.add_subcommand("emit-svg", "trajectory picture with measure signs");
    common(svg, true);
    pipeline_flags(svg);
    svg->add_option("--index", f.measure_index, "measure index")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        apply_config(f);
        if (*analyze) return run_analyze(f, true);
        if (*trace) return run_trace(f);
        if (*classify) return run_analyze(f, false);
        if (*measure) return run_measure(f);
        if (*cauchy) return run_verify_cauchy(f);
        if (*hs) return run_hs_solve(f);
        if (*cmp) return run_hs_compare(f);
        if (*svg) return run_emit_svg(f);
    } catch (const Error& e) {
        std::cerr << Json({{"error", error_json(e)}}).dump(2) << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << Json({{"error", {{"code", "InvalidInput"}, {"module", "cli"}, {"message", e.what()}}}}).dump(2)
                  << "\n";
        return 1;
    }
    return 1;
}
