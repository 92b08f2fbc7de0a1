#pragma once

#include <memory>
#include <string>

#include "qdkit/serialize.hpp"

namespace qd {

struct PipelineConfig {
    TraceBudget trace{};
    GradientOptions gradient{};
    MeasureOptions measure{};
    double branch_tol = 1e-4;
    std::vector<cplx> check_points{cplx(2.0), cplx(0.0, 2.0), cplx(-3.0)};
    bool measures = true;
    bool polylines = true;
    std::size_t max_levy_measures = 16;
    std::size_t cycle_cap = 100000;
};

/// Intermediate objects of one run, kept for plotting and tests.
struct PipelineArtifacts {
    std::unique_ptr<TraceField> field;  ///< null for abstract instances
    std::vector<TrajectorySegment> segments;
    CriticalGraph cg;
    BoundarySystem bs;
    ReebGraph reeb;
    bool has_sides = false;
    std::vector<SignedMeasure> measures;
    std::vector<Orientation> measure_orientations;
};

struct AnalysisReport {
    Json doc;
    int exit_code = 0;  ///< 0 clean, 2 classification with warnings
    PipelineArtifacts artifacts;
};

AnalysisReport analyze_differential(const RationalQD& qd, const Json& input_echo, const PipelineConfig& cfg = {});
AnalysisReport analyze_abstract(const AbstractInstance& inst, const Json& input_echo, const PipelineConfig& cfg = {});

/// Dispatches on the document shape (differential or abstract instance).
AnalysisReport analyze_document(const Json& doc, const PipelineConfig& cfg = {});

/// Trace summary of the critical trajectories, with optional CSV rows (segment_id, t, re, im).
Json trace_summary(const TraceField& field, const std::vector<TrajectorySegment>& segments);
void write_segments_csv(std::ostream& os, const std::vector<TrajectorySegment>& segments);

/// Solid strokes for positive-density critical edges, dashed for negative ones; poles and zeros as glyphs.
std::string render_svg(const PipelineArtifacts& art, const SignedMeasure* measure = nullptr);

/// Error as a report block with module provenance.
Json error_json(const Error& e);

}  // namespace qd
