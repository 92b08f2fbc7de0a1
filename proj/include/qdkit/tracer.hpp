#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "qdkit/differential.hpp"

namespace qd {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

enum class AnchorKind {
    Seed,              ///< ordinary regular starting point
    FiniteCritical,    ///< zero or simple pole
    InfiniteCritical,  ///< pole of order >= 2 (finite or at infinity)
    ClosureToStart,
    BudgetExhausted,
    Recurrence,        ///< recurrence grid overflow
    EdgeCrossing,      ///< probe reached an obstacle polyline
};

std::string_view anchor_name(AnchorKind k);

struct Anchor {
    AnchorKind kind = AnchorKind::Seed;
    std::size_t point = npos;  ///< inventory index for critical anchors
    int direction = -1;        ///< critical-direction index at a finite critical point
    int obstacle = -1;         ///< obstacle id for EdgeCrossing
    std::size_t obstacle_segment = 0;
    double obstacle_fraction = 0.0;
};

enum class TrajectoryKind { Horizontal, Vertical };

struct TrajectorySegment {
    TrajectoryKind kind = TrajectoryKind::Horizontal;
    std::vector<cplx> samples;
    std::vector<double> times;  ///< canonical arclength at each sample
    cplx w_increment{};         ///< integral of sqrt(f) dz along the path
    double psi_length = 0.0;
    Anchor start;
    Anchor end;
    cplx start_branch{};        ///< sqrt(f) branch at samples.front() (or the first regular sample)
    int max_cell_crossings = 0;
};

struct RecurrenceGrid {
    int cells = 64;
    int crossing_cap = 16;
    double inflate = 3.0;
};

struct TraceBudget {
    double max_psi_length = 1e8;
    int max_steps = 200000;
    /// Closure radius around the seed; 0 selects 1e-3 x local feature scale.
    double hit_radius = 0.0;
    RecurrenceGrid grid{};
    double rel_tol = 1e-11;
    /// Cap on |dz| per step as a fraction of the local feature scale.
    double max_step_fraction = 0.05;
    /// Recurrence grid overflow factor (cap * factor) that terminates a trace early.
    int early_stop_factor = 8;
};

/// Precomputed geometry of a differential used by every trace.
class TraceField {
public:
    TraceField(RationalQD qd, CriticalInventory inventory);
    explicit TraceField(const RationalQD& qd);

    const RationalQD& qd() const { return qd_; }
    const CriticalInventory& inventory() const { return inv_; }
    double feature_scale() const { return scale_; }

    /// Distance to the nearest finite critical point or pole; feature scale if none.
    double local_scale(cplx z) const;
    double launch_offset(std::size_t point) const;   ///< delta_launch
    double landing_radius(std::size_t point) const;  ///< 10 x delta_launch
    double pole_capture_radius(std::size_t point) const;
    double infinity_capture_radius() const { return inf_radius_; }
    const std::vector<double>& directions(std::size_t point) const { return directions_[point]; }

    /// Recurrence grid geometry: lower-left corner and cell size.
    cplx grid_origin() const { return grid_origin_; }
    double grid_extent() const { return grid_extent_; }

private:
    RationalQD qd_;
    CriticalInventory inv_;
    double scale_ = 1.0;
    double inf_radius_ = 1e3;
    std::vector<double> nearest_;  ///< per point distance to the nearest other finite point
    std::vector<std::vector<double>> directions_;
    cplx grid_origin_{};
    double grid_extent_ = 1.0;
};

struct Obstacle {
    int id = -1;
    std::span<const cplx> polyline;
};

struct TraceOptions {
    bool capture_finite = true;
    bool detect_closure = true;
    std::span<const Obstacle> obstacles{};
    int ignore_obstacle_at_start = -1;
};

TrajectorySegment trace_horizontal(const TraceField& field, cplx seed, cplx direction, const TraceBudget& budget,
                                   const TraceOptions& opts = {});
TrajectorySegment trace_horizontal(const RationalQD& qd, cplx seed, cplx direction, const TraceBudget& budget = {});

/// Vertical trajectory dz/dt = i/s. Without a direction the principal branch of sqrt(f) is used.
TrajectorySegment trace_vertical(const TraceField& field, cplx seed, const TraceBudget& budget,
                                 std::optional<cplx> direction = std::nullopt, const TraceOptions& opts = {});
TrajectorySegment trace_vertical(const RationalQD& qd, cplx seed, const TraceBudget& budget = {},
                                 std::optional<cplx> direction = std::nullopt);

/// One horizontal trace per critical direction of every finite critical point,
/// ordered by (critical point index, direction angle).
std::vector<TrajectorySegment> launch_critical(const TraceField& field, const TraceBudget& budget = {});

enum class RecurrenceVerdict { Transient, Closed, RecurrentSuspect };
std::string_view verdict_name(RecurrenceVerdict v);

RecurrenceVerdict recurrence_verdict(const TrajectorySegment& segment, const TraceBudget& budget = {});

/// Integral of sqrt(f) from `from` to `to` along the straight segment, with the
/// branch continued from `branch_at_from`. Handles integrable endpoint singularities at `to`.
cplx ray_integral(const RationalQD& qd, cplx from, cplx to, cplx branch_at_from);

/// Branch of sqrt(value) nearest to `reference`.
cplx continue_branch(cplx value, cplx reference);

/// Point at canonical arclength t along a traced polyline (cubic Hermite between samples).
cplx point_at(const RationalQD& qd, const TrajectorySegment& seg, double t);

}  // namespace qd
