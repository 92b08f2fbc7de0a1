#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qd {

enum class Errc {
    InvalidInput,
    EmptyPolynomial,
    UnreducibleWithinTolerance,
    ZeroDifferential,
    RootFindingFailure,
    NotDoublePole,
    NotFiniteCritical,
    Unsupported,
    SeedAtCriticalPoint,
    StepSizeUnderflow,
    BranchContinuationFailure,
    GluingAmbiguity,
    NoFiniteCritical,
    ChaoticInput,
    ProbeInconsistency,
    TooLarge,
    InconsistentCocycle,
    IndeterminateInfinity,
    NonPlanarInput,
    NotGradientOrientation,
    InfiniteDensityEdge,
    ContourTouchesSupport,
    PointTooCloseToSupport,
    DegreeMismatch,
    NotStrebelForm,
    NoConvergence,
    RootCollision,
    BudgetExhausted,
    NonConvergingChain,
};

std::string_view errc_name(Errc code);

/// Exception carrying a machine-readable code and the module that raised it.
class Error : public std::runtime_error {
public:
    Error(Errc code, std::string module, const std::string& what)
        : std::runtime_error(what), code_(code), module_(std::move(module)) {}

    Errc code() const noexcept { return code_; }
    const std::string& module() const noexcept { return module_; }

private:
    Errc code_;
    std::string module_;
};

}  // namespace qd
