#ifndef THERMOSCOPE_ERRORS_HPP
#define THERMOSCOPE_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace thermoscope {

// Base class for everything thrown by this library. Validation errors mean the
// input is malformed; solver errors mean a numerical procedure failed on
// well-formed input. The CLI maps the two groups to different exit codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ValidationError : Error {
    using Error::Error;
};

struct DimMismatch : ValidationError {
    using ValidationError::ValidationError;
};

struct SolverError : Error {
    using Error::Error;
};

struct RankDeficient : SolverError {
    using SolverError::SolverError;
};

// Target expectation values cannot be realized by any interior Gibbs state.
struct InfeasibleMoments : SolverError {
    InfeasibleMoments(const std::string& what, double max_residual)
        : SolverError(what), max_residual(max_residual) {}
    double max_residual = 0.0;
};

struct SolverDiverged : SolverError {
    SolverDiverged(const std::string& what, std::vector<double> residual_history)
        : SolverError(what), residual_history(std::move(residual_history)) {}
    std::vector<double> residual_history;
};

struct SingularMetric : SolverError {
    using SolverError::SolverError;
};

struct NotNested : ValidationError {
    using ValidationError::ValidationError;
};

struct AlphaUnbounded : SolverError {
    using SolverError::SolverError;
};

struct DegenerateSpread : SolverError {
    using SolverError::SolverError;
};

struct NonUniformReference : ValidationError {
    using ValidationError::ValidationError;
};

struct BisectionFailed : SolverError {
    using SolverError::SolverError;
};

// Optimizer stopped without meeting its residual tolerance; carries the best
// iterate so callers can inspect how close it got.
struct NonConvergence : SolverError {
    NonConvergence(const std::string& what, std::vector<double> best_point, double residual)
        : SolverError(what), best_point(std::move(best_point)), residual(residual) {}
    std::vector<double> best_point;
    double residual = 0.0;
};

}  // namespace thermoscope

#endif
