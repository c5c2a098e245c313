#pragma once

#include <stdexcept>
#include <string>

namespace sparselqr {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// matrix kernels
struct NotHurwitzError : SolverError {
    using SolverError::SolverError;
};
struct IllConditionedError : SolverError {
    using SolverError::SolverError;
};
struct NotStabilizableError : SolverError {
    using SolverError::SolverError;
};
struct NumericalFailureError : SolverError {
    using SolverError::SolverError;
};
struct EigenFailureError : SolverError {
    using SolverError::SolverError;
};

// objective evaluation
struct UnstableClosedLoopError : SolverError {
    using SolverError::SolverError;
};

// solvers
struct NoStabilizingInitError : SolverError {
    using SolverError::SolverError;
};
struct NoStabilizingIterateError : SolverError {
    using SolverError::SolverError;
};
struct NotDescentError : SolverError {
    using SolverError::SolverError;
};
struct LineSearchFailedError : SolverError {
    using SolverError::SolverError;
};

// construction / configuration
struct InvalidParamsError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct MissingSolverDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sparselqr
