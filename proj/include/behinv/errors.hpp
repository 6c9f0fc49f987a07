#pragma once

#include <stdexcept>
#include <string>

namespace behinv {

// Supplied windows cannot be explained as a trajectory of the system behind
// the data (least-squares residual above the consistency tolerance).  Kept
// distinct from std::invalid_argument so callers can separate bad inputs from
// data that is merely inconsistent with the recorded behavior.
class InconsistentTrajectoryError : public std::runtime_error {
public:
    InconsistentTrajectoryError(const std::string& what, double residual, int step = -1)
        : std::runtime_error(what), residual(residual), step(step) {}

    double residual;  // offending 2-norm residual
    int step;         // time index where it occurred, -1 when not tied to a step
};

// An iterative solver ran out of its iteration budget.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double primal_residual, double dual_residual)
        : std::runtime_error(what), primal_residual(primal_residual), dual_residual(dual_residual) {}

    double primal_residual;
    double dual_residual;
};

}  // namespace behinv
