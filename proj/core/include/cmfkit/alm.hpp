#ifndef CMFKIT_ALM_HPP
#define CMFKIT_ALM_HPP

#include "cmfkit/grid.hpp"
#include "cmfkit/solver.hpp"

#include <functional>
#include <vector>

namespace cmfkit {

/// One linear constraint block of a dual problem: the multiplier estimating
/// the primal variable, and the flow-balance residual it penalizes. The
/// multiplier is a span so vector-field components can be blocks too.
struct AlmBlock {
    std::span<double> multiplier;
    Grid grid; ///< shape of the residual buffer
    std::function<void(ScalarField&)> residual;
};

/// Dual maximization in split form. `sweeps` runs once per iteration in
/// order; each entry advances one dual variable (a projected gradient step
/// or a pointwise closed-form maximizer) against the frozen others.
struct AlmProblem {
    std::vector<std::function<void()>> sweeps;
    std::vector<AlmBlock> blocks;
    std::function<double()> primal_energy; // optional, for diagnostics
    std::function<double()> dual_energy;   // optional, for diagnostics
};

/// Two-step augmented-Lagrangian iteration: run the dual sweeps, then step
/// every multiplier down its residual, u -= c * r. Stops when the mean
/// absolute multiplier update per voxel falls below cfg.tol. Throws
/// numerical_error if any recorded quantity turns non-finite.
Diagnostics run_alm(AlmProblem& problem, const SolverConfig& cfg);

} // namespace cmfkit

#endif
