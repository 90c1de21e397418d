#ifndef CMFKIT_CMF_HPP
#define CMFKIT_CMF_HPP

#include "cmfkit/grid.hpp"
#include "cmfkit/solver.hpp"

namespace cmfkit {

/// Two-region segmentation data. cs is charged where the label is 0,
/// ct where it is 1, and alpha weights the boundary length:
///   E(u) = <1-u, cs> + <u, ct> + alpha * TV(u),  u in [0,1].
struct BinarySegProblem {
    ScalarField cs;
    ScalarField ct;
    double alpha = 0.0;

    void validate() const;
};

/// Flow variables of the max-flow dual: source flow p_s <= cs, sink flow
/// p_t <= ct and spatial flow |p| <= alpha.
struct FlowState {
    ScalarField p_s;
    ScalarField p_t;
    VectorField p;
};

struct BinarySolveResult {
    ScalarField u;
    FlowState flow;
    Diagnostics diagnostics;
};

/// Maximizes the source flow subject to the capacities and to the balance
/// div p - p_s + p_t = 0; the balance multiplier is the relaxed label u.
/// Thresholding u at any beta in (0,1) yields a global binary minimizer.
BinarySolveResult solve(const BinarySegProblem& prob, const SolverConfig& cfg = {});

/// Binary mask: 1 where u > beta, 0 otherwise (ties go to the background).
ScalarField threshold(const ScalarField& u, double beta);

double primal_energy(const ScalarField& u, const BinarySegProblem& prob, TvNorm norm);

} // namespace cmfkit

#endif
