#ifndef CMFKIT_POTTS_HPP
#define CMFKIT_POTTS_HPP

#include "cmfkit/grid.hpp"
#include "cmfkit/solver.hpp"

#include <vector>

namespace cmfkit {

/// Multiphase partition data: one cost map per region plus a shared
/// boundary weight.
///   E(u) = sum_i <u_i, rho_i> + alpha * sum_i TV(u_i),
///   sum_i u_i = 1, u_i >= 0.
struct PottsProblem {
    std::vector<ScalarField> rho;
    double alpha = 0.0;

    int regions() const { return int(rho.size()); }
    void validate() const;
};

/// Relaxed region memberships, one field per region.
struct Labeling {
    std::vector<ScalarField> u;
};

struct PottsSolveResult {
    Labeling labeling;
    ScalarField p_s; ///< source flow at exit (dual energy = sum of it)
    Diagnostics diagnostics;
};

/// Potts partition through its max-flow dual: one source flow shared by all
/// regions, per-region sink flows p_i <= rho_i and spatial flows |q_i| <=
/// alpha, balances div q_i - p_s + p_i = 0 with multipliers u_i.
PottsSolveResult solve(const PottsProblem& prob, const SolverConfig& cfg = {});

/// Hard labels 1..n from a relaxed labeling; ties take the smallest index.
ScalarField argmax_label(const Labeling& labeling);

/// Energy of integer labels (values 1..n) under prob.
double potts_energy(const ScalarField& labels, const PottsProblem& prob, TvNorm norm);

} // namespace cmfkit

#endif
