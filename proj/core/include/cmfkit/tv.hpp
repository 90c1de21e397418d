#ifndef CMFKIT_TV_HPP
#define CMFKIT_TV_HPP

#include "cmfkit/alm.hpp"
#include "cmfkit/grid.hpp"
#include "cmfkit/solver.hpp"

namespace cmfkit {

enum class Fidelity { l2, l1 };

/// Discrete total variation of u (forward differences, Neumann boundary).
double total_variation(const ScalarField& u, TvNorm norm);

/// 1/2 |u-f|^2 (or |u-f|_1) + alpha * TV(u).
double tv_energy(const ScalarField& u, const ScalarField& f, double alpha, Fidelity fidelity,
                 TvNorm norm);

struct DenoiseResult {
    ScalarField u;
    ScalarField q;    ///< fidelity flow at exit
    VectorField p;    ///< regularizer flow at exit, |p| <= alpha
    Diagnostics diagnostics;
};

/// TV-regularized denoising via the dual model
///   max_{q,p} -<q,f> - D*(q)  s.t.  q + div p = 0, |p| <= alpha,
/// where D* is the convex conjugate of the fidelity. The recovered image is
/// the multiplier of the linear constraint.
DenoiseResult denoise(const ScalarField& f, double alpha, Fidelity fidelity,
                      const SolverConfig& cfg = {});

} // namespace cmfkit

#endif
