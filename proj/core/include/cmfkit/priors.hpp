#ifndef CMFKIT_PRIORS_HPP
#define CMFKIT_PRIORS_HPP

#include "cmfkit/cmf.hpp"
#include "cmfkit/grid.hpp"
#include "cmfkit/solver.hpp"

#include <array>
#include <vector>

namespace cmfkit {

struct VolumePriorResult {
    ScalarField u;
    double r = 0.0; ///< volume multiplier at exit, |r| <= gamma
    Diagnostics diagnostics;
};

/// Binary segmentation with the soft volume constraint
/// gamma * |target_volume - sum(u)| added to the energy. The constraint is
/// priced by a single scalar flow r in [-gamma, gamma] entering every
/// voxel's flow balance. gamma = 0 reproduces solve() exactly.
VolumePriorResult solve_volume_prior(const BinarySegProblem& prob, double target_volume,
                                     double gamma, const SolverConfig& cfg = {});

/// Unit radial field e(x) = (x - center) / |x - center|, zero in the voxel
/// containing the center. Segmenting with it makes the region star-shaped
/// about the center.
using StarField = VectorField;
StarField star_vector_field(const Grid& g, const std::array<double, 3>& center);

struct StarPriorResult {
    ScalarField u;
    ScalarField lambda; ///< sign-constrained flow pricing grad(u).e >= 0
    Diagnostics diagnostics;
};

/// Binary segmentation constrained to masks monotone along rays from the
/// star center: the spatial flow is p - lambda * e with lambda <= 0.
StarPriorResult solve_star_prior(const BinarySegProblem& prob, const StarField& e,
                                 const SolverConfig& cfg = {});

/// Nested-surface data: n region costs stacked inside each other and n-1
/// per-surface boundary weights.
///   E(u) = sum_i <u_{i-1} - u_i, D_i> + sum_i alpha_i TV(u_i),
///   1 = u_0 >= u_1 >= ... >= u_n = 0.
struct OrderChain {
    std::vector<ScalarField> costs;  ///< D_1..D_n
    std::vector<double> alphas;      ///< one per interior surface, n-1 entries

    int levels() const { return int(costs.size()); }
    void validate() const;
};

struct OrderResult {
    std::vector<ScalarField> u; ///< n-1 relaxed surface indicators
    Diagnostics diagnostics;
};

/// Coupled max-flow over the chain: flows f_i <= D_i between consecutive
/// levels, spatial flows |q_i| <= alpha_i, balances div q_i - f_i + f_{i+1}.
/// Thresholded outputs are nested.
OrderResult solve_linear_order(const OrderChain& chain, const SolverConfig& cfg = {});

struct PartialOrderResult {
    ScalarField u_m, u_b, u_s; ///< leaf regions inside the composite
    ScalarField u_B;           ///< background
    ScalarField u_C;           ///< composite, u_C = u_m + u_b + u_s at exit
    Diagnostics diagnostics;
};

/// Two-level partition: background vs a composite region split into three
/// leaves. Flows pass source -> {B, C} and C -> {m, b, s}; the composite
/// flow p_C is uncapacitated, each labeled region pays its cost map.
PartialOrderResult solve_partial_order(const ScalarField& rho_m, const ScalarField& rho_b,
                                       const ScalarField& rho_s, const ScalarField& rho_B,
                                       double alpha, const SolverConfig& cfg = {});

struct CosegResult {
    ScalarField u1, u2;
    Diagnostics diagnostics;
};

/// Joint segmentation of two images with the disagreement penalty
/// beta * int |u1 - u2|, priced by a coupling flow |r| <= beta that leaves
/// one channel's balance and enters the other. beta = 0 decouples exactly.
CosegResult solve_coseg(const BinarySegProblem& prob1, const BinarySegProblem& prob2,
                        double beta, const SolverConfig& cfg = {});

} // namespace cmfkit

#endif
