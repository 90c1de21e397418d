#ifndef CMFKIT_REGISTRATION_HPP
#define CMFKIT_REGISTRATION_HPP

#include "cmfkit/grid.hpp"
#include "cmfkit/solver.hpp"

#include <vector>

namespace cmfkit {

/// Displacement field: moving-image sample positions are x + u(x).
using DeformationField = VectorField;

struct RegParams {
    int levels = 3;
    int warps_per_level = 10;
    double alpha = 0.2; ///< TV weight on each displacement component
    double gamma = 0.0; ///< volume / temporal prior weight where applicable
    SolverConfig solver = {.max_iters = 200};
};

/// First-order data model at the current deformation: residual is the
/// warped moving image minus the reference, grad its intensity gradient.
struct LinearizedProblem {
    ScalarField residual;
    VectorField grad;
};

LinearizedProblem linearize(const ScalarField& warped_moving, const ScalarField& reference);

struct LevelSolveResult {
    VectorField h;   ///< displacement increment
    ScalarField w;   ///< data-term flow at exit, |w| <= 1
    double pi = 0.0; ///< volume flow at exit, |pi| <= gamma (0 when unused)
    Diagnostics diagnostics;
};

/// One linearized registration step
///   min_h int |I0 + grad I . h| + alpha sum_i TV(u_prev_i + h_i)
/// through its dual: |w| <= 1 prices the data residual, |q_i| <= alpha the
/// smoothness, with balances w d_i(I) + div q_i = 0 multiplied by h_i.
LevelSolveResult solve_level(const LinearizedProblem& lin, const VectorField& u_prev,
                             double alpha, const SolverConfig& cfg = {});

/// Aggregate volume change of the masked region under u: <mask, div u>,
/// positive where the region expands. The mask must be binary.
double volume_change(const DeformationField& u, const ScalarField& mask);

/// Sum of absolute intensity differences.
double sad(const ScalarField& a, const ScalarField& b);

/// sum_k sum_i int |u_k_i - u_{k+1}_i| over consecutive deformations.
double temporal_variation(const std::vector<DeformationField>& u);

struct RegistrationResult {
    DeformationField u;
    Diagnostics diagnostics;
    double initial_sad = 0.0;
    double final_sad = 0.0;
    double delta_volume = 0.0; ///< filled by the volume-preserving variant
};

/// Coarse-to-fine non-rigid registration of moving onto reference.
/// Intensities are jointly normalized to [0,1]; per pyramid level the data
/// term is re-linearized warps_per_level times and each convex sub-problem
/// is solved by solve_level; displacements are upsampled (values doubled)
/// between levels.
RegistrationResult register_pair(const ScalarField& moving, const ScalarField& reference,
                                 const RegParams& params = {});

/// register_pair with the soft constraint gamma * |volume_change| on the
/// masked region, priced by a scalar flow |pi| <= gamma in every balance.
/// gamma = 0 reproduces register_pair exactly.
RegistrationResult register_volume_preserving(const ScalarField& moving,
                                              const ScalarField& reference,
                                              const ScalarField& mask,
                                              const RegParams& params = {});

struct SequenceResult {
    std::vector<DeformationField> u; ///< one per consecutive frame pair
    Diagnostics diagnostics;
    std::vector<double> initial_sad;
    std::vector<double> final_sad;
};

/// Joint registration of every consecutive pair of a frame sequence with the
/// temporal penalty gamma * sum_k int |u_k - u_{k+1}|, priced by coupling
/// flows |r_k_i| <= gamma linking neighboring pairs' balances. gamma = 0
/// decouples into independent pair registrations.
SequenceResult register_sequence(const std::vector<ScalarField>& frames,
                                 const RegParams& params = {});

} // namespace cmfkit

#endif
