#ifndef CMFKIT_ORACLES_HPP
#define CMFKIT_ORACLES_HPP

#include "cmfkit/cmf.hpp"
#include "cmfkit/potts.hpp"
#include "cmfkit/tv.hpp"

#include <vector>

/// Independent ground-truth computations for desk-scale verification.
/// Everything here uses the anisotropic TV interpretation, which grid cuts
/// and enumeration represent exactly, and shares no code with the solvers.
namespace cmfkit::oracles {

struct MincutResult {
    ScalarField mask;  ///< exact binary minimizer, 1 on the source side
    double flow_value; ///< max-flow value
    double cut_energy; ///< (1-u) Cs + u Ct + alpha * boundary length of mask
};

/// Exact discrete min-cut of the binary segmentation energy on the grid
/// graph (terminal capacities Cs/Ct, neighbor capacity alpha per
/// 4/6-neighborhood edge), by shortest-augmenting-path max-flow.
/// Limited to 4096 voxels.
MincutResult discrete_mincut(const BinarySegProblem& prob);

struct ExhaustiveResult {
    std::vector<int> labels; ///< 1-based, lexicographically first minimizer
    double energy;
};

/// Exact minimum of the multiphase partition energy
///   sum_i <u_i, rho_i> + alpha * sum_i TV_aniso(u_i)
/// by full enumeration; a boundary between two phases costs 2*alpha per
/// crossing neighbor pair. Requires regions^voxels <= 1e7.
ExhaustiveResult exhaustive_potts(const PottsProblem& prob);

/// High-precision reference minimizer of the denoising energy with
/// anisotropic TV smoothed by an epsilon = 1e-9 Huber floor, computed by
/// long-run Barzilai-Borwein descent (graduated through coarser floors for
/// warm starts) until the energy gradient falls below 1e-9 in sup norm or
/// progress stops. Limited to 256 voxels.
ScalarField reference_denoise(const ScalarField& f, double alpha, Fidelity fidelity);

} // namespace cmfkit::oracles

#endif
