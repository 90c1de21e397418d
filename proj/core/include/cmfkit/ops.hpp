#ifndef CMFKIT_OPS_HPP
#define CMFKIT_OPS_HPP

#include "cmfkit/grid.hpp"

#include <vector>

namespace cmfkit {

/// Forward-difference gradient with Neumann boundary: the difference across
/// the far face of each axis is zero. Axes of extent 1 yield zero components.
void gradient(const ScalarField& u, VectorField& out);
VectorField gradient(const ScalarField& u);

/// Exact negative adjoint of gradient() under the plain grid inner product:
/// <gradient(u), p> == -<u, divergence(p)> to machine precision.
void divergence(const VectorField& p, ScalarField& out);
ScalarField divergence(const VectorField& p);

/// Centered differences in the interior, one-sided at the boundary faces.
/// Intended for image intensities (warping, registration linearization).
/// Axes of extent 1 yield zero components; throws if every extent is 1.
void image_gradient(const ScalarField& img, VectorField& out);
VectorField image_gradient(const ScalarField& img);

/// Samples img at x + u(x) with multilinear interpolation; sample positions
/// are clamped to the grid, so out-of-domain reads take the boundary value.
/// u must have img's grid. u == 0 reproduces img bit-exactly.
void warp(const ScalarField& img, const VectorField& u, ScalarField& out);
ScalarField warp(const ScalarField& img, const VectorField& u);

/// Coarse-to-fine image stack. levels[0] is the coarsest, levels.back() the
/// original image (bit-exact copy).
struct Pyramid {
    std::vector<ScalarField> levels;
    int level_count() const { return int(levels.size()); }
};

/// Builds up to `levels` levels by binomial (1/4, 1/2, 1/4) smoothing and
/// decimation by two per axis; coarser extents are ceil(n/2). Stops early
/// rather than letting any non-singleton axis drop below 4 voxels, so the
/// returned pyramid may hold fewer levels than requested.
Pyramid build_pyramid(const ScalarField& img, int levels);

/// Transfers a displacement field from a coarse pyramid level to the next
/// finer one: multilinear interpolation onto the fine grid, displacement
/// values scaled by 2. Extents must satisfy coarse == ceil(fine/2) per axis.
VectorField upsample_deformation(const VectorField& u, const Grid& fine);

} // namespace cmfkit

#endif
