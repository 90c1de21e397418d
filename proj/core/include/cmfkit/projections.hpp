#ifndef CMFKIT_PROJECTIONS_HPP
#define CMFKIT_PROJECTIONS_HPP

#include "cmfkit/grid.hpp"
#include "cmfkit/solver.hpp"

namespace cmfkit {

/// Nearest point of [lo, hi]. Requires lo <= hi.
double project_interval(double v, double lo, double hi);

/// Projects each voxel's flow vector onto the radius-`radius` ball:
/// Euclidean ball for the isotropic norm, per-component box otherwise.
/// radius = 0 zeroes the field.
void project_ball(VectorField& p, double radius, TvNorm norm);

} // namespace cmfkit

#endif
