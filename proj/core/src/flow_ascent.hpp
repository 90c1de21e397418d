#ifndef CMFKIT_SRC_FLOW_ASCENT_HPP
#define CMFKIT_SRC_FLOW_ASCENT_HPP

#include "cmfkit/grid.hpp"
#include "cmfkit/solver.hpp"

namespace cmfkit::detail {

/// One projected gradient-ascent step of a spatial flow against the current
/// flow-balance field G: p += step * grad(G); |p| <= alpha afterwards.
void flow_ascent(VectorField& p, const ScalarField& G, double step, double alpha, TvNorm norm);

} // namespace cmfkit::detail

#endif
