#include "cmfkit/cmf.hpp"
#include "cmfkit/alm.hpp"
#include "cmfkit/ops.hpp"
#include "cmfkit/parallel.hpp"
#include "cmfkit/tv.hpp"

#include "flow_ascent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmfkit {

void BinarySegProblem::validate() const {
    require_same_grid(cs.grid(), ct.grid(), "BinarySegProblem");
    if (alpha < 0.0) throw std::invalid_argument("BinarySegProblem: alpha must be >= 0");
    if (!all_finite(cs) || !all_finite(ct))
        throw std::invalid_argument("BinarySegProblem: non-finite capacity");
    if (min_value(cs) < 0.0 || min_value(ct) < 0.0)
        throw std::invalid_argument("BinarySegProblem: capacities must be >= 0");
}

BinarySolveResult solve(const BinarySegProblem& prob, const SolverConfig& cfg) {
    prob.validate();
    cfg.validate();
    const Grid& g = prob.cs.grid();
    const double c = cfg.c;
    const double step = cfg.effective_inner_step(g.dim()) * c;

    BinarySolveResult res{ScalarField(g), {ScalarField(g), ScalarField(g), VectorField(g)},
                          Diagnostics{}};
    ScalarField& u = res.u;
    ScalarField& ps = res.flow.p_s;
    ScalarField& pt = res.flow.p_t;
    VectorField& p = res.flow.p;

    // start from the saturated terminal flows and a neutral half label
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double m = std::min(prob.cs[i], prob.ct[i]);
        ps[i] = m;
        pt[i] = m;
        u[i] = 0.5;
    }

    ScalarField divp(g);
    ScalarField G(g);

    // Terminal flows take damped ascent steps toward their pointwise maximizers:
    // the exact values zero the residual wherever a clamp is inactive (snapping u
    // onto {0,1} and silencing the stop), and the damping alternates so no steady
    // spatial-flow creep can fake a zero residual at both rates at once.
    int iter = 0;
    double sig = 0.5;

    AlmProblem alm;
    alm.sweeps.push_back([&] {
        sig = (iter++ & 1) ? 0.9 : 0.5;
        divergence(p, divp);
        parallel_for(g.size(), [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) G[i] = divp[i] - ps[i] + pt[i] - u[i] / c;
        });
        detail::flow_ascent(p, G, step, prob.alpha, cfg.tv_norm);
    });
    alm.sweeps.push_back([&] {
        divergence(p, divp); // the remaining sweeps and the residual reuse divp
        parallel_for(g.size(), [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) {
                const double unc = divp[i] + pt[i] - u[i] / c + 1.0 / c;
                ps[i] = std::min(prob.cs[i], ps[i] + sig * (unc - ps[i]));
            }
        });
    });
    alm.sweeps.push_back([&] {
        parallel_for(g.size(), [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) {
                const double unc = ps[i] - divp[i] + u[i] / c;
                pt[i] = std::min(prob.ct[i], pt[i] + sig * (unc - pt[i]));
            }
        });
    });
    alm.blocks.push_back({u.values(), g, [&](ScalarField& r) {
                              for (std::size_t i = 0; i < r.size(); ++i)
                                  r[i] = divp[i] - ps[i] + pt[i];
                          }});
    alm.primal_energy = [&] { return primal_energy(u, prob, cfg.tv_norm); };
    alm.dual_energy = [&] { return sum(ps); };

    res.diagnostics = run_alm(alm, cfg);
    return res;
}

ScalarField threshold(const ScalarField& u, double beta) {
    if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("threshold: beta must lie in (0,1)");
    ScalarField out(u.grid());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] > beta ? 1.0 : 0.0;
    return out;
}

double primal_energy(const ScalarField& u, const BinarySegProblem& prob, TvNorm norm) {
    require_same_grid(u.grid(), prob.cs.grid(), "primal_energy");
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        e += (1.0 - u[i]) * prob.cs[i] + u[i] * prob.ct[i];
    return e + prob.alpha * total_variation(u, norm);
}

} // namespace cmfkit
