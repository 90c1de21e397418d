#include "cmfkit/potts.hpp"
#include "cmfkit/alm.hpp"
#include "cmfkit/ops.hpp"
#include "cmfkit/parallel.hpp"
#include "cmfkit/tv.hpp"

#include "flow_ascent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmfkit {

void PottsProblem::validate() const {
    if (rho.empty()) throw std::invalid_argument("PottsProblem: no regions");
    for (const auto& r : rho) {
        require_same_grid(r.grid(), rho.front().grid(), "PottsProblem");
        if (!all_finite(r)) throw std::invalid_argument("PottsProblem: non-finite cost");
        if (min_value(r) < 0.0) throw std::invalid_argument("PottsProblem: costs must be >= 0");
    }
    if (alpha < 0.0) throw std::invalid_argument("PottsProblem: alpha must be >= 0");
}

PottsSolveResult solve(const PottsProblem& prob, const SolverConfig& cfg) {
    prob.validate();
    cfg.validate();
    const Grid& g = prob.rho.front().grid();
    const int n = prob.regions();
    const double c = cfg.c;
    const double step = cfg.effective_inner_step(g.dim()) * c;
    const std::size_t N = g.size();

    PottsSolveResult res;
    res.labeling.u.assign(n, ScalarField(g, 1.0 / n));
    res.p_s = ScalarField(g);
    auto& u = res.labeling.u;
    ScalarField& ps = res.p_s;

    std::vector<ScalarField> pi(n, ScalarField(g));
    std::vector<VectorField> q(n, VectorField(g));
    std::vector<ScalarField> divq(n, ScalarField(g));
    ScalarField G(g);

    // feasible warm start: saturate the cheapest region everywhere
    for (std::size_t v = 0; v < N; ++v) {
        double m = prob.rho[0][v];
        for (int i = 1; i < n; ++i) m = std::min(m, prob.rho[i][v]);
        ps[v] = m;
        for (int i = 0; i < n; ++i) pi[i][v] = m;
    }

    AlmProblem alm;
    for (int i = 0; i < n; ++i) {
        alm.sweeps.push_back([&, i] {
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v)
                    G[v] = divq[i][v] - ps[v] + pi[i][v] - u[i][v] / c;
            });
            detail::flow_ascent(q[i], G, step, prob.alpha, cfg.tv_norm);
            divergence(q[i], divq[i]);
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v)
                    pi[i][v] = std::min(prob.rho[i][v], ps[v] + u[i][v] / c - divq[i][v]);
            });
        });
    }
    alm.sweeps.push_back([&] {
        // unconstrained source flow: average of the per-region balances plus
        // the 1/(c n) bonus from maximizing the total source outflow
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t v = a; v < b; ++v) {
                double acc = 0.0;
                for (int i = 0; i < n; ++i) acc += divq[i][v] + pi[i][v] - u[i][v] / c;
                ps[v] = acc / n + 1.0 / (c * n);
            }
        });
    });
    for (int i = 0; i < n; ++i) {
        alm.blocks.push_back({u[i].values(), g, [&, i](ScalarField& r) {
                                  for (std::size_t v = 0; v < r.size(); ++v)
                                      r[v] = divq[i][v] - ps[v] + pi[i][v];
                              }});
    }
    alm.primal_energy = [&] {
        double e = 0.0;
        for (int i = 0; i < n; ++i)
            e += dot(u[i], prob.rho[i]) + prob.alpha * total_variation(u[i], cfg.tv_norm);
        return e;
    };
    alm.dual_energy = [&] { return sum(ps); };

    res.diagnostics = run_alm(alm, cfg);
    return res;
}

ScalarField argmax_label(const Labeling& labeling) {
    if (labeling.u.empty()) throw std::invalid_argument("argmax_label: empty labeling");
    const Grid& g = labeling.u.front().grid();
    ScalarField out(g);
    for (std::size_t v = 0; v < g.size(); ++v) {
        int best = 0;
        double bv = labeling.u[0][v];
        for (int i = 1; i < int(labeling.u.size()); ++i)
            if (labeling.u[i][v] > bv) {
                bv = labeling.u[i][v];
                best = i;
            }
        out[v] = double(best + 1);
    }
    return out;
}

double potts_energy(const ScalarField& labels, const PottsProblem& prob, TvNorm norm) {
    const Grid& g = prob.rho.front().grid();
    require_same_grid(labels.grid(), g, "potts_energy");
    const int n = prob.regions();
    for (std::size_t v = 0; v < labels.size(); ++v) {
        const double l = labels[v];
        if (l != std::floor(l) || l < 1.0 || l > double(n))
            throw std::invalid_argument("potts_energy: labels must be integers in 1..n");
    }
    double e = 0.0;
    ScalarField indicator(g);
    for (int i = 0; i < n; ++i) {
        for (std::size_t v = 0; v < labels.size(); ++v)
            indicator[v] = labels[v] == double(i + 1) ? 1.0 : 0.0;
        e += dot(indicator, prob.rho[i]) + prob.alpha * total_variation(indicator, norm);
    }
    return e;
}

} // namespace cmfkit
