#include "cmfkit/alm.hpp"
#include "cmfkit/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace cmfkit {

Diagnostics run_alm(AlmProblem& problem, const SolverConfig& cfg) {
    cfg.validate();
    if (problem.blocks.empty()) throw std::invalid_argument("run_alm: no constraint blocks");

    std::vector<ScalarField> buffers;
    std::size_t total_voxels = 0;
    for (const auto& b : problem.blocks) {
        if (b.multiplier.size() != b.grid.size() || !b.residual)
            throw std::invalid_argument("run_alm: incomplete constraint block");
        buffers.emplace_back(b.grid);
        total_voxels += b.multiplier.size();
    }

    Diagnostics diag;
    diag.history.reserve(std::min(cfg.max_iters, 65536));
    const double c = cfg.c;

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        for (auto& sweep : problem.sweeps) sweep();

        double update_l1 = 0.0;
        double residual_sq = 0.0;
        for (std::size_t bi = 0; bi < problem.blocks.size(); ++bi) {
            ScalarField& r = buffers[bi];
            problem.blocks[bi].residual(r);
            double* u = problem.blocks[bi].multiplier.data();
            const double* rd = r.data();
            parallel_for(r.size(), [&](std::size_t a, std::size_t b) {
                for (std::size_t i = a; i < b; ++i) u[i] -= c * rd[i];
            });
            update_l1 += c * sum_abs(r);
            residual_sq += sum_sq(r);
        }

        IterationRecord rec;
        rec.iter = iter;
        rec.primal = problem.primal_energy ? problem.primal_energy() : 0.0;
        rec.dual = problem.dual_energy ? problem.dual_energy() : 0.0;
        rec.residual_l2 = std::sqrt(residual_sq);
        rec.mean_update = update_l1 / double(total_voxels);
        diag.history.push_back(rec);
        diag.iterations = iter;

        if (!std::isfinite(rec.mean_update) || !std::isfinite(rec.primal) ||
            !std::isfinite(rec.dual))
            throw numerical_error("run_alm: non-finite value at iteration " +
                                      std::to_string(iter),
                                  iter);

        if (rec.mean_update < cfg.tol) {
            diag.converged = true;
            break;
        }
    }
    return diag;
}

} // namespace cmfkit
