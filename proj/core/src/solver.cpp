#include "cmfkit/solver.hpp"

#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace cmfkit {

void SolverConfig::validate() const {
    if (!(c > 0.0)) throw std::invalid_argument("SolverConfig: c must be positive");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    if (!(tol >= 0.0)) throw std::invalid_argument("SolverConfig: tol must be >= 0");
}

double SolverConfig::effective_inner_step(int dim) const {
    if (inner_step > 0.0) return inner_step;
    return 0.3 / (2.0 * dim * c);
}

void Diagnostics::write_csv(std::ostream& os) const {
    os << "iter,primal,dual,residual_l2,mean_update\n";
    char line[160];
    for (const auto& r : history) {
        std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%.12g,%.12g\n", r.iter, r.primal,
                      r.dual, r.residual_l2, r.mean_update);
        os << line;
    }
}

numerical_error::numerical_error(const std::string& what, int iteration_)
    : std::runtime_error(what), iteration(iteration_) {}

} // namespace cmfkit
