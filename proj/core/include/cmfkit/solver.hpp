#ifndef CMFKIT_SOLVER_HPP
#define CMFKIT_SOLVER_HPP

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmfkit {

enum class TvNorm { isotropic, anisotropic };

/// Shared knobs of the augmented-Lagrangian solvers.
struct SolverConfig {
    /// Augmentation weight; also the multiplier step size.
    double c = 0.3;
    /// Gradient-ascent step for spatial flows. <= 0 selects the default
    /// 0.3 / (2 * dim * c), which sits inside the stability bound set by the
    /// discrete Laplacian spectrum (4 * dim).
    double inner_step = 0.0;
    int max_iters = 1000;
    /// Stop when the mean absolute multiplier update per voxel drops below.
    double tol = 1e-4;
    TvNorm tv_norm = TvNorm::isotropic;

    void validate() const;
    double effective_inner_step(int dim) const;
};

struct IterationRecord {
    int iter = 0;
    double primal = 0.0;
    double dual = 0.0;
    double residual_l2 = 0.0;
    double mean_update = 0.0;
};

struct Diagnostics {
    std::vector<IterationRecord> history;
    bool converged = false;
    int iterations = 0;

    /// CSV with header iter,primal,dual,residual_l2,mean_update.
    void write_csv(std::ostream& os) const;
};

/// Thrown when a solver meets a non-finite quantity; carries the iteration.
class numerical_error : public std::runtime_error {
public:
    numerical_error(const std::string& what, int iteration_);
    int iteration;
};

} // namespace cmfkit

#endif
