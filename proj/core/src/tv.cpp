#include "cmfkit/tv.hpp"
#include "cmfkit/ops.hpp"
#include "cmfkit/parallel.hpp"
#include "cmfkit/projections.hpp"

#include <cmath>
#include <stdexcept>

namespace cmfkit {

double total_variation(const ScalarField& u, TvNorm norm) {
    VectorField g = gradient(u);
    const std::size_t n = g.plane();
    const double* gx = g.component(0);
    const double* gy = g.component(1);
    const double* gz = g.dim() == 3 ? g.component(2) : nullptr;
    double tv = 0.0;
    if (norm == TvNorm::isotropic) {
        for (std::size_t i = 0; i < n; ++i) {
            const double zz = gz ? gz[i] : 0.0;
            tv += std::sqrt(gx[i] * gx[i] + gy[i] * gy[i] + zz * zz);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            tv += std::abs(gx[i]) + std::abs(gy[i]);
            if (gz) tv += std::abs(gz[i]);
        }
    }
    return tv;
}

double tv_energy(const ScalarField& u, const ScalarField& f, double alpha, Fidelity fidelity,
                 TvNorm norm) {
    require_same_grid(u.grid(), f.grid(), "tv_energy");
    double data = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - f[i];
        data += fidelity == Fidelity::l2 ? 0.5 * d * d : std::abs(d);
    }
    return data + alpha * total_variation(u, norm);
}

namespace {

/// Spatial-flow ascent shared by all solvers: p += step * grad(G), then
/// project back onto the radius-alpha ball. G is the current flow balance
/// offset by the multiplier, and step already carries the factor c from the
/// augmented term's gradient.
void flow_ascent_step(VectorField& p, const ScalarField& G, double step, double alpha,
                      TvNorm norm) {
    const Grid& g = G.grid();
    const double* s = G.data();
    const int nx = g.nx, ny = g.ny, nz = g.nz;
    const std::size_t plane = std::size_t(nx) * ny;
    const std::size_t rows = std::size_t(ny) * nz;

    double* px = p.component(0);
    parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t b = r * nx;
            for (int i = 0; i + 1 < nx; ++i) px[b + i] += step * (s[b + i + 1] - s[b + i]);
        }
    });
    double* py = p.component(1);
    parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t b = r * nx;
            if (int(r % ny) + 1 < ny)
                for (int i = 0; i < nx; ++i) py[b + i] += step * (s[b + i + nx] - s[b + i]);
        }
    });
    if (p.dim() == 3) {
        double* pz = p.component(2);
        parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
            for (std::size_t r = r0; r < r1; ++r) {
                const std::size_t b = r * nx;
                if (int(r / ny) + 1 < nz)
                    for (int i = 0; i < nx; ++i) pz[b + i] += step * (s[b + i + plane] - s[b + i]);
            }
        });
    }
    project_ball(p, alpha, norm);
}

} // namespace

namespace detail {

void flow_ascent(VectorField& p, const ScalarField& G, double step, double alpha, TvNorm norm) {
    flow_ascent_step(p, G, step, alpha, norm);
}

} // namespace detail

DenoiseResult denoise(const ScalarField& f, double alpha, Fidelity fidelity,
                      const SolverConfig& cfg) {
    cfg.validate();
    if (alpha < 0.0) throw std::invalid_argument("denoise: alpha must be >= 0");
    if (!all_finite(f)) throw std::invalid_argument("denoise: input has non-finite values");

    const Grid& g = f.grid();
    const double c = cfg.c;
    const double step = cfg.effective_inner_step(g.dim()) * c;

    DenoiseResult res{ScalarField(f), ScalarField(g), VectorField(g), Diagnostics{}};
    ScalarField& u = res.u;
    ScalarField& q = res.q;
    VectorField& p = res.p;

    ScalarField divp(g);
    ScalarField G(g);
    int l1_iter = 0;

    AlmProblem prob;
    prob.sweeps.push_back([&] {
        divergence(p, divp);
        double* Gd = G.data();
        parallel_for(g.size(), [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) Gd[i] = q[i] + divp[i] - u[i] / c;
        });
        flow_ascent_step(p, G, step, alpha, cfg.tv_norm);
    });
    prob.sweeps.push_back([&] {
        divergence(p, divp); // p moved; refresh, the residual below reuses it
        if (fidelity == Fidelity::l2) {
            parallel_for(g.size(), [&](std::size_t a, std::size_t b) {
                for (std::size_t i = a; i < b; ++i)
                    q[i] = (u[i] - f[i] - c * divp[i]) / (1.0 + c);
            });
        } else {
            // Damped ascent instead of the exact maximizer: the exact L1 flow
            // cancels the residual at every unclamped voxel, silencing the
            // multiplier stop while the spatial flow is still ramping up. The
            // damping alternates so no steady creep of p can fake a zero
            // residual at both rates at once.
            const double sigma = (l1_iter++ & 1) ? 0.9 : 0.5;
            parallel_for(g.size(), [&](std::size_t a, std::size_t b) {
                for (std::size_t i = a; i < b; ++i) {
                    const double v =
                        (1.0 - sigma) * q[i] + sigma * ((u[i] - f[i]) / c - divp[i]);
                    q[i] = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
                }
            });
        }
    });
    prob.blocks.push_back({u.values(), g, [&](ScalarField& r) {
                               for (std::size_t i = 0; i < r.size(); ++i) r[i] = q[i] + divp[i];
                           }});
    prob.primal_energy = [&] { return tv_energy(u, f, alpha, fidelity, cfg.tv_norm); };
    prob.dual_energy = [&] {
        const double lin = -dot(q, f);
        return fidelity == Fidelity::l2 ? lin - 0.5 * sum_sq(q) : lin;
    };

    res.diagnostics = run_alm(prob, cfg);
    return res;
}

} // namespace cmfkit
