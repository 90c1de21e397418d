#include "cmfkit/registration.hpp"
#include "cmfkit/alm.hpp"
#include "cmfkit/ops.hpp"
#include "cmfkit/parallel.hpp"
#include "cmfkit/tv.hpp"

#include "flow_ascent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cmfkit {

LinearizedProblem linearize(const ScalarField& warped_moving, const ScalarField& reference) {
    require_same_grid(warped_moving.grid(), reference.grid(), "linearize");
    LinearizedProblem lin{ScalarField(warped_moving.grid()), image_gradient(warped_moving)};
    for (std::size_t i = 0; i < lin.residual.size(); ++i)
        lin.residual[i] = warped_moving[i] - reference[i];
    return lin;
}

double sad(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid(), b.grid(), "sad");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

double temporal_variation(const std::vector<DeformationField>& u) {
    double t = 0.0;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
        require_same_grid(u[k].grid(), u[k + 1].grid(), "temporal_variation");
        for (int i = 0; i < u[k].dim(); ++i) {
            const double* a = u[k].component(i);
            const double* b = u[k + 1].component(i);
            for (std::size_t v = 0; v < u[k].plane(); ++v) t += std::abs(a[v] - b[v]);
        }
    }
    return t;
}

namespace {

double weighted_volume_change(const VectorField& u, const ScalarField& weight) {
    return dot(weight, divergence(u));
}

void check_binary(const ScalarField& mask, const char* what) {
    for (double v : mask.values())
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument(std::string(what) + ": mask must be binary");
}

} // namespace

double volume_change(const DeformationField& u, const ScalarField& mask) {
    require_same_grid(u.grid(), mask.grid(), "volume_change");
    check_binary(mask, "volume_change");
    return weighted_volume_change(u, mask);
}

namespace {

/// Dual solve of one linearized registration step. When vol_grad is present
/// the flow balance gains the volume term -pi * grad(mask), |pi| <= gamma,
/// and the dual objective the running volume change dv_prev.
LevelSolveResult solve_level_impl(const LinearizedProblem& lin, const VectorField& u_prev,
                                  double alpha, const SolverConfig& cfg,
                                  const VectorField* vol_grad, double dv_prev, double gamma) {
    cfg.validate();
    if (alpha < 0.0) throw std::invalid_argument("solve_level: alpha must be >= 0");
    const Grid& g = lin.residual.grid();
    require_same_grid(g, lin.grad.grid(), "solve_level");
    require_same_grid(g, u_prev.grid(), "solve_level");
    const int dim = g.dim();
    const double c = cfg.c;
    const double step = cfg.effective_inner_step(dim) * c;
    const std::size_t N = g.size();
    const ScalarField& I0 = lin.residual;

    LevelSolveResult res{VectorField(g), ScalarField(g), 0.0, Diagnostics{}};
    VectorField& h = res.h;
    ScalarField& w = res.w;
    double& pi = res.pi;

    std::vector<VectorField> q(dim, VectorField(g));
    std::vector<ScalarField> divq(dim, ScalarField(g));
    ScalarField A(g);
    ScalarField scratch(g);

    ScalarField gsq(g); // squared intensity gradient, fixed over the solve
    for (std::size_t v = 0; v < N; ++v) {
        double acc = 0.0;
        for (int i = 0; i < dim; ++i) acc += lin.grad.component(i)[v] * lin.grad.component(i)[v];
        gsq[v] = acc;
    }
    double ssq = 0.0;
    if (vol_grad)
        for (int i = 0; i < dim; ++i)
            for (std::size_t v = 0; v < N; ++v)
                ssq += vol_grad->component(i)[v] * vol_grad->component(i)[v];

    AlmProblem alm;
    for (int i = 0; i < dim; ++i) {
        alm.sweeps.push_back([&, i] {
            const double* gi = lin.grad.component(i);
            const double* hi = h.component(i);
            const double* ui = u_prev.component(i);
            const double* si = vol_grad ? vol_grad->component(i) : nullptr;
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v) {
                    double f = w[v] * gi[v] + divq[i][v];
                    if (si) f -= pi * si[v];
                    A[v] = f - (hi[v] + ui[v]) / c;
                }
            });
            detail::flow_ascent(q[i], A, step, alpha, cfg.tv_norm);
            divergence(q[i], divq[i]);
        });
    }
    alm.sweeps.push_back([&] {
        // pointwise exact maximizer of w I0 - (c/2) sum_i (w g_i + B_i)^2
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t v = a; v < b; ++v) {
                if (gsq[v] > 0.0) {
                    double num = I0[v] / c;
                    for (int i = 0; i < dim; ++i) {
                        double bi = divq[i][v] - h.component(i)[v] / c;
                        if (vol_grad) bi -= pi * vol_grad->component(i)[v];
                        num -= lin.grad.component(i)[v] * bi;
                    }
                    w[v] = std::clamp(num / gsq[v], -1.0, 1.0);
                } else {
                    w[v] = I0[v] > 0.0 ? 1.0 : (I0[v] < 0.0 ? -1.0 : 0.0);
                }
            }
        });
    });
    if (vol_grad) {
        alm.sweeps.push_back([&] {
            if (ssq == 0.0) {
                pi = 0.0;
                return;
            }
            double acc = dv_prev / c;
            for (int i = 0; i < dim; ++i) {
                const double* gi = lin.grad.component(i);
                const double* hi = h.component(i);
                const double* si = vol_grad->component(i);
                for (std::size_t v = 0; v < N; ++v)
                    acc += (w[v] * gi[v] + divq[i][v] - hi[v] / c) * si[v];
            }
            pi = std::clamp(acc / ssq, -gamma, gamma);
        });
    }
    for (int i = 0; i < dim; ++i) {
        alm.blocks.push_back({h.component_values(i), g, [&, i](ScalarField& out) {
                                  const double* gi = lin.grad.component(i);
                                  const double* si =
                                      vol_grad ? vol_grad->component(i) : nullptr;
                                  for (std::size_t v = 0; v < out.size(); ++v) {
                                      double f = w[v] * gi[v] + divq[i][v];
                                      if (si) f -= pi * si[v];
                                      out[v] = f;
                                  }
                              }});
    }
    alm.primal_energy = [&] {
        double e = 0.0;
        for (std::size_t v = 0; v < N; ++v) {
            double d = I0[v];
            for (int i = 0; i < dim; ++i) d += lin.grad.component(i)[v] * h.component(i)[v];
            e += std::abs(d);
        }
        for (int i = 0; i < dim; ++i) {
            const double* hi = h.component(i);
            const double* ui = u_prev.component(i);
            for (std::size_t v = 0; v < N; ++v) scratch[v] = ui[v] + hi[v];
            e += alpha * total_variation(scratch, cfg.tv_norm);
        }
        if (vol_grad) {
            double dv = dv_prev;
            for (int i = 0; i < dim; ++i) {
                const double* hi = h.component(i);
                const double* si = vol_grad->component(i);
                for (std::size_t v = 0; v < N; ++v) dv -= si[v] * hi[v];
            }
            e += gamma * std::abs(dv);
        }
        return e;
    };
    alm.dual_energy = [&] {
        double e = dot(w, I0);
        for (int i = 0; i < dim; ++i) {
            const double* ui = u_prev.component(i);
            for (std::size_t v = 0; v < N; ++v) e += ui[v] * divq[i][v];
        }
        if (vol_grad) e += pi * dv_prev;
        return e;
    };

    res.diagnostics = run_alm(alm, cfg);
    return res;
}

void append_diag(Diagnostics& total, const Diagnostics& part) {
    const int base = total.iterations;
    for (IterationRecord rec : part.history) {
        rec.iter += base;
        total.history.push_back(rec);
    }
    total.iterations += part.iterations;
    total.converged = part.converged;
}

void validate_params(const RegParams& params) {
    if (params.levels < 1) throw std::invalid_argument("registration: levels must be >= 1");
    if (params.warps_per_level < 1)
        throw std::invalid_argument("registration: warps_per_level must be >= 1");
    if (params.alpha < 0.0) throw std::invalid_argument("registration: alpha must be >= 0");
    if (params.gamma < 0.0) throw std::invalid_argument("registration: gamma must be >= 0");
    params.solver.validate();
}

/// Joint [0,1] rescale so alpha is intensity-scale free.
void normalize_jointly(std::vector<ScalarField*> images) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto* img : images) {
        lo = std::min(lo, min_value(*img));
        hi = std::max(hi, max_value(*img));
    }
    const double scale = hi > lo ? 1.0 / (hi - lo) : 0.0;
    for (auto* img : images)
        for (double& v : img->values()) v = (v - lo) * scale;
}

RegistrationResult register_impl(const ScalarField& moving, const ScalarField& reference,
                                 const ScalarField* mask, const RegParams& params) {
    validate_params(params);
    require_same_grid(moving.grid(), reference.grid(), "register_pair");
    if (!all_finite(moving) || !all_finite(reference))
        throw std::invalid_argument("register_pair: non-finite intensities");
    if (mask) {
        require_same_grid(moving.grid(), mask->grid(), "register_volume_preserving");
        check_binary(*mask, "register_volume_preserving");
    }

    ScalarField mov = moving, ref = reference;
    normalize_jointly({&mov, &ref});

    Pyramid pf = build_pyramid(mov, params.levels);
    Pyramid pr = build_pyramid(ref, params.levels);
    Pyramid pm;
    if (mask) pm = build_pyramid(*mask, params.levels);

    RegistrationResult res;
    res.initial_sad = sad(mov, ref);

    VectorField u(pf.levels.front().grid());
    for (int li = 0; li < pf.level_count(); ++li) {
        const ScalarField& fl = pf.levels[li];
        const ScalarField& rl = pr.levels[li];
        if (li > 0) u = upsample_deformation(u, fl.grid());
        VectorField vol_grad;
        if (mask) vol_grad = gradient(pm.levels[li]);
        for (int wi = 0; wi < params.warps_per_level; ++wi) {
            LinearizedProblem lin = linearize(warp(fl, u), rl);
            LevelSolveResult step =
                mask ? solve_level_impl(lin, u, params.alpha, params.solver, &vol_grad,
                                        weighted_volume_change(u, pm.levels[li]), params.gamma)
                     : solve_level_impl(lin, u, params.alpha, params.solver, nullptr, 0.0, 0.0);
            for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] += step.h.data()[i];
            append_diag(res.diagnostics, step.diagnostics);
        }
    }

    res.final_sad = sad(warp(mov, u), ref);
    if (mask) res.delta_volume = weighted_volume_change(u, *mask);
    res.u = std::move(u);
    return res;
}

} // namespace

LevelSolveResult solve_level(const LinearizedProblem& lin, const VectorField& u_prev,
                             double alpha, const SolverConfig& cfg) {
    return solve_level_impl(lin, u_prev, alpha, cfg, nullptr, 0.0, 0.0);
}

RegistrationResult register_pair(const ScalarField& moving, const ScalarField& reference,
                                 const RegParams& params) {
    return register_impl(moving, reference, nullptr, params);
}

RegistrationResult register_volume_preserving(const ScalarField& moving,
                                              const ScalarField& reference,
                                              const ScalarField& mask,
                                              const RegParams& params) {
    return register_impl(moving, reference, &mask, params);
}

namespace {

/// Joint dual solve of all frame pairs at one level with the temporal
/// coupling flows r_k between neighboring pairs' balances.
struct SequenceLevelResult {
    std::vector<VectorField> h;
    Diagnostics diagnostics;
};

SequenceLevelResult solve_sequence_level(const std::vector<LinearizedProblem>& lins,
                                         const std::vector<VectorField>& u_prev, double alpha,
                                         double gamma, const SolverConfig& cfg) {
    const int n = int(lins.size());
    const Grid& g = lins.front().residual.grid();
    const int dim = g.dim();
    const double c = cfg.c;
    const double step = cfg.effective_inner_step(dim) * c;
    const std::size_t N = g.size();

    SequenceLevelResult res;
    res.h.assign(n, VectorField(g));
    auto& h = res.h;
    std::vector<ScalarField> w(n, ScalarField(g));
    std::vector<std::vector<VectorField>> q(n, std::vector<VectorField>(dim, VectorField(g)));
    std::vector<std::vector<ScalarField>> divq(n, std::vector<ScalarField>(dim, ScalarField(g)));
    std::vector<VectorField> r; // coupling flows between pair k and k+1
    if (n > 1) r.assign(n - 1, VectorField(g));
    ScalarField A(g), scratch(g);

    std::vector<ScalarField> gsq(n, ScalarField(g));
    for (int k = 0; k < n; ++k)
        for (std::size_t v = 0; v < N; ++v) {
            double acc = 0.0;
            for (int i = 0; i < dim; ++i)
                acc += lins[k].grad.component(i)[v] * lins[k].grad.component(i)[v];
            gsq[k][v] = acc;
        }

    // balance of pair k, component i, without the -(h+u_prev)/c offset
    auto balance = [&](int k, int i, std::size_t v) -> double {
        double f = w[k][v] * lins[k].grad.component(i)[v] + divq[k][i][v];
        if (k + 1 < n) f += r[k].component(i)[v];
        if (k > 0) f -= r[k - 1].component(i)[v];
        return f;
    };

    AlmProblem alm;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < dim; ++i) {
            alm.sweeps.push_back([&, k, i] {
                const double* hi = h[k].component(i);
                const double* ui = u_prev[k].component(i);
                parallel_for(N, [&](std::size_t a, std::size_t b) {
                    for (std::size_t v = a; v < b; ++v)
                        A[v] = balance(k, i, v) - (hi[v] + ui[v]) / c;
                });
                detail::flow_ascent(q[k][i], A, step, alpha, cfg.tv_norm);
                divergence(q[k][i], divq[k][i]);
            });
        }
    for (int k = 0; k < n; ++k) {
        alm.sweeps.push_back([&, k] {
            const ScalarField& I0 = lins[k].residual;
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v) {
                    if (gsq[k][v] > 0.0) {
                        double num = I0[v] / c;
                        for (int i = 0; i < dim; ++i) {
                            const double bi = balance(k, i, v) -
                                              w[k][v] * lins[k].grad.component(i)[v] -
                                              h[k].component(i)[v] / c;
                            num -= lins[k].grad.component(i)[v] * bi;
                        }
                        w[k][v] = std::clamp(num / gsq[k][v], -1.0, 1.0);
                    } else {
                        w[k][v] = I0[v] > 0.0 ? 1.0 : (I0[v] < 0.0 ? -1.0 : 0.0);
                    }
                }
            });
        });
    }
    for (int k = 0; k + 1 < n; ++k)
        for (int i = 0; i < dim; ++i) {
            alm.sweeps.push_back([&, k, i] {
                // coupling flow: exact maximizer of its two-balance quadratic
                double* rk = r[k].component(i);
                const double* ua = u_prev[k].component(i);
                const double* ub = u_prev[k + 1].component(i);
                const double* ha = h[k].component(i);
                const double* hb = h[k + 1].component(i);
                parallel_for(N, [&](std::size_t a, std::size_t b) {
                    for (std::size_t v = a; v < b; ++v) {
                        const double above = balance(k, i, v) - rk[v] - ha[v] / c;
                        const double below = balance(k + 1, i, v) + rk[v] - hb[v] / c;
                        const double delta = ua[v] - ub[v];
                        rk[v] = std::clamp(0.5 * (delta / c + below - above), -gamma, gamma);
                    }
                });
            });
        }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < dim; ++i) {
            alm.blocks.push_back({h[k].component_values(i), g, [&, k, i](ScalarField& out) {
                                      for (std::size_t v = 0; v < out.size(); ++v)
                                          out[v] = balance(k, i, v);
                                  }});
        }
    alm.primal_energy = [&] {
        double e = 0.0;
        for (int k = 0; k < n; ++k) {
            const ScalarField& I0 = lins[k].residual;
            for (std::size_t v = 0; v < N; ++v) {
                double d = I0[v];
                for (int i = 0; i < dim; ++i)
                    d += lins[k].grad.component(i)[v] * h[k].component(i)[v];
                e += std::abs(d);
            }
            for (int i = 0; i < dim; ++i) {
                const double* hi = h[k].component(i);
                const double* ui = u_prev[k].component(i);
                for (std::size_t v = 0; v < N; ++v) scratch[v] = ui[v] + hi[v];
                e += alpha * total_variation(scratch, cfg.tv_norm);
            }
        }
        for (int k = 0; k + 1 < n; ++k)
            for (int i = 0; i < dim; ++i) {
                const double* ua = u_prev[k].component(i);
                const double* ub = u_prev[k + 1].component(i);
                const double* ha = h[k].component(i);
                const double* hb = h[k + 1].component(i);
                for (std::size_t v = 0; v < N; ++v)
                    e += gamma * std::abs(ua[v] + ha[v] - ub[v] - hb[v]);
            }
        return e;
    };
    alm.dual_energy = [&] {
        double e = 0.0;
        for (int k = 0; k < n; ++k) {
            e += dot(w[k], lins[k].residual);
            for (int i = 0; i < dim; ++i) {
                const double* ui = u_prev[k].component(i);
                for (std::size_t v = 0; v < N; ++v) e += ui[v] * divq[k][i][v];
            }
        }
        for (int k = 0; k + 1 < n; ++k)
            for (int i = 0; i < dim; ++i) {
                const double* rk = r[k].component(i);
                const double* ua = u_prev[k].component(i);
                const double* ub = u_prev[k + 1].component(i);
                for (std::size_t v = 0; v < N; ++v) e += rk[v] * (ua[v] - ub[v]);
            }
        return e;
    };

    res.diagnostics = run_alm(alm, cfg);
    return res;
}

} // namespace

SequenceResult register_sequence(const std::vector<ScalarField>& frames,
                                 const RegParams& params) {
    validate_params(params);
    if (frames.size() < 2)
        throw std::invalid_argument("register_sequence: needs at least two frames");
    for (const auto& f : frames) {
        require_same_grid(f.grid(), frames.front().grid(), "register_sequence");
        if (!all_finite(f)) throw std::invalid_argument("register_sequence: non-finite frame");
    }
    const int n = int(frames.size()) - 1;

    std::vector<ScalarField> norm(frames.begin(), frames.end());
    std::vector<ScalarField*> ptrs;
    for (auto& f : norm) ptrs.push_back(&f);
    normalize_jointly(ptrs);

    std::vector<Pyramid> pyr;
    pyr.reserve(norm.size());
    for (const auto& f : norm) pyr.push_back(build_pyramid(f, params.levels));
    const int L = pyr.front().level_count();

    SequenceResult res;
    for (int k = 0; k < n; ++k) res.initial_sad.push_back(sad(norm[k], norm[k + 1]));

    std::vector<VectorField> u(n, VectorField(pyr.front().levels.front().grid()));
    for (int li = 0; li < L; ++li) {
        const Grid& gl = pyr.front().levels[li].grid();
        if (li > 0)
            for (auto& uk : u) uk = upsample_deformation(uk, gl);
        for (int wi = 0; wi < params.warps_per_level; ++wi) {
            std::vector<LinearizedProblem> lins;
            lins.reserve(n);
            for (int k = 0; k < n; ++k)
                lins.push_back(linearize(warp(pyr[k].levels[li], u[k]), pyr[k + 1].levels[li]));
            SequenceLevelResult step =
                solve_sequence_level(lins, u, params.alpha, params.gamma, params.solver);
            for (int k = 0; k < n; ++k)
                for (std::size_t i = 0; i < u[k].size(); ++i)
                    u[k].data()[i] += step.h[k].data()[i];
            append_diag(res.diagnostics, step.diagnostics);
        }
    }

    for (int k = 0; k < n; ++k) res.final_sad.push_back(sad(warp(norm[k], u[k]), norm[k + 1]));
    res.u = std::move(u);
    return res;
}

} // namespace cmfkit
