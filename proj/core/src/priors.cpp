#include "cmfkit/priors.hpp"
#include "cmfkit/alm.hpp"
#include "cmfkit/ops.hpp"
#include "cmfkit/parallel.hpp"
#include "cmfkit/tv.hpp"

#include "flow_ascent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmfkit {

VolumePriorResult solve_volume_prior(const BinarySegProblem& prob, double target_volume,
                                     double gamma, const SolverConfig& cfg) {
    prob.validate();
    cfg.validate();
    if (gamma < 0.0) throw std::invalid_argument("solve_volume_prior: gamma must be >= 0");
    const Grid& g = prob.cs.grid();
    const double c = cfg.c;
    const double step = cfg.effective_inner_step(g.dim()) * c;
    const std::size_t N = g.size();

    VolumePriorResult res{ScalarField(g), 0.0, Diagnostics{}};
    ScalarField& u = res.u;
    double& r = res.r;
    ScalarField ps(g), pt(g);
    VectorField p(g);
    for (std::size_t i = 0; i < N; ++i) {
        const double m = std::min(prob.cs[i], prob.ct[i]);
        ps[i] = m;
        pt[i] = m;
        u[i] = 0.5;
    }

    ScalarField divp(g), G(g);

    // same damped terminal-flow steps as the unconstrained solver, so gamma = 0
    // reproduces it exactly
    int iter = 0;
    double sig = 0.5;

    AlmProblem alm;
    alm.sweeps.push_back([&] {
        sig = (iter++ & 1) ? 0.9 : 0.5;
        divergence(p, divp);
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) G[i] = divp[i] - ps[i] + pt[i] - r - u[i] / c;
        });
        detail::flow_ascent(p, G, step, prob.alpha, cfg.tv_norm);
    });
    alm.sweeps.push_back([&] {
        divergence(p, divp);
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) {
                const double unc = divp[i] + pt[i] - r - u[i] / c + 1.0 / c;
                ps[i] = std::min(prob.cs[i], ps[i] + sig * (unc - ps[i]));
            }
        });
    });
    alm.sweeps.push_back([&] {
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) {
                const double unc = ps[i] - divp[i] + r + u[i] / c;
                pt[i] = std::min(prob.ct[i], pt[i] + sig * (unc - pt[i]));
            }
        });
    });
    alm.sweeps.push_back([&] {
        // the scalar volume flow maximizes r*V - (c/2)||D - r||^2 over
        // [-gamma, gamma]; aggregate closed form
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) acc += divp[i] - ps[i] + pt[i] - u[i] / c;
        const double opt = (acc + target_volume / c) / double(N);
        r = std::clamp(opt, -gamma, gamma);
    });
    alm.blocks.push_back({u.values(), g, [&](ScalarField& out) {
                              for (std::size_t i = 0; i < out.size(); ++i)
                                  out[i] = divp[i] - ps[i] + pt[i] - r;
                          }});
    alm.primal_energy = [&] {
        return primal_energy(u, prob, cfg.tv_norm) + gamma * std::abs(target_volume - sum(u));
    };
    alm.dual_energy = [&] { return sum(ps) + r * target_volume; };

    res.diagnostics = run_alm(alm, cfg);
    return res;
}

StarField star_vector_field(const Grid& g, const std::array<double, 3>& center) {
    for (int axis = 0; axis < 3; ++axis)
        if (center[axis] < 0.0 || center[axis] > double(g.extent(axis) - 1))
            throw std::invalid_argument("star_vector_field: center outside grid " + to_string(g));
    VectorField e(g);
    double* ex = e.component(0);
    double* ey = e.component(1);
    double* ez = e.dim() == 3 ? e.component(2) : nullptr;
    const long ci = std::lround(center[0]);
    const long cj = std::lround(center[1]);
    const long ck = std::lround(center[2]);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const std::size_t v = g.index(i, j, k);
                if (i == ci && j == cj && k == ck) continue; // e = 0 at the center voxel
                const double dx = i - center[0];
                const double dy = j - center[1];
                const double dz = ez ? k - center[2] : 0.0;
                const double len = std::sqrt(dx * dx + dy * dy + dz * dz);
                if (len == 0.0) continue;
                ex[v] = dx / len;
                ey[v] = dy / len;
                if (ez) ez[v] = dz / len;
            }
    return e;
}

StarPriorResult solve_star_prior(const BinarySegProblem& prob, const StarField& e,
                                 const SolverConfig& cfg) {
    prob.validate();
    cfg.validate();
    const Grid& g = prob.cs.grid();
    require_same_grid(g, e.grid(), "solve_star_prior");
    const double c = cfg.c;
    const double step = cfg.effective_inner_step(g.dim()) * c;
    const std::size_t N = g.size();

    StarPriorResult res{ScalarField(g), ScalarField(g), Diagnostics{}};
    ScalarField& u = res.u;
    ScalarField& lam = res.lambda;
    ScalarField ps(g), pt(g);
    VectorField p(g);
    for (std::size_t i = 0; i < N; ++i) {
        const double m = std::min(prob.cs[i], prob.ct[i]);
        ps[i] = m;
        pt[i] = m;
        u[i] = 0.5;
    }

    VectorField m(g);   // combined spatial flow p + lambda * e
    VectorField gH(g);  // gradient of the balance field, for the lambda step
    ScalarField divm(g), H(g);

    // damped terminal-flow steps, mirroring the unconstrained solver so a zero
    // ray field reproduces it exactly
    int iter = 0;
    double sig = 0.5;

    auto refresh_divm = [&] {
        for (int d = 0; d < m.dim(); ++d) {
            const double* pd = p.component(d);
            const double* ed = e.component(d);
            double* md = m.component(d);
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t i = a; i < b; ++i) md[i] = pd[i] + lam[i] * ed[i];
            });
        }
        divergence(m, divm);
    };

    AlmProblem alm;
    alm.sweeps.push_back([&] {
        sig = (iter++ & 1) ? 0.9 : 0.5;
        refresh_divm();
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) H[i] = divm[i] - ps[i] + pt[i] - u[i] / c;
        });
        detail::flow_ascent(p, H, step, prob.alpha, cfg.tv_norm);
    });
    alm.sweeps.push_back([&] {
        // ascent on the sign-constrained radial flow, then clamp to <= 0
        refresh_divm();
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) H[i] = divm[i] - ps[i] + pt[i] - u[i] / c;
        });
        gradient(H, gH);
        for (int d = 0; d < gH.dim(); ++d) {
            const double* gd = gH.component(d);
            const double* ed = e.component(d);
            double* target = lam.data();
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t i = a; i < b; ++i) target[i] += step * gd[i] * ed[i];
            });
        }
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) lam[i] = std::min(lam[i], 0.0);
        });
    });
    alm.sweeps.push_back([&] {
        refresh_divm();
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) {
                const double unc = divm[i] + pt[i] - u[i] / c + 1.0 / c;
                ps[i] = std::min(prob.cs[i], ps[i] + sig * (unc - ps[i]));
            }
        });
    });
    alm.sweeps.push_back([&] {
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) {
                const double unc = ps[i] - divm[i] + u[i] / c;
                pt[i] = std::min(prob.ct[i], pt[i] + sig * (unc - pt[i]));
            }
        });
    });
    alm.blocks.push_back({u.values(), g, [&](ScalarField& out) {
                              for (std::size_t i = 0; i < out.size(); ++i)
                                  out[i] = divm[i] - ps[i] + pt[i];
                          }});
    alm.primal_energy = [&] { return primal_energy(u, prob, cfg.tv_norm); };
    alm.dual_energy = [&] { return sum(ps); };

    res.diagnostics = run_alm(alm, cfg);
    return res;
}

void OrderChain::validate() const {
    if (levels() < 2) throw std::invalid_argument("OrderChain: needs at least two levels");
    if (int(alphas.size()) != levels() - 1)
        throw std::invalid_argument("OrderChain: expected one alpha per interior surface");
    for (const auto& d : costs) {
        require_same_grid(d.grid(), costs.front().grid(), "OrderChain");
        if (!all_finite(d)) throw std::invalid_argument("OrderChain: non-finite cost");
        if (min_value(d) < 0.0) throw std::invalid_argument("OrderChain: costs must be >= 0");
    }
    for (double a : alphas)
        if (a < 0.0) throw std::invalid_argument("OrderChain: alphas must be >= 0");
}

OrderResult solve_linear_order(const OrderChain& chain, const SolverConfig& cfg) {
    chain.validate();
    cfg.validate();
    const Grid& g = chain.costs.front().grid();
    const int n = chain.levels();
    const int ns = n - 1; // interior surfaces
    const double c = cfg.c;
    const double step = cfg.effective_inner_step(g.dim()) * c;
    const std::size_t N = g.size();

    OrderResult res;
    res.u.assign(ns, ScalarField(g, 0.5));
    auto& u = res.u;

    std::vector<ScalarField> f(n, ScalarField(g)); // inter-level flows, f_i <= D_i
    std::vector<VectorField> q(ns, VectorField(g));
    std::vector<ScalarField> divq(ns, ScalarField(g));
    ScalarField G(g);

    for (std::size_t v = 0; v < N; ++v) {
        double m = chain.costs[0][v];
        for (int i = 1; i < n; ++i) m = std::min(m, chain.costs[i][v]);
        for (int i = 0; i < n; ++i) f[i][v] = m;
    }

    AlmProblem alm;
    for (int s = 0; s < ns; ++s) {
        alm.sweeps.push_back([&, s] {
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v)
                    G[v] = divq[s][v] - f[s][v] + f[s + 1][v] - u[s][v] / c;
            });
            detail::flow_ascent(q[s], G, step, chain.alphas[s], cfg.tv_norm);
            divergence(q[s], divq[s]);
        });
    }
    alm.sweeps.push_back([&] {
        // chain flows top-down; the first one carries the maximized source term
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t v = a; v < b; ++v)
                f[0][v] = std::min(chain.costs[0][v],
                                   divq[0][v] + f[1][v] - u[0][v] / c + 1.0 / c);
        });
        for (int i = 1; i + 1 < n; ++i) {
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v) {
                    const double above = divq[i - 1][v] - f[i - 1][v] - u[i - 1][v] / c;
                    const double below = divq[i][v] + f[i + 1][v] - u[i][v] / c;
                    f[i][v] = std::min(chain.costs[i][v], 0.5 * (below - above));
                }
            });
        }
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t v = a; v < b; ++v) {
                const double above = divq[ns - 1][v] - f[ns - 1][v] - u[ns - 1][v] / c;
                f[n - 1][v] = std::min(chain.costs[n - 1][v], -above);
            }
        });
    });
    for (int s = 0; s < ns; ++s) {
        alm.blocks.push_back({u[s].values(), g, [&, s](ScalarField& out) {
                                  for (std::size_t v = 0; v < out.size(); ++v)
                                      out[v] = divq[s][v] - f[s][v] + f[s + 1][v];
                              }});
    }
    alm.primal_energy = [&] {
        double e = 0.0;
        for (int i = 0; i < n; ++i) {
            for (std::size_t v = 0; v < N; ++v) {
                const double hi = i == 0 ? 1.0 : u[i - 1][v];
                const double lo = i == n - 1 ? 0.0 : u[i][v];
                e += (hi - lo) * chain.costs[i][v];
            }
        }
        for (int s = 0; s < ns; ++s) e += chain.alphas[s] * total_variation(u[s], cfg.tv_norm);
        return e;
    };
    alm.dual_energy = [&] { return sum(f[0]); };

    res.diagnostics = run_alm(alm, cfg);
    return res;
}

PartialOrderResult solve_partial_order(const ScalarField& rho_m, const ScalarField& rho_b,
                                       const ScalarField& rho_s, const ScalarField& rho_B,
                                       double alpha, const SolverConfig& cfg) {
    cfg.validate();
    if (alpha < 0.0) throw std::invalid_argument("solve_partial_order: alpha must be >= 0");
    const ScalarField* rho[4] = {&rho_m, &rho_b, &rho_s, &rho_B};
    const Grid& g = rho_m.grid();
    for (const auto* rp : rho) {
        require_same_grid(rp->grid(), g, "solve_partial_order");
        if (!all_finite(*rp)) throw std::invalid_argument("solve_partial_order: non-finite cost");
        if (min_value(*rp) < 0.0)
            throw std::invalid_argument("solve_partial_order: costs must be >= 0");
    }
    const double c = cfg.c;
    const double step = cfg.effective_inner_step(g.dim()) * c;
    const std::size_t N = g.size();

    // region order: m, b, s (leaves of the composite), B, C
    std::vector<ScalarField> u(5, ScalarField(g, 0.25));
    u[4].fill(0.75);
    std::vector<VectorField> q(5, VectorField(g));
    std::vector<ScalarField> divq(5, ScalarField(g));
    std::vector<ScalarField> p(4, ScalarField(g)); // capped flows of m, b, s, B
    ScalarField pC(g), po(g), G(g);

    for (std::size_t v = 0; v < N; ++v) {
        double m = (*rho[0])[v];
        for (int i = 1; i < 4; ++i) m = std::min(m, (*rho[i])[v]);
        for (int i = 0; i < 4; ++i) p[i][v] = m;
        pC[v] = m;
        po[v] = m;
    }

    auto balance = [&](int region, std::size_t v) -> double {
        // flow-balance residual per region; leaves drain the composite flow
        if (region < 3) return divq[region][v] - pC[v] + p[region][v];
        if (region == 3) return divq[3][v] - po[v] + p[3][v];
        return divq[4][v] - po[v] + pC[v];
    };

    AlmProblem alm;
    for (int region = 0; region < 5; ++region) {
        alm.sweeps.push_back([&, region] {
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v)
                    G[v] = balance(region, v) - u[region][v] / c;
            });
            detail::flow_ascent(q[region], G, step, alpha, cfg.tv_norm);
            divergence(q[region], divq[region]);
        });
    }
    alm.sweeps.push_back([&] {
        for (int j = 0; j < 3; ++j) {
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v)
                    p[j][v] = std::min((*rho[j])[v], pC[v] + u[j][v] / c - divq[j][v]);
            });
        }
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t v = a; v < b; ++v)
                p[3][v] = std::min((*rho[3])[v], po[v] + u[3][v] / c - divq[3][v]);
        });
    });
    alm.sweeps.push_back([&] {
        // composite flow: free maximizer of the four quadratics it couples
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t v = a; v < b; ++v) {
                double leaves = 0.0;
                for (int j = 0; j < 3; ++j) leaves += divq[j][v] + p[j][v] - u[j][v] / c;
                const double composite = divq[4][v] - po[v] - u[4][v] / c;
                pC[v] = 0.25 * (leaves - composite);
            }
        });
    });
    alm.sweeps.push_back([&] {
        // source flow: uncapacitated, carries the maximized outflow bonus
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t v = a; v < b; ++v) {
                const double gB = divq[3][v] + p[3][v] - u[3][v] / c;
                const double gC = divq[4][v] + pC[v] - u[4][v] / c;
                po[v] = 0.5 * (gB + gC) + 0.5 / c;
            }
        });
    });
    for (int region = 0; region < 5; ++region) {
        alm.blocks.push_back({u[region].values(), g, [&, region](ScalarField& out) {
                                  for (std::size_t v = 0; v < out.size(); ++v)
                                      out[v] = balance(region, v);
                              }});
    }
    alm.primal_energy = [&] {
        double e = 0.0;
        for (int i = 0; i < 4; ++i) e += dot(u[i], *rho[i]);
        for (int i = 0; i < 5; ++i) e += alpha * total_variation(u[i], cfg.tv_norm);
        return e;
    };
    alm.dual_energy = [&] { return sum(po); };

    PartialOrderResult res{ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g),
                           ScalarField(g), Diagnostics{}};
    res.diagnostics = run_alm(alm, cfg);
    res.u_m = std::move(u[0]);
    res.u_b = std::move(u[1]);
    res.u_s = std::move(u[2]);
    res.u_B = std::move(u[3]);
    res.u_C = std::move(u[4]);
    return res;
}

CosegResult solve_coseg(const BinarySegProblem& prob1, const BinarySegProblem& prob2,
                        double beta, const SolverConfig& cfg) {
    prob1.validate();
    prob2.validate();
    cfg.validate();
    if (beta < 0.0) throw std::invalid_argument("solve_coseg: beta must be >= 0");
    const Grid& g = prob1.cs.grid();
    require_same_grid(g, prob2.cs.grid(), "solve_coseg");
    if (prob1.alpha != prob2.alpha)
        throw std::invalid_argument("solve_coseg: channels must share alpha");
    const double c = cfg.c;
    const double step = cfg.effective_inner_step(g.dim()) * c;
    const std::size_t N = g.size();

    const BinarySegProblem* prob[2] = {&prob1, &prob2};
    ScalarField u[2] = {ScalarField(g), ScalarField(g)};
    ScalarField ps[2] = {ScalarField(g), ScalarField(g)};
    ScalarField pt[2] = {ScalarField(g), ScalarField(g)};
    VectorField q[2] = {VectorField(g), VectorField(g)};
    ScalarField divq[2] = {ScalarField(g), ScalarField(g)};
    ScalarField r(g), G(g);

    for (int ch = 0; ch < 2; ++ch)
        for (std::size_t v = 0; v < N; ++v) {
            const double m = std::min(prob[ch]->cs[v], prob[ch]->ct[v]);
            ps[ch][v] = m;
            pt[ch][v] = m;
            u[ch][v] = 0.5;
        }

    // channel 0 carries +r in its balance, channel 1 carries -r
    const double rsign[2] = {1.0, -1.0};

    // damped terminal-flow steps, mirroring the single-channel solver so a zero
    // coupling decouples exactly
    int iter = 0;
    double sig = 0.5;

    AlmProblem alm;
    for (int ch = 0; ch < 2; ++ch) {
        alm.sweeps.push_back([&, ch] {
            if (ch == 0) sig = (iter++ & 1) ? 0.9 : 0.5;
            const double sg = rsign[ch];
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v)
                    G[v] = divq[ch][v] - ps[ch][v] + pt[ch][v] + sg * r[v] - u[ch][v] / c;
            });
            detail::flow_ascent(q[ch], G, step, prob[ch]->alpha, cfg.tv_norm);
            divergence(q[ch], divq[ch]);
        });
        alm.sweeps.push_back([&, ch] {
            const double sg = rsign[ch];
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v) {
                    const double unc =
                        divq[ch][v] + pt[ch][v] + sg * r[v] - u[ch][v] / c + 1.0 / c;
                    ps[ch][v] = std::min(prob[ch]->cs[v], ps[ch][v] + sig * (unc - ps[ch][v]));
                }
            });
        });
        alm.sweeps.push_back([&, ch] {
            const double sg = rsign[ch];
            parallel_for(N, [&](std::size_t a, std::size_t b) {
                for (std::size_t v = a; v < b; ++v) {
                    const double unc = ps[ch][v] - divq[ch][v] - sg * r[v] + u[ch][v] / c;
                    pt[ch][v] = std::min(prob[ch]->ct[v], pt[ch][v] + sig * (unc - pt[ch][v]));
                }
            });
        });
    }
    alm.sweeps.push_back([&] {
        parallel_for(N, [&](std::size_t a, std::size_t b) {
            for (std::size_t v = a; v < b; ++v) {
                const double a1 = divq[0][v] - ps[0][v] + pt[0][v] - u[0][v] / c;
                const double a2 = divq[1][v] - ps[1][v] + pt[1][v] - u[1][v] / c;
                r[v] = std::clamp(0.5 * (a2 - a1), -beta, beta);
            }
        });
    });
    for (int ch = 0; ch < 2; ++ch) {
        alm.blocks.push_back({u[ch].values(), g, [&, ch](ScalarField& out) {
                                  const double sg = rsign[ch];
                                  for (std::size_t v = 0; v < out.size(); ++v)
                                      out[v] = divq[ch][v] - ps[ch][v] + pt[ch][v] + sg * r[v];
                              }});
    }
    alm.primal_energy = [&] {
        double e = primal_energy(u[0], prob1, cfg.tv_norm) +
                   primal_energy(u[1], prob2, cfg.tv_norm);
        for (std::size_t v = 0; v < N; ++v) e += beta * std::abs(u[0][v] - u[1][v]);
        return e;
    };
    alm.dual_energy = [&] { return sum(ps[0]) + sum(ps[1]); };

    CosegResult res{ScalarField(g), ScalarField(g), Diagnostics{}};
    res.diagnostics = run_alm(alm, cfg);
    res.u1 = std::move(u[0]);
    res.u2 = std::move(u[1]);
    return res;
}

} // namespace cmfkit
