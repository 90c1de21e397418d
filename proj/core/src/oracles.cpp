#include "cmfkit/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace cmfkit::oracles {

namespace {

/// Residual-capacity arc store; arc e and its reverse e^1 are adjacent.
struct FlowGraph {
    explicit FlowGraph(int nodes) : head(nodes, -1) {}

    void add_edge(int a, int b, double cap_ab, double cap_ba) {
        nxt.push_back(head[a]);
        to.push_back(b);
        cap.push_back(cap_ab);
        head[a] = int(cap.size()) - 1;
        nxt.push_back(head[b]);
        to.push_back(a);
        cap.push_back(cap_ba);
        head[b] = int(cap.size()) - 1;
    }

    /// Edmonds-Karp: repeated BFS augmentation along shortest paths.
    double max_flow(int s, int t) {
        double flow = 0.0;
        std::vector<int> in_arc(head.size());
        for (;;) {
            std::fill(in_arc.begin(), in_arc.end(), -1);
            in_arc[s] = -2;
            std::queue<int> bfs;
            bfs.push(s);
            while (!bfs.empty() && in_arc[t] == -1) {
                int v = bfs.front();
                bfs.pop();
                for (int e = head[v]; e != -1; e = nxt[e])
                    if (cap[e] > 0.0 && in_arc[to[e]] == -1) {
                        in_arc[to[e]] = e;
                        bfs.push(to[e]);
                    }
            }
            if (in_arc[t] == -1) return flow;
            double b = std::numeric_limits<double>::infinity();
            for (int v = t; v != s; v = to[in_arc[v] ^ 1]) b = std::min(b, cap[in_arc[v]]);
            for (int v = t; v != s; v = to[in_arc[v] ^ 1]) {
                cap[in_arc[v]] -= b;
                cap[in_arc[v] ^ 1] += b;
            }
            flow += b;
        }
    }

    /// Nodes reachable from s through positive residual capacity.
    std::vector<char> reachable(int s) const {
        std::vector<char> seen(head.size(), 0);
        seen[s] = 1;
        std::queue<int> bfs;
        bfs.push(s);
        while (!bfs.empty()) {
            int v = bfs.front();
            bfs.pop();
            for (int e = head[v]; e != -1; e = nxt[e])
                if (cap[e] > 0.0 && !seen[to[e]]) {
                    seen[to[e]] = 1;
                    bfs.push(to[e]);
                }
        }
        return seen;
    }

    std::vector<int> head, nxt, to;
    std::vector<double> cap;
};

/// Unordered neighbor pairs of the 4/6-neighborhood, each listed once.
std::vector<std::pair<int, int>> neighbor_pairs(const Grid& g) {
    std::vector<std::pair<int, int>> pairs;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const int v = int(g.index(i, j, k));
                if (i + 1 < g.nx) pairs.emplace_back(v, int(g.index(i + 1, j, k)));
                if (j + 1 < g.ny) pairs.emplace_back(v, int(g.index(i, j + 1, k)));
                if (k + 1 < g.nz) pairs.emplace_back(v, int(g.index(i, j, k + 1)));
            }
    return pairs;
}

} // namespace

MincutResult discrete_mincut(const BinarySegProblem& prob) {
    prob.validate();
    const Grid& g = prob.cs.grid();
    const int N = int(g.size());
    if (N > 4096) throw std::invalid_argument("discrete_mincut: more than 4096 voxels");

    FlowGraph graph(N + 2);
    const int s = N, t = N + 1;
    for (int v = 0; v < N; ++v) {
        graph.add_edge(s, v, prob.cs[std::size_t(v)], 0.0);
        graph.add_edge(v, t, prob.ct[std::size_t(v)], 0.0);
    }
    const auto pairs = neighbor_pairs(g);
    for (auto [a, b] : pairs) graph.add_edge(a, b, prob.alpha, prob.alpha);

    MincutResult res{ScalarField(g), graph.max_flow(s, t), 0.0};
    const auto seen = graph.reachable(s);
    for (int v = 0; v < N; ++v) res.mask[std::size_t(v)] = seen[std::size_t(v)] ? 1.0 : 0.0;

    for (int v = 0; v < N; ++v)
        res.cut_energy += res.mask[std::size_t(v)] == 1.0 ? prob.ct[std::size_t(v)]
                                                          : prob.cs[std::size_t(v)];
    for (auto [a, b] : pairs)
        if (res.mask[std::size_t(a)] != res.mask[std::size_t(b)]) res.cut_energy += prob.alpha;
    return res;
}

ExhaustiveResult exhaustive_potts(const PottsProblem& prob) {
    prob.validate();
    const Grid& g = prob.rho.front().grid();
    const int N = int(g.size());
    const int n = prob.regions();
    double combos = 1.0;
    for (int v = 0; v < N; ++v) {
        combos *= n;
        if (combos > 1e7)
            throw std::invalid_argument("exhaustive_potts: more than 1e7 labelings");
    }
    const auto pairs = neighbor_pairs(g);

    std::vector<int> lab(std::size_t(N), 0); // 0-based odometer
    ExhaustiveResult best{{}, std::numeric_limits<double>::infinity()};
    for (;;) {
        double e = 0.0;
        for (int v = 0; v < N; ++v) e += prob.rho[std::size_t(lab[std::size_t(v)])][std::size_t(v)];
        for (auto [a, b] : pairs)
            if (lab[std::size_t(a)] != lab[std::size_t(b)]) e += 2.0 * prob.alpha;
        if (e < best.energy) {
            best.energy = e;
            best.labels.assign(lab.begin(), lab.end());
            for (int& l : best.labels) ++l;
        }
        int d = N - 1;
        while (d >= 0 && lab[std::size_t(d)] == n - 1) lab[std::size_t(d--)] = 0;
        if (d < 0) break;
        ++lab[std::size_t(d)];
    }
    return best;
}

namespace {

double huber(double t, double eps) { return std::sqrt(t * t + eps * eps); }
double huber_prime(double t, double eps) { return t / huber(t, eps); }

/// Energy and gradient of the smoothed denoising objective, with its own
/// forward differences so the oracle shares nothing with the solver path.
double denoise_energy(const ScalarField& u, const ScalarField& f, double alpha,
                      Fidelity fidelity, double eps, ScalarField* grad) {
    const Grid& g = u.grid();
    if (grad) grad->fill(0.0);
    double e = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v) {
        const double d = u[v] - f[v];
        if (fidelity == Fidelity::l2) {
            e += 0.5 * d * d;
            if (grad) (*grad)[v] += d;
        } else {
            e += huber(d, eps);
            if (grad) (*grad)[v] += huber_prime(d, eps);
        }
    }
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const std::size_t v = g.index(i, j, k);
                const auto edge = [&](std::size_t w) {
                    const double d = u[w] - u[v];
                    e += alpha * huber(d, eps);
                    if (grad) {
                        const double dp = alpha * huber_prime(d, eps);
                        (*grad)[w] += dp;
                        (*grad)[v] -= dp;
                    }
                };
                if (i + 1 < g.nx) edge(g.index(i + 1, j, k));
                if (j + 1 < g.ny) edge(g.index(i, j + 1, k));
                if (k + 1 < g.nz) edge(g.index(i, j, k + 1));
            }
    return e;
}

} // namespace

ScalarField reference_denoise(const ScalarField& f, double alpha, Fidelity fidelity) {
    if (f.size() > 256) throw std::invalid_argument("reference_denoise: more than 256 voxels");
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw std::invalid_argument("reference_denoise: alpha must be finite and >= 0");
    if (!all_finite(f)) throw std::invalid_argument("reference_denoise: non-finite input");

    ScalarField u = f, g(f.grid()), g_prev(f.grid()), trial(f.grid());

    // Graduated smoothing: each stage minimizes the Huber-floored energy at its own
    // epsilon and hands its best iterate to the next, so the final 1e-9 stage starts
    // beside its optimum instead of fighting the near-kink stiffness from cold.
    int left = 500000;
    for (const double eps : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-9}) {
        double e = denoise_energy(u, f, alpha, fidelity, eps, &g);
        ScalarField best = u;
        double e_best = e;
        int stalled = 0;
        std::vector<double> recent(10, e);
        double step = 1e-3;

        for (int it = 0; left > 0; ++it, --left) {
            double gmax = 0.0;
            for (std::size_t v = 0; v < g.size(); ++v) gmax = std::max(gmax, std::abs(g[v]));
            if (gmax <= 1e-9 || stalled >= 500) break;

            if (it > 0) {
                // Barzilai-Borwein step from the last displacement/gradient pair
                double sy = 0.0, yy = 0.0;
                for (std::size_t v = 0; v < g.size(); ++v) {
                    const double y = g[v] - g_prev[v];
                    sy += -step * g_prev[v] * y;
                    yy += y * y;
                }
                if (sy > 0.0 && yy > 0.0) step = std::clamp(sy / yy, 1e-16, 1e8);
            }

            // nonmonotone line search: sufficient decrease below the recent watermark
            const double ref = *std::max_element(recent.begin(), recent.end());
            double gg = 0.0;
            for (std::size_t v = 0; v < g.size(); ++v) gg += g[v] * g[v];
            double e_trial = 0.0;
            bool accepted = false;
            for (int bt = 0; bt < 60; ++bt) {
                for (std::size_t v = 0; v < u.size(); ++v) trial[v] = u[v] - step * g[v];
                e_trial = denoise_energy(trial, f, alpha, fidelity, eps, nullptr);
                if (e_trial <= ref - 1e-4 * step * gg) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;  // descent has hit the floating-point noise floor

            std::swap(u, trial);
            std::swap(g_prev, g);
            e = denoise_energy(u, f, alpha, fidelity, eps, &g);
            recent[std::size_t(it) % recent.size()] = e;
            if (e < e_best - 1e-15 * (1.0 + std::abs(e_best))) {
                e_best = e;
                best = u;
                stalled = 0;
            } else {
                ++stalled;
            }
        }
        u = best;
    }
    return u;
}

} // namespace cmfkit::oracles
