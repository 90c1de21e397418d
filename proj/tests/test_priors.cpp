#include <cmfkit/cmf.hpp>
#include <cmfkit/ops.hpp>
#include <cmfkit/potts.hpp>
#include <cmfkit/priors.hpp>
#include <cmfkit/tv.hpp>

#include <doctest.h>

#include "helpers.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

using namespace cmfkit;

namespace {

SolverConfig cfg_of(int iters, double tol = 1e-6) {
    SolverConfig cfg;
    cfg.max_iters = iters;
    cfg.tol = tol;
    return cfg;
}

/// Costs favoring a disk of the given radius: low sink cost inside.
BinarySegProblem disk_problem(const Grid& g, double cx, double cy, double radius,
                              double alpha) {
    BinarySegProblem prob{ScalarField(g), ScalarField(g), alpha};
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const bool inside = (i - cx) * (i - cx) + (j - cy) * (j - cy) <= radius * radius;
            prob.cs.at(i, j, 0) = inside ? 0.9 : 0.1;
            prob.ct.at(i, j, 0) = inside ? 0.1 : 0.9;
        }
    return prob;
}

} // namespace

TEST_CASE("volume prior: gamma = 0 reproduces the unconstrained solve exactly") {
    std::mt19937 rng(97);
    const Grid g(9, 8);
    BinarySegProblem prob{helpers::random_field(g, rng), helpers::random_field(g, rng), 0.3};
    const BinarySolveResult plain = solve(prob, cfg_of(400));
    const VolumePriorResult vp = solve_volume_prior(prob, 20.0, 0.0, cfg_of(400));
    CHECK(vp.r == 0.0);
    CHECK(helpers::bitwise_equal(plain.u, vp.u));
    CHECK(helpers::bitwise_equal(threshold(plain.u, 0.5), threshold(vp.u, 0.5)));
}

TEST_CASE("volume prior: huge gamma with zero target empties the mask") {
    const Grid g(8, 8);
    BinarySegProblem prob{ScalarField(g, 0.5), ScalarField(g, 0.5), 0.0};
    const VolumePriorResult res = solve_volume_prior(prob, 0.0, 1e3, cfg_of(3000, 1e-7));
    const ScalarField mask = threshold(res.u, 0.5);
    CHECK(sum(mask) == 0.0);
}

TEST_CASE("volume prior: constraining to the measured volume changes nothing") {
    const Grid g(16, 16);
    const BinarySegProblem prob = disk_problem(g, 8.0, 8.0, 4.2, 0.2);
    const SolverConfig cfg = cfg_of(3000, 1e-7);
    const ScalarField base_mask = threshold(solve(prob, cfg).u, 0.5);
    const double measured = sum(base_mask);
    CHECK(measured > 0.0);
    const VolumePriorResult res = solve_volume_prior(prob, measured, 10.0, cfg);
    CHECK(helpers::bitwise_equal(threshold(res.u, 0.5), base_mask));
    CHECK(std::abs(res.r) <= 10.0);
}

TEST_CASE("volume prior rejects negative gamma") {
    BinarySegProblem prob{ScalarField(Grid(2, 2)), ScalarField(Grid(2, 2)), 0.0};
    CHECK_THROWS_AS(solve_volume_prior(prob, 1.0, -0.5, {}), std::invalid_argument);
}

TEST_CASE("star field geometry") {
    const Grid g(11, 11);
    const StarField e = star_vector_field(g, {5.0, 5.0, 0.0});
    const std::size_t at = g.index(10, 5, 0); // O + (5, 0)
    CHECK(e.component(0)[at] == doctest::Approx(1.0));
    CHECK(e.component(1)[at] == doctest::Approx(0.0));
    const std::size_t origin = g.index(5, 5, 0);
    CHECK(e.component(0)[origin] == 0.0);
    CHECK(e.component(1)[origin] == 0.0);
    const std::size_t diag = g.index(8, 9, 0); // O + (3, 4)
    CHECK(e.component(0)[diag] == doctest::Approx(0.6));
    CHECK(e.component(1)[diag] == doctest::Approx(0.8));
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double ex = e.component(0)[i], ey = e.component(1)[i];
        CHECK(std::sqrt(ex * ex + ey * ey) <= 1.0 + 1e-9);
    }
    CHECK_THROWS_AS(star_vector_field(g, {12.0, 3.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(star_vector_field(g, {3.0, -1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("star prior: zero ray field reproduces the unconstrained solve exactly") {
    std::mt19937 rng(101);
    const Grid g(9, 7);
    BinarySegProblem prob{helpers::random_field(g, rng), helpers::random_field(g, rng), 0.25};
    const BinarySolveResult plain = solve(prob, cfg_of(300));
    const StarPriorResult star = solve_star_prior(prob, StarField(g), cfg_of(300));
    CHECK(helpers::bitwise_equal(plain.u, star.u));
    CHECK(max_value(star.lambda) <= 0.0);
}

TEST_CASE("star prior: a disk about the center is already star-shaped") {
    const Grid g(15, 15);
    const BinarySegProblem prob = disk_problem(g, 7.0, 7.0, 4.0, 0.15);
    const SolverConfig cfg = cfg_of(2500, 1e-7);
    const ScalarField base = threshold(solve(prob, cfg).u, 0.5);
    const StarPriorResult res =
        solve_star_prior(prob, star_vector_field(g, {7.0, 7.0, 0.0}), cfg);
    CHECK(helpers::bitwise_equal(threshold(res.u, 0.5), base));
}

namespace {

/// Walks 64 rays from the center; once a ray leaves the mask it must not
/// re-enter.
bool rays_monotone(const ScalarField& mask, double cx, double cy) {
    const Grid& g = mask.grid();
    for (int k = 0; k < 64; ++k) {
        const double phi = 2.0 * 3.14159265358979323846 * k / 64.0;
        bool left = false;
        for (double t = 0.0; t < g.nx + g.ny; t += 0.5) {
            const int i = int(std::lround(cx + t * std::cos(phi)));
            const int j = int(std::lround(cy + t * std::sin(phi)));
            if (i < 0 || i >= g.nx || j < 0 || j >= g.ny) break;
            const bool in = mask.at(i, j, 0) > 0.5;
            if (left && in) return false;
            if (!in) left = true;
        }
    }
    return true;
}

} // namespace

TEST_CASE("star prior: annulus costs yield a ray-monotone mask") {
    const Grid g(21, 21);
    BinarySegProblem prob{ScalarField(g), ScalarField(g), 0.1};
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double r = std::sqrt((i - 10.0) * (i - 10.0) + (j - 10.0) * (j - 10.0));
            const bool ring = r >= 4.0 && r <= 7.5;
            prob.cs.at(i, j, 0) = ring ? 0.85 : 0.15;
            prob.ct.at(i, j, 0) = ring ? 0.15 : 0.85;
        }
    const SolverConfig cfg = cfg_of(4000, 1e-7);
    // the plain solve recovers the ring: a hole at the center
    const ScalarField plain = threshold(solve(prob, cfg).u, 0.5);
    CHECK(plain.at(10, 10, 0) == 0.0);
    CHECK_FALSE(rays_monotone(plain, 10.0, 10.0));

    const StarPriorResult res =
        solve_star_prior(prob, star_vector_field(g, {10.0, 10.0, 0.0}), cfg);
    const ScalarField starred = threshold(res.u, 0.5);
    CHECK(rays_monotone(starred, 10.0, 10.0));
    CHECK(sum(starred) > 0.0);
    CHECK(max_value(res.lambda) <= 0.0);
}

TEST_CASE("linear order: two levels behave like a binary cut") {
    std::mt19937 rng(103);
    const Grid g(8, 8);
    OrderChain chain{{helpers::random_field(g, rng), helpers::random_field(g, rng)}, {0.3}};
    const OrderResult res = solve_linear_order(chain, cfg_of(2500, 1e-7));
    REQUIRE(res.u.size() == 1);
    const ScalarField mask = threshold(res.u[0], 0.5);

    BinarySegProblem bin{chain.costs[0], chain.costs[1], 0.3};
    const ScalarField bin_mask = threshold(solve(bin, cfg_of(2500, 1e-7)).u, 0.5);
    const double e_order = primal_energy(mask, bin, TvNorm::isotropic);
    const double e_bin = primal_energy(bin_mask, bin, TvNorm::isotropic);
    CHECK(e_order <= e_bin * 1.01 + 1e-12);
    CHECK(e_bin <= e_order * 1.01 + 1e-12);
}

TEST_CASE("linear order: single-voxel chain picks the cheapest nested cut") {
    const Grid g(1, 1);
    OrderChain chain{{ScalarField(g, 5.0), ScalarField(g, 1.0), ScalarField(g, 3.0)},
                     {0.0, 0.0}};
    const OrderResult res = solve_linear_order(chain, cfg_of(4000, 1e-9));
    REQUIRE(res.u.size() == 2);
    // nested configurations cost D1=5, D2=1, D3=3: the middle level wins
    CHECK(threshold(res.u[0], 0.5)[0] == 1.0);
    CHECK(threshold(res.u[1], 0.5)[0] == 0.0);
    CHECK(res.diagnostics.history.back().dual == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("linear order: ties still produce a monotone labeling") {
    const Grid g(4, 4);
    OrderChain chain{{ScalarField(g, 0.5), ScalarField(g, 0.5), ScalarField(g, 0.5)},
                     {0.0, 0.0}};
    const OrderResult res = solve_linear_order(chain, cfg_of(1500));
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(res.u[1][i] <= res.u[0][i] + 0.05);
}

TEST_CASE("linear order: thresholded surfaces nest on random problems") {
    std::mt19937 rng(107);
    for (int rep = 0; rep < 4; ++rep) {
        const Grid g(7, 6);
        OrderChain chain{{helpers::random_field(g, rng), helpers::random_field(g, rng),
                          helpers::random_field(g, rng), helpers::random_field(g, rng)},
                         {0.2, 0.2, 0.2}};
        const OrderResult res = solve_linear_order(chain, cfg_of(2500, 1e-7));
        for (std::size_t s = 0; s + 1 < res.u.size(); ++s) {
            const ScalarField outer = threshold(res.u[s], 0.5);
            const ScalarField inner = threshold(res.u[s + 1], 0.5);
            for (std::size_t i = 0; i < g.size(); ++i) {
                CHECK(inner[i] <= outer[i]);
                CHECK(res.u[s + 1][i] <= res.u[s][i] + 0.05);
            }
        }
    }
}

TEST_CASE("linear order validation") {
    OrderChain chain{{ScalarField(Grid(2, 2))}, {}};
    CHECK_THROWS_AS(solve_linear_order(chain, {}), std::invalid_argument);
    OrderChain bad{{ScalarField(Grid(2, 2)), ScalarField(Grid(2, 2))}, {0.1, 0.1}};
    CHECK_THROWS_AS(solve_linear_order(bad, {}), std::invalid_argument);
}

TEST_CASE("partial order: dominant background wins everywhere") {
    const Grid g(5, 4);
    const PartialOrderResult res =
        solve_partial_order(ScalarField(g, 1.0), ScalarField(g, 1.0), ScalarField(g, 1.0),
                            ScalarField(g, 0.0), 0.0, cfg_of(3000, 1e-7));
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(res.u_B[i] >= 0.95);
        CHECK(res.u_C[i] <= 0.05);
    }
}

TEST_CASE("partial order: region-sum identities hold at convergence") {
    std::mt19937 rng(109);
    const Grid g(6, 6);
    const PartialOrderResult res = solve_partial_order(
        helpers::random_field(g, rng), helpers::random_field(g, rng),
        helpers::random_field(g, rng), helpers::random_field(g, rng), 0.2, cfg_of(3000, 1e-7));
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::abs(res.u_C[i] + res.u_B[i] - 1.0) <= 0.05);
        CHECK(std::abs(res.u_m[i] + res.u_b[i] + res.u_s[i] - res.u_C[i]) <= 0.05);
    }
}

namespace {

/// Exact minimum of the two-level partition energy over all 4^N labelings:
/// each crossing pair costs alpha * (both leaf indicators jump) and one more
/// alpha when exactly one side is background (the composite jumps too).
double exhaustive_partial_order(const std::vector<const ScalarField*>& rho, double alpha) {
    const Grid& g = rho[0]->grid();
    const int N = int(g.size());
    std::vector<int> lab(std::size_t(N), 0);
    double best = 1e300;
    for (;;) {
        double e = 0.0;
        for (int v = 0; v < N; ++v) e += (*rho[std::size_t(lab[std::size_t(v)])])[std::size_t(v)];
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const int v = int(g.index(i, j, 0));
                for (const int w : {i + 1 < g.nx ? int(g.index(i + 1, j, 0)) : -1,
                                    j + 1 < g.ny ? int(g.index(i, j + 1, 0)) : -1}) {
                    if (w < 0) continue;
                    const int a = lab[std::size_t(v)], b = lab[std::size_t(w)];
                    if (a != b) e += alpha * (2.0 + ((a == 3) != (b == 3) ? 1.0 : 0.0));
                }
            }
        best = std::min(best, e);
        int d = N - 1;
        while (d >= 0 && lab[std::size_t(d)] == 3) lab[std::size_t(d--)] = 0;
        if (d < 0) break;
        ++lab[std::size_t(d)];
    }
    return best;
}

} // namespace

TEST_CASE("partial order: tiny instances match exhaustive enumeration") {
    std::mt19937 rng(113);
    for (int rep = 0; rep < 3; ++rep) {
        const Grid g(2, 2);
        const ScalarField rm = helpers::random_field(g, rng);
        const ScalarField rb = helpers::random_field(g, rng);
        const ScalarField rs = helpers::random_field(g, rng);
        const ScalarField rB = helpers::random_field(g, rng);
        const double alpha = 0.3;
        const PartialOrderResult res =
            solve_partial_order(rm, rb, rs, rB, alpha, cfg_of(4000, 1e-7));

        const Labeling leaves{{res.u_m, res.u_b, res.u_s, res.u_B}};
        const ScalarField labels = argmax_label(leaves);
        const std::vector<const ScalarField*> rho = {&rm, &rb, &rs, &rB};
        double energy = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            energy += (*rho[std::size_t(labels[i]) - 1])[i];
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                for (const int di : {0, 1}) {
                    const int ni = i + (di == 0), nj = j + (di == 1);
                    if (ni >= g.nx || nj >= g.ny) continue;
                    const int a = int(labels.at(i, j, 0)), b = int(labels.at(ni, nj, 0));
                    if (a != b) energy += alpha * (2.0 + ((a == 4) != (b == 4) ? 1.0 : 0.0));
                }

        const double exact = exhaustive_partial_order(rho, alpha);
        CHECK(energy <= exact * 1.01 + 1e-12);
        CHECK(energy >= exact - 1e-9);
    }
}

TEST_CASE("co-segmentation: zero coupling decouples exactly") {
    std::mt19937 rng(127);
    const Grid g(7, 7);
    BinarySegProblem p1{helpers::random_field(g, rng), helpers::random_field(g, rng), 0.25};
    BinarySegProblem p2{helpers::random_field(g, rng), helpers::random_field(g, rng), 0.25};
    // tol = 0 never fires, so joint and solo runs all take exactly 500 iterations;
    // the joint stop would otherwise pool both channels' updates and cut one short
    const SolverConfig cfg = cfg_of(500, 0.0);
    const CosegResult joint = solve_coseg(p1, p2, 0.0, cfg);
    const BinarySolveResult solo1 = solve(p1, cfg);
    const BinarySolveResult solo2 = solve(p2, cfg);
    CHECK(helpers::bitwise_equal(threshold(joint.u1, 0.5), threshold(solo1.u, 0.5)));
    CHECK(helpers::bitwise_equal(threshold(joint.u2, 0.5), threshold(solo2.u, 0.5)));
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(joint.u1[i] == solo1.u[i]);
        CHECK(joint.u2[i] == solo2.u[i]);
    }
}

TEST_CASE("co-segmentation: identical channels agree for any coupling") {
    std::mt19937 rng(131);
    const Grid g(8, 6);
    BinarySegProblem p{helpers::random_field(g, rng), helpers::random_field(g, rng), 0.2};
    const CosegResult res = solve_coseg(p, p, 0.7, cfg_of(3000, 1e-7));
    CHECK(helpers::max_abs_diff(res.u1, res.u2) <= 1e-3);
}

TEST_CASE("co-segmentation: strong coupling behaves like summed costs") {
    std::mt19937 rng(137);
    const Grid g(8, 8);
    BinarySegProblem p1{helpers::random_field(g, rng), helpers::random_field(g, rng), 0.2};
    BinarySegProblem p2{helpers::random_field(g, rng), helpers::random_field(g, rng), 0.2};
    const SolverConfig cfg = cfg_of(4000, 1e-7);
    const CosegResult res = solve_coseg(p1, p2, 1e3, cfg);
    const ScalarField m1 = threshold(res.u1, 0.5);
    const ScalarField m2 = threshold(res.u2, 0.5);

    BinarySegProblem summed{ScalarField(g), ScalarField(g), 0.4};
    for (std::size_t i = 0; i < g.size(); ++i) {
        summed.cs[i] = p1.cs[i] + p2.cs[i];
        summed.ct[i] = p1.ct[i] + p2.ct[i];
    }
    const ScalarField ms = threshold(solve(summed, cfg).u, 0.5);
    const double e1 = primal_energy(m1, summed, TvNorm::isotropic);
    const double e2 = primal_energy(m2, summed, TvNorm::isotropic);
    const double es = primal_energy(ms, summed, TvNorm::isotropic);
    CHECK(e1 <= es * 1.01 + 1e-12);
    CHECK(e2 <= es * 1.01 + 1e-12);
    CHECK(es <= e1 * 1.01 + 1e-12);
    CHECK(es <= e2 * 1.01 + 1e-12);
}

TEST_CASE("co-segmentation validation") {
    BinarySegProblem p1{ScalarField(Grid(3, 3)), ScalarField(Grid(3, 3)), 0.1};
    BinarySegProblem p2{ScalarField(Grid(4, 3)), ScalarField(Grid(4, 3)), 0.1};
    CHECK_THROWS_AS(solve_coseg(p1, p2, 0.1, {}), std::invalid_argument);
    CHECK_THROWS_AS(solve_coseg(p1, p1, -0.1, {}), std::invalid_argument);
}
