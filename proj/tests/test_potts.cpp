#include <cmfkit/cmf.hpp>
#include <cmfkit/oracles.hpp>
#include <cmfkit/potts.hpp>

#include <doctest.h>

#include "helpers.hpp"

#include <random>
#include <stdexcept>

using namespace cmfkit;

namespace {

SolverConfig aniso(int iters = 3000, double tol = 1e-6) {
    SolverConfig cfg;
    cfg.max_iters = iters;
    cfg.tol = tol;
    cfg.tv_norm = TvNorm::anisotropic;
    return cfg;
}

} // namespace

TEST_CASE("one region fills the simplex") {
    PottsProblem prob{{ScalarField(Grid(4, 3), 0.7)}, 0.2};
    const PottsSolveResult res = solve(prob, aniso());
    for (std::size_t i = 0; i < res.labeling.u[0].size(); ++i)
        CHECK(res.labeling.u[0][i] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("pointwise cheapest region wins without smoothing") {
    Grid g(5, 4);
    PottsProblem prob{{ScalarField(g, 0.8), ScalarField(g, 0.2), ScalarField(g, 0.5)}, 0.0};
    const ScalarField labels = argmax_label(solve(prob, aniso()).labeling);
    for (std::size_t i = 0; i < labels.size(); ++i) CHECK(labels[i] == 2.0);
}

TEST_CASE("argmax tie-breaking takes the smallest index") {
    Grid g(1, 1);
    Labeling lab{{ScalarField(g, 0.9), ScalarField(g, 0.1)}};
    CHECK(argmax_label(lab)[0] == 1.0);
    lab.u[0].fill(0.5);
    lab.u[1].fill(0.5);
    CHECK(argmax_label(lab)[0] == 1.0);
    lab.u.push_back(ScalarField(g, 0.0));
    lab.u[0].fill(0.2);
    lab.u[1].fill(0.3);
    lab.u[2].fill(0.5);
    CHECK(argmax_label(lab)[0] == 3.0);
}

TEST_CASE("potts_energy counts both indicator jumps per boundary") {
    Grid g(2, 1);
    PottsProblem prob{{ScalarField(g, 0.0), ScalarField(g, 0.0)}, 1.0};
    ScalarField labels(g);
    labels[0] = 1.0;
    labels[1] = 2.0;
    CHECK(potts_energy(labels, prob, TvNorm::anisotropic) == doctest::Approx(2.0));
    labels[1] = 1.0;
    CHECK(potts_energy(labels, prob, TvNorm::anisotropic) == 0.0);
    labels[1] = 3.0;
    CHECK_THROWS_AS(potts_energy(labels, prob, TvNorm::anisotropic), std::invalid_argument);
}

TEST_CASE("uniform label energy is that region's cost mass") {
    std::mt19937 rng(71);
    Grid g(4, 4);
    PottsProblem prob{{helpers::random_field(g, rng), helpers::random_field(g, rng)}, 0.3};
    ScalarField labels(g, 2.0);
    CHECK(potts_energy(labels, prob, TvNorm::anisotropic) == doctest::Approx(sum(prob.rho[1])));
}

TEST_CASE("small instances match exhaustive enumeration") {
    std::mt19937 rng(73);
    for (int rep = 0; rep < 4; ++rep) {
        Grid g(2, 2);
        PottsProblem prob{{helpers::random_field(g, rng), helpers::random_field(g, rng),
                           helpers::random_field(g, rng)},
                          0.4};
        const PottsSolveResult res = solve(prob, aniso());
        const double energy =
            potts_energy(argmax_label(res.labeling), prob, TvNorm::anisotropic);
        const double exact = oracles::exhaustive_potts(prob).energy;
        CHECK(energy <= exact * 1.01 + 1e-12);
        CHECK(energy >= exact - 1e-9);
    }
}

TEST_CASE("two regions behave like the binary solver with doubled boundary weight") {
    std::mt19937 rng(79);
    for (int rep = 0; rep < 3; ++rep) {
        Grid g(8, 8);
        PottsProblem prob{{helpers::random_field(g, rng), helpers::random_field(g, rng)}, 0.2};
        const double potts_e =
            potts_energy(argmax_label(solve(prob, aniso()).labeling), prob,
                         TvNorm::anisotropic);

        BinarySegProblem bin{prob.rho[0], prob.rho[1], 2.0 * prob.alpha};
        const ScalarField mask = threshold(solve(bin, aniso()).u, 0.5);
        // the binary energy counts each boundary once at weight 2a, the
        // indicator-pair energy twice at weight a: identical totals
        const double bin_e = primal_energy(mask, bin, TvNorm::anisotropic);
        CHECK(potts_e <= bin_e * 1.01 + 1e-12);
        CHECK(bin_e <= potts_e * 1.01 + 1e-12);
    }
}

TEST_CASE("weak duality against the exhaustive optimum") {
    std::mt19937 rng(83);
    Grid g(3, 2);
    PottsProblem prob{{helpers::random_field(g, rng), helpers::random_field(g, rng),
                       helpers::random_field(g, rng)},
                      0.3};
    const PottsSolveResult res = solve(prob, aniso());
    const double dual = sum(res.p_s);
    CHECK(dual <= oracles::exhaustive_potts(prob).energy + 1e-3 * double(g.size()));
}

TEST_CASE("memberships stay near the simplex") {
    std::mt19937 rng(89);
    Grid g(10, 10);
    PottsProblem prob{{helpers::random_field(g, rng), helpers::random_field(g, rng),
                       helpers::random_field(g, rng), helpers::random_field(g, rng)},
                      0.25};
    const PottsSolveResult res = solve(prob, aniso());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double total = 0.0;
        for (const auto& u : res.labeling.u) {
            total += u[i];
            CHECK(u[i] >= -0.05);
        }
        CHECK(std::abs(total - 1.0) <= 0.05);
    }
}

TEST_CASE("region cost grids must agree") {
    PottsProblem prob{{ScalarField(Grid(4, 4)), ScalarField(Grid(4, 5))}, 0.1};
    CHECK_THROWS_AS(solve(prob, aniso()), std::invalid_argument);
}
