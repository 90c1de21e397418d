#include "cli.hpp"
#include "io.hpp"

#include <cmfkit/cmf.hpp>
#include <cmfkit/ops.hpp>
#include <cmfkit/oracles.hpp>
#include <cmfkit/parallel.hpp>
#include <cmfkit/potts.hpp>
#include <cmfkit/priors.hpp>
#include <cmfkit/registration.hpp>
#include <cmfkit/solver.hpp>
#include <cmfkit/tv.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>

namespace cmfkit::tools {

namespace {

struct Common {
    double alpha = 0.1;
    double c = 0.3;
    int iters = 1000;
    double tol = 1e-4;
    std::string tv_norm = "iso";
    std::string diagnostics;
    int threads = 0;
    bool strict = false;
};

std::string check_open_unit(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') return "'" + s + "' is not a number";
    if (!(v > 0.0 && v < 1.0)) return "threshold " + s + " is outside (0, 1)";
    return {};
}

void add_common(CLI::App* sub, Common& o) {
    sub->add_option("--alpha", o.alpha, "regularization weight");
    sub->add_option("--c", o.c, "augmentation weight");
    sub->add_option("--iters", o.iters, "iteration cap");
    sub->add_option("--tol", o.tol, "stop when the mean multiplier update drops below");
    sub->add_option("--tv-norm", o.tv_norm, "TV norm")->check(CLI::IsMember({"iso", "aniso"}));
    sub->add_option("--diagnostics", o.diagnostics, "write per-iteration CSV here");
    sub->add_option("--threads", o.threads, "worker threads (default: CMFKIT_THREADS or 1)");
    sub->add_flag("--strict", o.strict, "exit 4 unless the solver converged");
}

SolverConfig to_config(const Common& o) {
    if (o.threads > 0) set_worker_count(o.threads);
    SolverConfig cfg;
    cfg.c = o.c;
    cfg.max_iters = o.iters;
    cfg.tol = o.tol;
    cfg.tv_norm = o.tv_norm == "aniso" ? TvNorm::anisotropic : TvNorm::isotropic;
    return cfg;
}

/// Writes the CSV if asked for, then applies the --strict convergence gate.
int finish(const Diagnostics& diag, const Common& o, std::ostream& err) {
    if (!o.diagnostics.empty()) {
        std::ofstream os(o.diagnostics);
        if (!os) throw io_error(o.diagnostics + ": cannot open for writing");
        diag.write_csv(os);
    }
    if (o.strict && !diag.converged) {
        err << "did not converge within " << o.iters << " iterations\n";
        return 4;
    }
    return 0;
}

int run_denoise(const std::string& input, const std::string& output,
                const std::string& fidelity, const Common& o, std::ostream& err) {
    const ScalarField f = load_image(input);
    const auto res =
        denoise(f, o.alpha, fidelity == "l1" ? Fidelity::l1 : Fidelity::l2, to_config(o));
    save_image(res.u, output);
    return finish(res.diagnostics, o, err);
}

struct SegmentArgs {
    std::string source, sink, output, u_output;
    double beta = 0.5;
    double volume = 0.0;
    double gamma = 0.0;
    bool has_volume = false;
    std::vector<double> star; // cx cy [cz]
};

int run_segment(const SegmentArgs& a, const Common& o, std::ostream& err) {
    BinarySegProblem prob{load_image(a.source), load_image(a.sink), o.alpha};
    if (a.has_volume && !a.star.empty())
        throw CLI::ValidationError("segment", "--volume-prior and --star-* are exclusive");

    ScalarField u;
    Diagnostics diag;
    if (a.has_volume) {
        auto res = solve_volume_prior(prob, a.volume, a.gamma, to_config(o));
        u = std::move(res.u);
        diag = std::move(res.diagnostics);
    } else if (!a.star.empty()) {
        std::array<double, 3> center = {a.star[0], a.star[1],
                                        a.star.size() > 2 ? a.star[2] : 0.0};
        auto res = solve_star_prior(prob, star_vector_field(prob.cs.grid(), center),
                                    to_config(o));
        u = std::move(res.u);
        diag = std::move(res.diagnostics);
    } else {
        auto res = solve(prob, to_config(o));
        u = std::move(res.u);
        diag = std::move(res.diagnostics);
    }
    save_mask(threshold(u, a.beta), a.output);
    if (!a.u_output.empty()) save_image(u, a.u_output);
    return finish(diag, o, err);
}

int run_potts(const std::vector<std::string>& costs, const std::string& output,
              const Common& o, std::ostream& err) {
    PottsProblem prob;
    for (const auto& path : costs) prob.rho.push_back(load_image(path));
    prob.alpha = o.alpha;
    const auto res = solve(prob, to_config(o));
    save_labels(argmax_label(res.labeling), prob.regions(), output);
    return finish(res.diagnostics, o, err);
}

int run_order(const std::vector<std::string>& costs, std::vector<double> alphas,
              const std::string& output, const Common& o, std::ostream& err) {
    OrderChain chain;
    for (const auto& path : costs) chain.costs.push_back(load_image(path));
    if (alphas.empty()) alphas.assign(std::size_t(chain.levels() - 1), o.alpha);
    chain.alphas = std::move(alphas);
    const auto res = solve_linear_order(chain, to_config(o));

    // label = deepest nested surface the voxel lies inside, plus one
    ScalarField labels(chain.costs.front().grid(), 1.0);
    for (const auto& u : res.u) {
        const ScalarField mask = threshold(u, 0.5);
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] += mask[i];
    }
    save_labels(labels, chain.levels(), output);
    return finish(res.diagnostics, o, err);
}

int run_partial_order(const std::vector<std::string>& costs, const std::string& output,
                      const Common& o, std::ostream& err) {
    const auto res =
        solve_partial_order(load_image(costs[0]), load_image(costs[1]), load_image(costs[2]),
                            load_image(costs[3]), o.alpha, to_config(o));
    const Labeling leaves{{res.u_m, res.u_b, res.u_s, res.u_B}};
    save_labels(argmax_label(leaves), 4, output);
    return finish(res.diagnostics, o, err);
}

struct CosegArgs {
    std::string source1, sink1, source2, sink2, output1, output2;
    double coupling = 0.0;
    double beta = 0.5;
};

int run_coseg(const CosegArgs& a, const Common& o, std::ostream& err) {
    BinarySegProblem p1{load_image(a.source1), load_image(a.sink1), o.alpha};
    BinarySegProblem p2{load_image(a.source2), load_image(a.sink2), o.alpha};
    const auto res = solve_coseg(p1, p2, a.coupling, to_config(o));
    save_mask(threshold(res.u1, a.beta), a.output1);
    save_mask(threshold(res.u2, a.beta), a.output2);
    return finish(res.diagnostics, o, err);
}

struct RegisterArgs {
    std::string moving, reference, output, warped, volume_mask;
    std::vector<std::string> frames;
    std::string output_prefix;
    bool sequence = false;
    int levels = 3;
    int warps = 10;
    double gamma = 0.0;
};

int run_register(const RegisterArgs& a, const Common& o, std::ostream& out,
                 std::ostream& err) {
    RegParams params;
    params.levels = a.levels;
    params.warps_per_level = a.warps;
    params.alpha = o.alpha;
    params.gamma = a.gamma;
    params.solver = to_config(o);

    if (a.sequence) {
        std::vector<ScalarField> frames;
        for (const auto& path : a.frames) frames.push_back(load_image(path));
        const auto res = register_sequence(frames, params);
        for (std::size_t k = 0; k < res.u.size(); ++k) {
            write_deformation(res.u[k], a.output_prefix + "_" + std::to_string(k) + ".json");
            char line[128];
            std::snprintf(line, sizeof line, "pair %zu sad %.6g -> %.6g\n", k,
                          res.initial_sad[k], res.final_sad[k]);
            out << line;
        }
        return finish(res.diagnostics, o, err);
    }

    const ScalarField moving = load_image(a.moving);
    const ScalarField reference = load_image(a.reference);
    RegistrationResult res;
    if (!a.volume_mask.empty()) {
        res = register_volume_preserving(moving, reference, load_image(a.volume_mask), params);
    } else {
        res = register_pair(moving, reference, params);
    }
    write_deformation(res.u, a.output);
    if (!a.warped.empty()) save_image(warp(moving, res.u), a.warped);
    char line[160];
    std::snprintf(line, sizeof line, "sad %.6g -> %.6g\n", res.initial_sad, res.final_sad);
    out << line;
    if (!a.volume_mask.empty()) {
        std::snprintf(line, sizeof line, "delta_volume %.6g\n", res.delta_volume);
        out << line;
    }
    return finish(res.diagnostics, o, err);
}

struct OracleArgs {
    std::string op;
    std::string source, sink, input, output;
    std::vector<std::string> costs;
    std::string fidelity = "l2";
};

int run_oracle(const OracleArgs& a, const Common& o, std::ostream& out) {
    char line[160];
    if (a.op == "mincut") {
        const auto res =
            oracles::discrete_mincut({load_image(a.source), load_image(a.sink), o.alpha});
        if (!a.output.empty()) save_mask(res.mask, a.output);
        std::snprintf(line, sizeof line, "flow %.12g\ncut %.12g\n", res.flow_value,
                      res.cut_energy);
        out << line;
    } else if (a.op == "potts") {
        PottsProblem prob;
        for (const auto& path : a.costs) prob.rho.push_back(load_image(path));
        prob.alpha = o.alpha;
        const auto res = oracles::exhaustive_potts(prob);
        if (!a.output.empty()) {
            ScalarField labels(prob.rho.front().grid());
            for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = res.labels[i];
            save_labels(labels, prob.regions(), a.output);
        }
        std::snprintf(line, sizeof line, "energy %.12g\n", res.energy);
        out << line;
    } else { // denoise
        const auto u = oracles::reference_denoise(
            load_image(a.input), o.alpha, a.fidelity == "l1" ? Fidelity::l1 : Fidelity::l2);
        save_image(u, a.output);
    }
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"dual-optimization toolkit for TV denoising, continuous max-flow "
                 "segmentation and non-rigid registration on regular grids"};
    app.require_subcommand(1);
    int rc = 0;

    Common od;
    auto* denoise_cmd = app.add_subcommand("denoise", "TV-regularized denoising");
    std::string den_input, den_output, den_fidelity = "l2";
    denoise_cmd->add_option("--input", den_input, "noisy image")->required();
    denoise_cmd->add_option("--output", den_output, "denoised image")->required();
    denoise_cmd->add_option("--fidelity", den_fidelity, "data term")
        ->check(CLI::IsMember({"l2", "l1"}));
    add_common(denoise_cmd, od);
    denoise_cmd->callback([&] { rc = run_denoise(den_input, den_output, den_fidelity, od, err); });

    Common os_;
    SegmentArgs sa;
    auto* segment_cmd = app.add_subcommand("segment", "binary min-cut segmentation");
    segment_cmd->add_option("--source", sa.source, "source capacities (cost of label 0)")
        ->required();
    segment_cmd->add_option("--sink", sa.sink, "sink capacities (cost of label 1)")->required();
    segment_cmd->add_option("--output", sa.output, "binary mask")->required();
    segment_cmd->add_option("--u-output", sa.u_output, "relaxed labeling before thresholding");
    segment_cmd->add_option("--beta", sa.beta, "threshold in (0,1)")->check(check_open_unit);
    auto* vol_opt =
        segment_cmd->add_option("--volume-prior", sa.volume, "target volume (soft constraint)");
    segment_cmd->add_option("--gamma", sa.gamma, "volume constraint weight");
    double star_cx = 0.0, star_cy = 0.0, star_cz = 0.0;
    auto* cx_opt = segment_cmd->add_option("--star-cx", star_cx, "star-shape center x");
    auto* cy_opt = segment_cmd->add_option("--star-cy", star_cy, "star-shape center y");
    segment_cmd->add_option("--star-cz", star_cz, "star-shape center z");
    add_common(segment_cmd, os_);
    segment_cmd->callback([&] {
        sa.has_volume = vol_opt->count() > 0;
        if (cx_opt->count() != cy_opt->count())
            throw CLI::ValidationError("segment", "--star-cx and --star-cy go together");
        if (cx_opt->count() > 0) sa.star = {star_cx, star_cy, star_cz};
        rc = run_segment(sa, os_, err);
    });

    Common op_;
    std::vector<std::string> potts_costs;
    std::string potts_output;
    auto* potts_cmd = app.add_subcommand("potts", "multiphase partition");
    potts_cmd->add_option("--cost", potts_costs, "per-region cost map (repeat >= 2)")
        ->required()
        ->expected(2, 64);
    potts_cmd->add_option("--output", potts_output, "label map (1..n)")->required();
    add_common(potts_cmd, op_);
    potts_cmd->callback([&] { rc = run_potts(potts_costs, potts_output, op_, err); });

    Common oo;
    std::vector<std::string> order_costs;
    std::vector<double> order_alphas;
    std::string order_output;
    auto* order_cmd = app.add_subcommand("order", "nested (linearly ordered) regions");
    order_cmd->add_option("--cost", order_costs, "per-level cost map (repeat >= 2)")
        ->required()
        ->expected(2, 64);
    order_cmd->add_option("--surface-alpha", order_alphas,
                          "per-surface weights (n-1 values; default: --alpha each)");
    order_cmd->add_option("--output", order_output, "label map (1..n)")->required();
    add_common(order_cmd, oo);
    order_cmd->callback([&] { rc = run_order(order_costs, order_alphas, order_output, oo, err); });

    Common opo;
    std::vector<std::string> po_costs;
    std::string po_output;
    auto* po_cmd = app.add_subcommand("partial-order",
                                      "background vs composite region with three leaves");
    po_cmd->add_option("--cost", po_costs, "cost maps: three leaves then background")
        ->required()
        ->expected(4);
    po_cmd->add_option("--output", po_output, "label map (1..4)")->required();
    add_common(po_cmd, opo);
    po_cmd->callback([&] { rc = run_partial_order(po_costs, po_output, opo, err); });

    Common oc;
    CosegArgs ca;
    auto* coseg_cmd = app.add_subcommand("coseg", "joint two-channel segmentation");
    coseg_cmd->add_option("--source1", ca.source1)->required();
    coseg_cmd->add_option("--sink1", ca.sink1)->required();
    coseg_cmd->add_option("--source2", ca.source2)->required();
    coseg_cmd->add_option("--sink2", ca.sink2)->required();
    coseg_cmd->add_option("--output1", ca.output1)->required();
    coseg_cmd->add_option("--output2", ca.output2)->required();
    coseg_cmd->add_option("--coupling", ca.coupling, "disagreement penalty weight");
    coseg_cmd->add_option("--beta", ca.beta, "threshold in (0,1)")->check(check_open_unit);
    add_common(coseg_cmd, oc);
    coseg_cmd->callback([&] { rc = run_coseg(ca, oc, err); });

    Common org;
    org.alpha = 0.2;
    RegisterArgs ra;
    auto* reg_cmd = app.add_subcommand("register", "coarse-to-fine non-rigid registration");
    reg_cmd->add_option("--moving", ra.moving, "image to deform");
    reg_cmd->add_option("--reference", ra.reference, "target image");
    reg_cmd->add_option("--output", ra.output, "deformation header (.json)");
    reg_cmd->add_option("--warped", ra.warped, "also write the warped moving image");
    reg_cmd->add_option("--volume-mask", ra.volume_mask, "preserve this region's volume");
    reg_cmd->add_option("--gamma", ra.gamma, "volume / temporal prior weight");
    reg_cmd->add_flag("--sequence", ra.sequence, "register consecutive --frame pairs jointly");
    reg_cmd->add_option("--frame", ra.frames, "sequence frame (repeat >= 2)");
    reg_cmd->add_option("--output-prefix", ra.output_prefix,
                        "per-pair deformation prefix (sequence mode)");
    reg_cmd->add_option("--levels", ra.levels, "pyramid levels");
    reg_cmd->add_option("--warps", ra.warps, "re-linearizations per level");
    add_common(reg_cmd, org);
    reg_cmd->callback([&] {
        if (ra.sequence) {
            if (ra.frames.size() < 2 || ra.output_prefix.empty())
                throw CLI::ValidationError(
                    "register", "--sequence needs >= 2 --frame and --output-prefix");
        } else if (ra.moving.empty() || ra.reference.empty() || ra.output.empty()) {
            throw CLI::ValidationError("register",
                                       "--moving, --reference and --output are required");
        }
        rc = run_register(ra, org, out, err);
    });

    Common oor;
    OracleArgs oa;
    auto* oracle_cmd = app.add_subcommand("oracle", "exact desk-scale cross-checks");
    oracle_cmd->add_option("--op", oa.op, "which oracle")
        ->required()
        ->check(CLI::IsMember({"mincut", "potts", "denoise"}));
    oracle_cmd->add_option("--source", oa.source);
    oracle_cmd->add_option("--sink", oa.sink);
    oracle_cmd->add_option("--input", oa.input);
    oracle_cmd->add_option("--cost", oa.costs)->expected(1, 64);
    oracle_cmd->add_option("--output", oa.output);
    oracle_cmd->add_option("--fidelity", oa.fidelity)->check(CLI::IsMember({"l2", "l1"}));
    add_common(oracle_cmd, oor);
    oracle_cmd->callback([&] {
        if (oa.op == "mincut" && (oa.source.empty() || oa.sink.empty()))
            throw CLI::ValidationError("oracle", "mincut needs --source and --sink");
        if (oa.op == "potts" && oa.costs.empty())
            throw CLI::ValidationError("oracle", "potts needs --cost maps");
        if (oa.op == "denoise" && (oa.input.empty() || oa.output.empty()))
            throw CLI::ValidationError("oracle", "denoise needs --input and --output");
        rc = run_oracle(oa, oor, out);
    });

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("cmfkit");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        err << e.what() << "\n";
        return 3;
    } catch (const numerical_error& e) {
        err << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        err << e.what() << "\n";
        return 2;
    }
    return rc;
}

} // namespace cmfkit::tools
