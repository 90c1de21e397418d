#include <cmfkit/oracles.hpp>

#include <doctest.h>

#include "cli.hpp"
#include "io.hpp"

#include "helpers.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace cmfkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path = fs::temp_directory_path() / ("cmfkit-test-" + std::to_string(rng()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = tools::run(args, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Random image whose samples sit exactly on the 8-bit lattice.
ScalarField quantized_field(const Grid& g, std::mt19937& rng) {
    std::uniform_int_distribution<int> dist(0, 255);
    ScalarField f(g);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = dist(rng) / 255.0;
    return f;
}

} // namespace

TEST_CASE("pgm round trip is exact on the 8-bit lattice") {
    TempDir dir;
    std::mt19937 rng(401);
    const ScalarField f = quantized_field(Grid(9, 7), rng);
    tools::write_pgm(f, dir.file("img.pgm"));
    const ScalarField back = tools::read_pgm(dir.file("img.pgm"));
    CHECK(helpers::bitwise_equal(back, f));
}

TEST_CASE("pgm 16-bit round trip") {
    TempDir dir;
    const Grid g(5, 3);
    ScalarField f(g);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = double(1000 * i + 7) / 65535.0;
    tools::write_pgm(f, dir.file("img.pgm"), 65535);
    const ScalarField back = tools::read_pgm(dir.file("img.pgm"));
    CHECK(helpers::bitwise_equal(back, f));
}

TEST_CASE("pgm reader handles header comments") {
    TempDir dir;
    {
        std::ofstream out(dir.file("ok.pgm"), std::ios::binary);
        out << "P5\n# a comment\n2 1\n# another\n255\n";
        out.put(char(51));
        out.put(char(204));
    }
    const ScalarField img = tools::read_pgm(dir.file("ok.pgm"));
    REQUIRE(img.grid() == Grid(2, 1));
    CHECK(img[0] == doctest::Approx(51.0 / 255.0));
    CHECK(img[1] == doctest::Approx(204.0 / 255.0));
}

TEST_CASE("volume round trip preserves f32 payloads") {
    TempDir dir;
    const Grid g(4, 3, 2);
    ScalarField v(g);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * double(i) - 0.7;
    tools::write_volume(v, dir.file("vol.json"));
    const ScalarField back = tools::read_volume(dir.file("vol.json"));
    REQUIRE(back.grid() == g);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == double(float(v[i])));
}

TEST_CASE("deformation round trip") {
    TempDir dir;
    std::mt19937 rng(409);
    const Grid g(6, 5);
    const VectorField u = helpers::random_vector_field(g, rng);
    tools::write_deformation(u, dir.file("u.json"));
    const VectorField back = tools::read_deformation(dir.file("u.json"));
    REQUIRE(back.grid() == g);
    REQUIRE(back.dim() == u.dim());
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(back.data()[i] == double(float(u.data()[i])));
}

TEST_CASE("volume header validation fails cleanly") {
    TempDir dir;
    {
        std::ofstream out(dir.file("bad.json"));
        out << R"({"dims":[4,4],"dtype":"f32","order":"x-fastest","data":"bad.raw"})";
    }
    CHECK_THROWS_AS(tools::read_volume(dir.file("bad.json")), tools::io_error);
    {
        std::ofstream out(dir.file("short.json"));
        out << R"({"dims":[4,4,1],"dtype":"f32","order":"x-fastest","data":"short.raw"})";
        std::ofstream raw(dir.file("short.raw"), std::ios::binary);
        raw << "abc";
    }
    CHECK_THROWS_AS(tools::read_volume(dir.file("short.json")), tools::io_error);
}

TEST_CASE("cli: denoise round trip is deterministic") {
    TempDir dir;
    std::mt19937 rng(419);
    tools::write_pgm(quantized_field(Grid(16, 16), rng), dir.file("in.pgm"));
    const std::vector<std::string> args = {
        "denoise",          "--input",  dir.file("in.pgm"), "--output", dir.file("out.pgm"),
        "--alpha",          "0.15",     "--iters",          "300",      "--tol",
        "1e-5",             "--threads", "2"};
    std::string out_text;
    REQUIRE(run_cli(args, &out_text) == 0);
    const std::string first = slurp(dir.file("out.pgm"));
    REQUIRE(run_cli(args) == 0);
    CHECK(slurp(dir.file("out.pgm")) == first);
    CHECK(first.substr(0, 2) == "P5");
}

TEST_CASE("cli: bad arguments exit with 2") {
    std::string err;
    CHECK(run_cli({"denoise", "--no-such-flag"}, nullptr, &err) == 2);
    CHECK(!err.empty());
    CHECK(run_cli({"frobnicate"}, nullptr, &err) == 2);
    CHECK(run_cli({"denoise", "--input", "a.pgm", "--output", "b.pgm", "--alpha", "abc"},
                  nullptr, &err) == 2);
    CHECK(run_cli({"segment", "--source", "a.pgm", "--sink", "b.pgm", "--output", "c.pgm",
                   "--beta", "1.5"},
                  nullptr, &err) == 2);
}

TEST_CASE("cli: missing and malformed inputs exit with 3") {
    TempDir dir;
    std::string err;
    CHECK(run_cli({"denoise", "--input", dir.file("absent.pgm"), "--output",
                   dir.file("out.pgm")},
                  nullptr, &err) == 3);
    CHECK(!err.empty());
    {
        std::ofstream bad(dir.file("bad.pgm"), std::ios::binary);
        bad << "P3\n2 2\n255\n0 0 0 0\n";
    }
    CHECK(run_cli({"denoise", "--input", dir.file("bad.pgm"), "--output", dir.file("out.pgm")},
                  nullptr, &err) == 3);
}

TEST_CASE("cli: mismatched segmentation inputs name both shapes") {
    TempDir dir;
    std::mt19937 rng(431);
    tools::write_pgm(quantized_field(Grid(8, 8), rng), dir.file("cs.pgm"));
    tools::write_pgm(quantized_field(Grid(4, 4), rng), dir.file("ct.pgm"));
    std::string err;
    CHECK(run_cli({"segment", "--source", dir.file("cs.pgm"), "--sink", dir.file("ct.pgm"),
                   "--output", dir.file("mask.pgm")},
                  nullptr, &err) == 2);
    CHECK(err.find("8x8x1") != std::string::npos);
    CHECK(err.find("4x4x1") != std::string::npos);
}

TEST_CASE("cli: segment matches the discrete min-cut oracle") {
    TempDir dir;
    std::mt19937 rng(433);
    const Grid g(12, 12);
    const ScalarField cs = quantized_field(g, rng);
    const ScalarField ct = quantized_field(g, rng);
    tools::write_pgm(cs, dir.file("cs.pgm"));
    tools::write_pgm(ct, dir.file("ct.pgm"));
    REQUIRE(run_cli({"segment", "--source", dir.file("cs.pgm"), "--sink", dir.file("ct.pgm"),
                     "--output", dir.file("mask.pgm"), "--alpha", "0.25", "--tv-norm", "aniso",
                     "--iters", "4000", "--tol", "1e-7"}) == 0);

    const oracles::MincutResult cut = oracles::discrete_mincut({cs, ct, 0.25});
    tools::save_mask(cut.mask, dir.file("oracle.pgm"));
    CHECK(slurp(dir.file("mask.pgm")) == slurp(dir.file("oracle.pgm")));
}

TEST_CASE("cli: diagnostics CSV and strict mode") {
    TempDir dir;
    std::mt19937 rng(439);
    tools::write_pgm(quantized_field(Grid(12, 12), rng), dir.file("in.pgm"));
    REQUIRE(run_cli({"denoise", "--input", dir.file("in.pgm"), "--output", dir.file("out.pgm"),
                     "--diagnostics", dir.file("diag.csv"), "--iters", "40"}) == 0);
    const std::string csv = slurp(dir.file("diag.csv"));
    CHECK(csv.rfind("iter,primal,dual,residual_l2,mean_update\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 2);

    CHECK(run_cli({"denoise", "--input", dir.file("in.pgm"), "--output", dir.file("out.pgm"),
                   "--iters", "2", "--tol", "1e-12", "--strict"}) == 4);
}

TEST_CASE("cli: potts writes a label map that reads back exactly") {
    TempDir dir;
    std::mt19937 rng(443);
    const Grid g(10, 10);
    std::vector<std::string> args = {"potts", "--output", dir.file("labels.pgm"),
                                     "--alpha", "0.2",    "--iters",
                                     "800",     "--tol",  "1e-6",
                                     "--cost"};
    for (int k = 0; k < 3; ++k) {
        const std::string p = dir.file("rho" + std::to_string(k) + ".pgm");
        tools::write_pgm(quantized_field(g, rng), p);
        args.push_back(p);
    }
    REQUIRE(run_cli(args) == 0);
    const ScalarField labels = tools::read_pgm(dir.file("labels.pgm"));
    // maxval equals the region count, so normalized values are k/3
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double scaled = labels[i] * 3.0;
        CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-12));
        CHECK(scaled >= 1.0);
        CHECK(scaled <= 3.0);
    }
}

TEST_CASE("cli: register writes a deformation readable by the volume reader") {
    TempDir dir;
    const Grid g(32, 32);
    tools::write_pgm(helpers::blob(g, 14.0, 17.0, 4.0, 0.9), dir.file("mov.pgm"));
    tools::write_pgm(helpers::blob(g, 16.0, 16.0, 4.0, 0.9), dir.file("ref.pgm"));
    std::string out_text;
    REQUIRE(run_cli({"register", "--moving", dir.file("mov.pgm"), "--reference",
                     dir.file("ref.pgm"), "--output", dir.file("u.json"), "--warped",
                     dir.file("warped.pgm"), "--levels", "3", "--warps", "5", "--iters", "150"},
                    &out_text) == 0);
    CHECK(fs::exists(dir.file("u.json")));
    CHECK(fs::exists(dir.file("u.raw")));
    CHECK(fs::exists(dir.file("warped.pgm")));
    CHECK(out_text.find("sad") != std::string::npos);
    const VectorField u = tools::read_deformation(dir.file("u.json"));
    CHECK(u.grid() == g);
    CHECK(u.dim() == 2);
}

TEST_CASE("cli: sequence registration writes one deformation per pair") {
    TempDir dir;
    const Grid g(24, 24);
    std::vector<std::string> args = {"register", "--sequence",       "--output-prefix",
                                     dir.file("seq"), "--gamma",     "0.4",
                                     "--levels",      "2",           "--warps",
                                     "3",             "--iters",     "80"};
    for (int k = 0; k < 3; ++k) {
        const std::string p = dir.file("frame" + std::to_string(k) + ".pgm");
        tools::write_pgm(helpers::blob(g, 10.0 + k, 12.0, 3.5, 0.9), p);
        args.push_back("--frame");
        args.push_back(p);
    }
    std::string out_text;
    REQUIRE(run_cli(args, &out_text) == 0);
    CHECK(fs::exists(dir.file("seq_0.json")));
    CHECK(fs::exists(dir.file("seq_1.json")));
    CHECK(out_text.find("pair") != std::string::npos);
}

TEST_CASE("cli: 3D volumes flow through denoise") {
    TempDir dir;
    std::mt19937 rng(449);
    const Grid g(8, 8, 4);
    tools::write_volume(helpers::random_field(g, rng), dir.file("in.json"));
    REQUIRE(run_cli({"denoise", "--input", dir.file("in.json"), "--output",
                     dir.file("out.json"), "--alpha", "0.1", "--iters", "200"}) == 0);
    const ScalarField out = tools::read_volume(dir.file("out.json"));
    CHECK(out.grid() == g);
}

TEST_CASE("cli: oracle subcommand reports flow and cut") {
    TempDir dir;
    std::mt19937 rng(457);
    const Grid g(6, 6);
    tools::write_pgm(quantized_field(g, rng), dir.file("cs.pgm"));
    tools::write_pgm(quantized_field(g, rng), dir.file("ct.pgm"));
    std::string out_text;
    REQUIRE(run_cli({"oracle", "--op", "mincut", "--source", dir.file("cs.pgm"), "--sink",
                     dir.file("ct.pgm"), "--alpha", "0.2"},
                    &out_text) == 0);
    CHECK(out_text.find("flow ") != std::string::npos);
    CHECK(out_text.find("cut ") != std::string::npos);

    std::istringstream parse(out_text);
    std::string tag;
    double flow = 0.0, cut = 0.0;
    parse >> tag >> flow >> tag >> cut;
    CHECK(std::abs(flow - cut) <= 1e-9);
}

TEST_CASE("cli: help exits cleanly") {
    std::string out_text;
    CHECK(run_cli({"--help"}, &out_text) == 0);
    CHECK(out_text.find("denoise") != std::string::npos);
    CHECK(run_cli({"segment", "--help"}, &out_text) == 0);
}
