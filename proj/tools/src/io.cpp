#include "io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "raw volume I/O assumes a little-endian host");

namespace cmfkit::tools {

namespace {

bool pgm_space(int ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\v' || ch == '\f' || ch == '\r';
}

int pgm_token(std::istream& is, const std::string& path) {
    // skip whitespace and # comments between header fields
    int ch = is.get();
    while (ch == '#' || pgm_space(ch)) {
        if (ch == '#')
            while (ch != '\n' && ch != EOF) ch = is.get();
        ch = is.get();
    }
    int value = -1;
    while (ch >= '0' && ch <= '9') {
        if (value < 0) value = 0;
        value = value * 10 + (ch - '0');
        if (value > 1 << 20) break;
        ch = is.get();
    }
    if (value < 0 || !pgm_space(ch)) throw io_error(path + ": malformed PGM header");
    return value;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error(path + ": cannot open for writing");
    return os;
}

} // namespace

ScalarField read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error(path + ": cannot open");
    char magic[2] = {0, 0};
    is.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '5') throw io_error(path + ": not a binary PGM (P5)");
    const int w = pgm_token(is, path);
    const int h = pgm_token(is, path);
    const int maxval = pgm_token(is, path);
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
        throw io_error(path + ": unsupported PGM dimensions");
    // pgm_token already consumed the single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(std::size_t(w) * std::size_t(h) * std::size_t(bytes));
    is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (std::size_t(is.gcount()) != buf.size()) throw io_error(path + ": truncated PGM payload");

    ScalarField img(Grid(w, h, 1));
    for (std::size_t i = 0; i < img.size(); ++i) {
        const unsigned v = bytes == 1 ? buf[i]
                                      : (unsigned(buf[2 * i]) << 8) | buf[2 * i + 1];
        img[i] = double(v) / double(maxval);
    }
    return img;
}

void write_pgm(const ScalarField& img, const std::string& path, int maxval) {
    if (img.grid().nz != 1) throw io_error(path + ": PGM output requires a single-slice grid");
    if (maxval < 1 || maxval > 65535) throw io_error(path + ": PGM maxval out of range");
    auto os = open_out(path);
    os << "P5\n" << img.grid().nx << " " << img.grid().ny << "\n" << maxval << "\n";
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(img.size() * std::size_t(bytes));
    for (std::size_t i = 0; i < img.size(); ++i) {
        double v = std::clamp(img[i], 0.0, 1.0) * maxval;
        const unsigned q = unsigned(std::lround(v));
        if (bytes == 1) {
            buf[i] = static_cast<unsigned char>(q);
        } else {
            buf[2 * i] = static_cast<unsigned char>(q >> 8);
            buf[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
        }
    }
    os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!os) throw io_error(path + ": write failed");
}

namespace {

struct VolumeHeader {
    Grid grid;
    std::string dtype;
    std::filesystem::path data;
    int components = 0; // 0: scalar payload
};

VolumeHeader read_header(const std::string& header_path) {
    std::ifstream is(header_path);
    if (!is) throw io_error(header_path + ": cannot open");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(header_path + ": bad JSON header (" + e.what() + ")");
    }
    try {
        VolumeHeader h;
        const auto dims = j.at("dims");
        if (!dims.is_array() || dims.size() != 3)
            throw io_error(header_path + ": dims must be [nx,ny,nz]");
        h.grid = Grid(dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>());
        h.dtype = j.at("dtype").get<std::string>();
        if (h.dtype != "f32" && h.dtype != "u8")
            throw io_error(header_path + ": dtype must be f32 or u8");
        if (j.at("order").get<std::string>() != "x-fastest")
            throw io_error(header_path + ": order must be x-fastest");
        h.data = std::filesystem::path(header_path).parent_path() /
                 j.at("data").get<std::string>();
        if (j.contains("components")) h.components = j.at("components").get<int>();
        return h;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(header_path + ": incomplete header (" + e.what() + ")");
    } catch (const std::invalid_argument& e) {
        throw io_error(header_path + ": " + e.what());
    }
}

std::vector<double> read_payload(const VolumeHeader& h, std::size_t count,
                                 const std::string& header_path) {
    std::ifstream is(h.data, std::ios::binary);
    if (!is) throw io_error(h.data.string() + ": cannot open");
    const std::size_t elem = h.dtype == "f32" ? 4 : 1;
    const auto expect = std::uintmax_t(count) * elem;
    std::error_code ec;
    const auto actual = std::filesystem::file_size(h.data, ec);
    if (ec || actual != expect)
        throw io_error(header_path + ": payload size mismatch, expected " +
                       std::to_string(expect) + " bytes");
    std::vector<double> out(count);
    if (h.dtype == "f32") {
        std::vector<float> buf(count);
        is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(expect));
        for (std::size_t i = 0; i < count; ++i) out[i] = double(buf[i]);
    } else {
        std::vector<unsigned char> buf(count);
        is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(expect));
        for (std::size_t i = 0; i < count; ++i) out[i] = double(buf[i]);
    }
    if (!is) throw io_error(h.data.string() + ": truncated payload");
    return out;
}

void write_header_and_payload(const std::string& header_path, const Grid& g,
                              const std::string& dtype, int components,
                              const std::vector<double>& values) {
    const auto raw = std::filesystem::path(header_path).replace_extension(".raw");
    nlohmann::json j;
    j["dims"] = {g.nx, g.ny, g.nz};
    j["dtype"] = dtype;
    j["order"] = "x-fastest";
    j["data"] = raw.filename().string();
    if (components > 0) j["components"] = components;
    {
        auto os = open_out(header_path);
        os << j.dump(2) << "\n";
    }
    auto os = open_out(raw.string());
    if (dtype == "f32") {
        std::vector<float> buf(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) buf[i] = float(values[i]);
        os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 4));
    } else {
        std::vector<unsigned char> buf(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            buf[i] = values[i] > 0.5 ? 1 : 0;
        os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    }
    if (!os) throw io_error(raw.string() + ": write failed");
}

} // namespace

ScalarField read_volume(const std::string& header_path) {
    const auto h = read_header(header_path);
    if (h.components > 0)
        throw io_error(header_path + ": expected a scalar volume, found components");
    ScalarField vol(h.grid);
    const auto values = read_payload(h, vol.size(), header_path);
    std::copy(values.begin(), values.end(), vol.data());
    return vol;
}

void write_volume(const ScalarField& vol, const std::string& header_path,
                  const std::string& dtype) {
    write_header_and_payload(header_path, vol.grid(), dtype, 0,
                             {vol.values().begin(), vol.values().end()});
}

VectorField read_deformation(const std::string& header_path) {
    const auto h = read_header(header_path);
    VectorField u(h.grid);
    if (h.components != u.dim())
        throw io_error(header_path + ": expected " + std::to_string(u.dim()) +
                       " components for " + to_string(h.grid));
    if (h.dtype != "f32") throw io_error(header_path + ": deformations must be f32");
    const auto values = read_payload(h, u.size(), header_path);
    std::copy(values.begin(), values.end(), u.data());
    return u;
}

void write_deformation(const VectorField& u, const std::string& header_path) {
    write_header_and_payload(header_path, u.grid(), "f32", u.dim(),
                             {u.data(), u.data() + u.size()});
}

namespace {

bool has_extension(const std::string& path, const char* ext) {
    return std::filesystem::path(path).extension() == ext;
}

} // namespace

ScalarField load_image(const std::string& path) {
    if (has_extension(path, ".pgm")) return read_pgm(path);
    if (has_extension(path, ".json")) return read_volume(path);
    throw io_error(path + ": unknown image format (use .pgm or .json)");
}

void save_image(const ScalarField& img, const std::string& path) {
    if (has_extension(path, ".pgm")) {
        write_pgm(img, path);
        return;
    }
    if (has_extension(path, ".json")) {
        write_volume(img, path, "f32");
        return;
    }
    throw io_error(path + ": unknown image format (use .pgm or .json)");
}

void save_mask(const ScalarField& mask, const std::string& path) {
    if (has_extension(path, ".pgm")) {
        write_pgm(mask, path, 1);
        return;
    }
    if (has_extension(path, ".json")) {
        write_volume(mask, path, "u8");
        return;
    }
    throw io_error(path + ": unknown mask format (use .pgm or .json)");
}

void save_labels(const ScalarField& labels, int n, const std::string& path) {
    if (has_extension(path, ".pgm")) {
        ScalarField scaled(labels.grid());
        for (std::size_t i = 0; i < labels.size(); ++i) scaled[i] = labels[i] / n;
        write_pgm(scaled, path, n);
        return;
    }
    if (has_extension(path, ".json")) {
        const auto raw = std::filesystem::path(path).replace_extension(".raw");
        nlohmann::json j;
        j["dims"] = {labels.grid().nx, labels.grid().ny, labels.grid().nz};
        j["dtype"] = "u8";
        j["order"] = "x-fastest";
        j["data"] = raw.filename().string();
        {
            auto os = open_out(path);
            os << j.dump(2) << "\n";
        }
        auto os = open_out(raw.string());
        std::vector<unsigned char> buf(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i)
            buf[i] = static_cast<unsigned char>(std::lround(labels[i]));
        os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
        if (!os) throw io_error(raw.string() + ": write failed");
        return;
    }
    throw io_error(path + ": unknown label format (use .pgm or .json)");
}

} // namespace cmfkit::tools
