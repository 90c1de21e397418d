#include "cmfkit/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmfkit {

Grid::Grid(int nx_, int ny_, int nz_) : nx(nx_), ny(ny_), nz(nz_) {
    if (nx < 1 || ny < 1 || nz < 1)
        throw std::invalid_argument("grid extents must be positive, got " + to_string(*this));
    // keep the voxel count well inside addressable range
    const std::size_t cap = std::size_t(1) << 40;
    if (std::size_t(nx) * std::size_t(ny) > cap / std::size_t(nz))
        throw std::invalid_argument("grid too large: " + to_string(*this));
}

std::string to_string(const Grid& g) {
    return std::to_string(g.nx) + "x" + std::to_string(g.ny) + "x" + std::to_string(g.nz);
}

ScalarField::ScalarField(const Grid& g, double fill) : grid_(g), v_(g.size(), fill) {}

void ScalarField::fill(double value) { std::fill(v_.begin(), v_.end(), value); }

VectorField::VectorField(const Grid& g, double fill)
    : grid_(g), dim_(g.dim()), v_(g.size() * std::size_t(g.dim()), fill) {}

void VectorField::fill(double value) { std::fill(v_.begin(), v_.end(), value); }

namespace {

constexpr std::size_t kChunk = 1024;

template <class F>
double chunked_sum(std::size_t n, F&& term) {
    double total = 0.0;
    for (std::size_t base = 0; base < n; base += kChunk) {
        const std::size_t end = std::min(n, base + kChunk);
        double part = 0.0;
        for (std::size_t i = base; i < end; ++i) part += term(i);
        total += part;
    }
    return total;
}

} // namespace

double dot(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid(), b.grid(), "dot");
    const double* pa = a.data();
    const double* pb = b.data();
    return chunked_sum(a.size(), [&](std::size_t i) { return pa[i] * pb[i]; });
}

double sum(const ScalarField& a) {
    const double* p = a.data();
    return chunked_sum(a.size(), [&](std::size_t i) { return p[i]; });
}

double sum_abs(const ScalarField& a) {
    const double* p = a.data();
    return chunked_sum(a.size(), [&](std::size_t i) { return std::abs(p[i]); });
}

double sum_sq(const ScalarField& a) {
    const double* p = a.data();
    return chunked_sum(a.size(), [&](std::size_t i) { return p[i] * p[i]; });
}

double max_abs(const ScalarField& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

double min_value(const ScalarField& a) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : a.values()) m = std::min(m, v);
    return m;
}

double max_value(const ScalarField& a) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : a.values()) m = std::max(m, v);
    return m;
}

bool all_finite(const ScalarField& a) {
    for (double v : a.values())
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const VectorField& a) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isfinite(a.data()[i])) return false;
    return true;
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!(a == b))
        throw std::invalid_argument(std::string(what) + ": grid mismatch, " + to_string(a) +
                                    " vs " + to_string(b));
}

} // namespace cmfkit
