#ifndef CMFKIT_TESTS_HELPERS_HPP
#define CMFKIT_TESTS_HELPERS_HPP

#include <cmfkit/grid.hpp>

#include <cmath>
#include <random>

namespace helpers {

inline cmfkit::ScalarField random_field(const cmfkit::Grid& g, std::mt19937& rng,
                                        double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    cmfkit::ScalarField f(g);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = dist(rng);
    return f;
}

inline cmfkit::VectorField random_vector_field(const cmfkit::Grid& g, std::mt19937& rng,
                                               double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    cmfkit::VectorField p(g);
    for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = dist(rng);
    return p;
}

/// Gaussian bump of the given peak height on a zero background.
inline cmfkit::ScalarField blob(const cmfkit::Grid& g, double cx, double cy, double sigma,
                                double peak = 1.0) {
    cmfkit::ScalarField f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double d2 = (i - cx) * (i - cx) + (j - cy) * (j - cy);
            f.at(i, j, 0) = peak * std::exp(-d2 / (2.0 * sigma * sigma));
        }
    return f;
}

inline double max_abs_diff(const cmfkit::ScalarField& a, const cmfkit::ScalarField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs_diff(const cmfkit::VectorField& a, const cmfkit::VectorField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline double rms_diff(const cmfkit::ScalarField& a, const cmfkit::ScalarField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / double(a.size()));
}

inline bool bitwise_equal(const cmfkit::ScalarField& a, const cmfkit::ScalarField& b) {
    if (!(a.grid() == b.grid())) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

} // namespace helpers

#endif
