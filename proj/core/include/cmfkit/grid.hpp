#ifndef CMFKIT_GRID_HPP
#define CMFKIT_GRID_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cmfkit {

/// Regular voxel grid with unit spacing. 2D images use nz = 1.
struct Grid {
    int nx = 1;
    int ny = 1;
    int nz = 1;

    Grid() = default;
    Grid(int nx_, int ny_, int nz_ = 1);

    std::size_t size() const { return std::size_t(nx) * std::size_t(ny) * std::size_t(nz); }

    /// Spatial dimensionality: 2 for single-slice grids, 3 otherwise.
    int dim() const { return nz > 1 ? 3 : 2; }

    int extent(int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }

    /// Linear index, x fastest.
    std::size_t index(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(nx) * (std::size_t(j) + std::size_t(ny) * std::size_t(k));
    }

    bool operator==(const Grid&) const = default;
};

std::string to_string(const Grid& g);

/// Dense scalar function on a Grid, stored x-fastest.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const Grid& g, double fill = 0.0);

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return v_.size(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }

    double& at(int i, int j, int k) { return v_[grid_.index(i, j, k)]; }
    double at(int i, int j, int k) const { return v_[grid_.index(i, j, k)]; }

    std::span<double> values() { return v_; }
    std::span<const double> values() const { return v_; }

    void fill(double value);

private:
    Grid grid_;
    std::vector<double> v_;
};

/// Dense vector function on a Grid with grid().dim() components,
/// stored component-planar: all x-components, then all y, then all z.
class VectorField {
public:
    VectorField() = default;
    explicit VectorField(const Grid& g, double fill = 0.0);

    const Grid& grid() const { return grid_; }
    int dim() const { return dim_; }
    std::size_t plane() const { return grid_.size(); }

    double* component(int c) { return v_.data() + std::size_t(c) * plane(); }
    const double* component(int c) const { return v_.data() + std::size_t(c) * plane(); }

    std::span<double> component_values(int c) { return {component(c), plane()}; }
    std::span<const double> component_values(int c) const { return {component(c), plane()}; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::size_t size() const { return v_.size(); }

    void fill(double value);

private:
    Grid grid_;
    int dim_ = 0;
    std::vector<double> v_;
};

// Reductions used throughout the solvers. All of them accumulate in fixed
// chunk order so results do not depend on the worker count.
double dot(const ScalarField& a, const ScalarField& b);
double sum(const ScalarField& a);
double sum_abs(const ScalarField& a);
double sum_sq(const ScalarField& a);
double max_abs(const ScalarField& a);
double min_value(const ScalarField& a);
double max_value(const ScalarField& a);
bool all_finite(const ScalarField& a);
bool all_finite(const VectorField& a);

void require_same_grid(const Grid& a, const Grid& b, const char* what);

} // namespace cmfkit

#endif
