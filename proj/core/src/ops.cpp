#include "cmfkit/ops.hpp"
#include "cmfkit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmfkit {

void gradient(const ScalarField& u, VectorField& out) {
    const Grid& g = u.grid();
    require_same_grid(g, out.grid(), "gradient");
    const int nx = g.nx, ny = g.ny, nz = g.nz;
    const std::size_t plane = std::size_t(nx) * ny;
    const double* s = u.data();
    const std::size_t rows = std::size_t(ny) * nz;

    double* gx = out.component(0);
    parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t b = r * nx;
            for (int i = 0; i + 1 < nx; ++i) gx[b + i] = s[b + i + 1] - s[b + i];
            gx[b + nx - 1] = 0.0;
        }
    });

    double* gy = out.component(1);
    parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t b = r * nx;
            const int j = int(r % ny);
            if (j + 1 < ny)
                for (int i = 0; i < nx; ++i) gy[b + i] = s[b + i + nx] - s[b + i];
            else
                for (int i = 0; i < nx; ++i) gy[b + i] = 0.0;
        }
    });

    if (out.dim() == 3) {
        double* gz = out.component(2);
        parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
            for (std::size_t r = r0; r < r1; ++r) {
                const std::size_t b = r * nx;
                const int k = int(r / ny);
                if (k + 1 < nz)
                    for (int i = 0; i < nx; ++i) gz[b + i] = s[b + i + plane] - s[b + i];
                else
                    for (int i = 0; i < nx; ++i) gz[b + i] = 0.0;
            }
        });
    }
}

VectorField gradient(const ScalarField& u) {
    VectorField out(u.grid());
    gradient(u, out);
    return out;
}

void divergence(const VectorField& p, ScalarField& out) {
    const Grid& g = p.grid();
    require_same_grid(g, out.grid(), "divergence");
    const int nx = g.nx, ny = g.ny, nz = g.nz;
    const std::size_t plane = std::size_t(nx) * ny;
    const double* px = p.component(0);
    const double* py = p.component(1);
    const double* pz = p.dim() == 3 ? p.component(2) : nullptr;
    double* d = out.data();
    const std::size_t rows = std::size_t(ny) * nz;

    parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t b = r * nx;
            const int j = int(r % ny);
            const int k = int(r / ny);
            for (int i = 0; i < nx; ++i) {
                const std::size_t q = b + i;
                double v = 0.0;
                if (i + 1 < nx) v += px[q];
                if (i > 0) v -= px[q - 1];
                if (j + 1 < ny) v += py[q];
                if (j > 0) v -= py[q - nx];
                if (pz) {
                    if (k + 1 < nz) v += pz[q];
                    if (k > 0) v -= pz[q - plane];
                }
                d[q] = v;
            }
        }
    });
}

ScalarField divergence(const VectorField& p) {
    ScalarField out(p.grid());
    divergence(p, out);
    return out;
}

void image_gradient(const ScalarField& img, VectorField& out) {
    const Grid& g = img.grid();
    require_same_grid(g, out.grid(), "image_gradient");
    if (g.nx < 2 && g.ny < 2 && g.nz < 2)
        throw std::invalid_argument("image_gradient: grid " + to_string(g) + " has no extended axis");
    const int nx = g.nx, ny = g.ny, nz = g.nz;
    const std::size_t plane = std::size_t(nx) * ny;
    const double* s = img.data();
    const std::size_t rows = std::size_t(ny) * nz;

    // one axis at a time: centered interior, one-sided faces, zero if extent 1
    double* gx = out.component(0);
    parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t b = r * nx;
            if (nx < 2) {
                gx[b] = 0.0;
                continue;
            }
            gx[b] = s[b + 1] - s[b];
            for (int i = 1; i + 1 < nx; ++i) gx[b + i] = 0.5 * (s[b + i + 1] - s[b + i - 1]);
            gx[b + nx - 1] = s[b + nx - 1] - s[b + nx - 2];
        }
    });

    double* gy = out.component(1);
    parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t b = r * nx;
            const int j = int(r % ny);
            if (ny < 2) {
                for (int i = 0; i < nx; ++i) gy[b + i] = 0.0;
            } else if (j == 0) {
                for (int i = 0; i < nx; ++i) gy[b + i] = s[b + i + nx] - s[b + i];
            } else if (j + 1 == ny) {
                for (int i = 0; i < nx; ++i) gy[b + i] = s[b + i] - s[b + i - nx];
            } else {
                for (int i = 0; i < nx; ++i) gy[b + i] = 0.5 * (s[b + i + nx] - s[b + i - nx]);
            }
        }
    });

    if (out.dim() == 3) {
        double* gz = out.component(2);
        parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
            for (std::size_t r = r0; r < r1; ++r) {
                const std::size_t b = r * nx;
                const int k = int(r / ny);
                if (k == 0) {
                    for (int i = 0; i < nx; ++i) gz[b + i] = s[b + i + plane] - s[b + i];
                } else if (k + 1 == nz) {
                    for (int i = 0; i < nx; ++i) gz[b + i] = s[b + i] - s[b + i - plane];
                } else {
                    for (int i = 0; i < nx; ++i)
                        gz[b + i] = 0.5 * (s[b + i + plane] - s[b + i - plane]);
                }
            }
        });
    }
}

VectorField image_gradient(const ScalarField& img) {
    VectorField out(img.grid());
    image_gradient(img, out);
    return out;
}

namespace {

/// Multilinear sample of img at clamped continuous position (x, y, z).
double sample_clamped(const ScalarField& img, double x, double y, double z) {
    const Grid& g = img.grid();
    const double* s = img.data();
    const int nx = g.nx, ny = g.ny, nz = g.nz;

    x = std::clamp(x, 0.0, double(nx - 1));
    y = std::clamp(y, 0.0, double(ny - 1));
    z = std::clamp(z, 0.0, double(nz - 1));

    const int i0 = nx > 1 ? std::min(int(x), nx - 2) : 0;
    const int j0 = ny > 1 ? std::min(int(y), ny - 2) : 0;
    const int k0 = nz > 1 ? std::min(int(z), nz - 2) : 0;
    const double fx = nx > 1 ? x - i0 : 0.0;
    const double fy = ny > 1 ? y - j0 : 0.0;
    const double fz = nz > 1 ? z - k0 : 0.0;
    const int i1 = nx > 1 ? i0 + 1 : i0;
    const int j1 = ny > 1 ? j0 + 1 : j0;
    const int k1 = nz > 1 ? k0 + 1 : k0;

    // weight-product form so integer positions reproduce voxel values exactly
    const double wx[2] = {1.0 - fx, fx};
    const double wy[2] = {1.0 - fy, fy};
    const double wz[2] = {1.0 - fz, fz};
    const int ii[2] = {i0, i1}, jj[2] = {j0, j1}, kk[2] = {k0, k1};

    double v = 0.0;
    for (int c = 0; c < 2; ++c) {
        if (nz == 1 && c == 1) break;
        for (int b = 0; b < 2; ++b) {
            if (ny == 1 && b == 1) break;
            for (int a = 0; a < 2; ++a) {
                if (nx == 1 && a == 1) break;
                const double w = wx[a] * wy[b] * wz[c];
                if (w != 0.0) v += w * s[g.index(ii[a], jj[b], kk[c])];
            }
        }
    }
    return v;
}

} // namespace

void warp(const ScalarField& img, const VectorField& u, ScalarField& out) {
    const Grid& g = img.grid();
    require_same_grid(g, u.grid(), "warp");
    require_same_grid(g, out.grid(), "warp");
    const double* ux = u.component(0);
    const double* uy = u.component(1);
    const double* uz = u.dim() == 3 ? u.component(2) : nullptr;
    double* o = out.data();
    const std::size_t rows = std::size_t(g.ny) * g.nz;

    parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t b = r * g.nx;
            const int j = int(r % g.ny);
            const int k = int(r / g.ny);
            for (int i = 0; i < g.nx; ++i) {
                const std::size_t q = b + i;
                const double x = i + ux[q];
                const double y = j + uy[q];
                const double z = uz ? k + uz[q] : double(k);
                o[q] = sample_clamped(img, x, y, z);
            }
        }
    });
}

ScalarField warp(const ScalarField& img, const VectorField& u) {
    ScalarField out(img.grid());
    warp(img, u, out);
    return out;
}

namespace {

void smooth_axis(std::vector<double>& buf, const Grid& g, int axis) {
    const int n = g.extent(axis);
    if (n < 2) return;
    const std::size_t stride = axis == 0 ? 1
                             : axis == 1 ? std::size_t(g.nx)
                                         : std::size_t(g.nx) * g.ny;
    std::vector<double> line(n);
    const int nx = g.nx, ny = g.ny, nz = g.nz;
    // iterate over all lines along `axis`
    const int la = axis == 0 ? ny : nx;
    const int lb = axis == 2 ? ny : nz;
    for (int bb = 0; bb < lb; ++bb) {
        for (int aa = 0; aa < la; ++aa) {
            std::size_t base;
            if (axis == 0)
                base = g.index(0, aa, bb);
            else if (axis == 1)
                base = g.index(aa, 0, bb);
            else
                base = g.index(aa, bb, 0);
            for (int t = 0; t < n; ++t) line[t] = buf[base + stride * t];
            for (int t = 0; t < n; ++t) {
                const double lo = line[std::max(t - 1, 0)];
                const double hi = line[std::min(t + 1, n - 1)];
                buf[base + stride * t] = 0.25 * lo + 0.5 * line[t] + 0.25 * hi;
            }
        }
    }
}

ScalarField coarsen(const ScalarField& fine) {
    const Grid& g = fine.grid();
    std::vector<double> buf(fine.data(), fine.data() + fine.size());
    for (int axis = 0; axis < 3; ++axis) smooth_axis(buf, g, axis);
    const Grid cg((g.nx + 1) / 2, (g.ny + 1) / 2, (g.nz + 1) / 2);
    ScalarField out(cg);
    for (int k = 0; k < cg.nz; ++k)
        for (int j = 0; j < cg.ny; ++j)
            for (int i = 0; i < cg.nx; ++i)
                out.at(i, j, k) = buf[g.index(2 * i, 2 * j, 2 * k)];
    return out;
}

bool can_coarsen(const Grid& g) {
    bool any = false;
    for (int axis = 0; axis < 3; ++axis) {
        const int n = g.extent(axis);
        if (n == 1) continue;
        if ((n + 1) / 2 < 4) return false;
        any = true;
    }
    return any;
}

} // namespace

Pyramid build_pyramid(const ScalarField& img, int levels) {
    if (levels < 1) throw std::invalid_argument("build_pyramid: levels must be >= 1");
    std::vector<ScalarField> fine_to_coarse;
    fine_to_coarse.push_back(img);
    while (int(fine_to_coarse.size()) < levels && can_coarsen(fine_to_coarse.back().grid()))
        fine_to_coarse.push_back(coarsen(fine_to_coarse.back()));
    Pyramid p;
    p.levels.assign(fine_to_coarse.rbegin(), fine_to_coarse.rend());
    return p;
}

VectorField upsample_deformation(const VectorField& u, const Grid& fine) {
    const Grid& cg = u.grid();
    for (int axis = 0; axis < 3; ++axis) {
        const int cn = cg.extent(axis), fn = fine.extent(axis);
        if (cn != (fn + 1) / 2 && !(cn == 1 && fn == 1))
            throw std::invalid_argument("upsample_deformation: incompatible extents " +
                                        to_string(cg) + " -> " + to_string(fine));
    }
    if (fine.dim() != u.dim())
        throw std::invalid_argument("upsample_deformation: dimensionality changes from " +
                                    to_string(cg) + " to " + to_string(fine));

    VectorField out(fine);
    ScalarField comp(cg);
    for (int c = 0; c < u.dim(); ++c) {
        std::copy(u.component(c), u.component(c) + u.plane(), comp.data());
        double* oc = out.component(c);
        const std::size_t rows = std::size_t(fine.ny) * fine.nz;
        parallel_for(rows, [&](std::size_t r0, std::size_t r1) {
            for (std::size_t r = r0; r < r1; ++r) {
                const std::size_t b = r * fine.nx;
                const int j = int(r % fine.ny);
                const int k = int(r / fine.ny);
                for (int i = 0; i < fine.nx; ++i)
                    oc[b + i] = 2.0 * sample_clamped(comp, 0.5 * i, 0.5 * j, 0.5 * k);
            }
        });
    }
    return out;
}

} // namespace cmfkit
