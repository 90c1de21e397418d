#include "cmfkit/projections.hpp"
#include "cmfkit/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace cmfkit {

double project_interval(double v, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("project_interval: empty interval");
    return v < lo ? lo : (v > hi ? hi : v);
}

void project_ball(VectorField& p, double radius, TvNorm norm) {
    if (radius < 0.0) throw std::invalid_argument("project_ball: negative radius");
    const std::size_t n = p.plane();
    if (norm == TvNorm::anisotropic) {
        for (int c = 0; c < p.dim(); ++c) {
            double* pc = p.component(c);
            parallel_for(n, [&](std::size_t a, std::size_t b) {
                for (std::size_t i = a; i < b; ++i)
                    pc[i] = pc[i] < -radius ? -radius : (pc[i] > radius ? radius : pc[i]);
            });
        }
        return;
    }
    double* px = p.component(0);
    double* py = p.component(1);
    double* pz = p.dim() == 3 ? p.component(2) : nullptr;
    parallel_for(n, [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i < b; ++i) {
            const double zz = pz ? pz[i] : 0.0;
            const double mag = std::sqrt(px[i] * px[i] + py[i] * py[i] + zz * zz);
            if (mag > radius) {
                const double scale = radius > 0.0 ? radius / mag : 0.0;
                px[i] *= scale;
                py[i] *= scale;
                if (pz) pz[i] *= scale;
            }
        }
    });
}

} // namespace cmfkit
