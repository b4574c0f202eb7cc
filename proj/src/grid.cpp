#include "gsr/grid.hpp"

namespace gsr {

namespace {

inline double reduce_mod1(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r = 0.0;  // guard against -1e-18 -> 1.0
    return r;
}

}  // namespace

std::int64_t covered_pixels_unit(double area_ratio, double u, double v) {
    if (!(area_ratio > 0.0) || !std::isfinite(area_ratio))
        throw std::invalid_argument("covered_pixels_unit: area_ratio must be positive");

    const double cu = reduce_mod1(u);
    const double cv = reduce_mod1(v);
    const double r = std::sqrt(area_ratio / std::numbers::pi);
    const double r2 = (r + kCornerTol) * (r + kCornerTol);

    // Pixels [i, i+1] x [j, j+1] intersecting the bounding box of the disk.
    const auto i_lo = static_cast<std::int64_t>(std::floor(cu - r));
    const auto i_hi = static_cast<std::int64_t>(std::ceil(cu + r));
    const auto j_lo = static_cast<std::int64_t>(std::floor(cv - r));
    const auto j_hi = static_cast<std::int64_t>(std::ceil(cv + r));

    std::int64_t count = 0;
    for (std::int64_t i = i_lo; i < i_hi; ++i) {
        // Farthest x-corner from the center; containment of the farthest corner
        // implies containment of the square by convexity of the disk.
        const double dx0 = static_cast<double>(i) - cu;
        const double dx1 = dx0 + 1.0;
        const double dx = std::max(dx0 * dx0, dx1 * dx1);
        if (dx > r2) continue;
        for (std::int64_t j = j_lo; j < j_hi; ++j) {
            const double dy0 = static_cast<double>(j) - cv;
            const double dy1 = dy0 + 1.0;
            const double dy = std::max(dy0 * dy0, dy1 * dy1);
            if (dx + dy <= r2) ++count;
        }
    }
    return count;
}

Registration register_particle(const Particle& particle, const GridSpec& grid,
                               const Offset& offset) {
    const double s = grid.pixel_side;
    const std::int64_t n =
        covered_pixels_unit(particle.area / grid.pixel_area, offset.u / s, offset.v / s);
    return Registration{n, static_cast<double>(n) * grid.pixel_area};
}

Registration register_dimensionless(double area_ratio, double u, double v) {
    const std::int64_t n = covered_pixels_unit(area_ratio, u, v);
    return Registration{n, static_cast<double>(n)};
}

}  // namespace gsr
