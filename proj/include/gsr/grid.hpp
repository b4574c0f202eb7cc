#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace gsr {

// Below this area (in units of pixel_area) no pixel can be fully covered,
// whatever the offset: the smallest disk containing a unit square has area pi/2.
inline constexpr double kGuaranteedMissRatio = std::numbers::pi / 2.0;

// Above this area (in units of pixel_area) at least one pixel is fully covered
// for every offset. Worst case is the center sitting on a grid vertex, where the
// nearest pixel's far corner lies at distance sqrt(2) pixel sides.
inline constexpr double kGuaranteedHitRatio = 2.0 * std::numbers::pi;

// Absolute slack on corner-distance comparisons, in units of pixel_side.
// Shared with the test oracle so ties resolve identically.
inline constexpr double kCornerTol = 1e-12;

struct GridSpec {
    double pixel_area;  // um^2
    double pixel_side;  // um

    explicit GridSpec(double area)
        : pixel_area(area), pixel_side(std::sqrt(area)) {
        if (!(area > 0.0) || !std::isfinite(area))
            throw std::invalid_argument("GridSpec: pixel_area must be positive");
    }
};

struct Particle {
    double area;    // um^2
    double radius;  // um

    explicit Particle(double a)
        : area(a), radius(std::sqrt(a / std::numbers::pi)) {
        if (!(a > 0.0) || !std::isfinite(a))
            throw std::invalid_argument("Particle: area must be positive");
    }
};

// Position of the particle center modulo one grid period, each in [0, pixel_side).
struct Offset {
    double u;
    double v;
};

struct Registration {
    std::int64_t covered_pixels;
    double area_b;  // covered_pixels * pixel_area
};

// Number of unit-grid squares entirely contained in the closed disk of area
// `area_ratio` centered at (u, v). A square is contained iff its farthest
// corner lies within the (slackened) radius; corners exactly on the circle
// count as inside.
std::int64_t covered_pixels_unit(double area_ratio, double u, double v);

Registration register_particle(const Particle& particle, const GridSpec& grid,
                               const Offset& offset);

// Registration on a unit grid; exposes that the result depends only on A / px.
Registration register_dimensionless(double area_ratio, double u = 0.0, double v = 0.0);

}  // namespace gsr
