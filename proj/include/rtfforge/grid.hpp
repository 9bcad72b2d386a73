#pragma once

// Uniform sampling lattices over the acoustic space.

#include <array>
#include <cmath>
#include <vector>

#include "rtfforge/common.hpp"
#include "rtfforge/room.hpp"

namespace rtfforge {

struct SamplingGrid {
    Vec3 origin;
    Vec3 extent;
    double spacing = 0.0;
    std::array<std::size_t, 3> counts{0, 0, 0};  // points per axis, inclusive ends

    std::size_t size() const { return counts[0] * counts[1] * counts[2]; }

    // row-major with z fastest: consecutive indices step through z first
    std::size_t index_of(std::size_t i, std::size_t j, std::size_t k) const {
        return (i * counts[1] + j) * counts[2] + k;
    }

    std::array<std::size_t, 3> coords_of(std::size_t index) const {
        std::array<std::size_t, 3> c;
        c[2] = index % counts[2];
        index /= counts[2];
        c[1] = index % counts[1];
        c[0] = index / counts[1];
        return c;
    }

    Vec3 point(std::size_t i, std::size_t j, std::size_t k) const {
        return {origin.x + static_cast<double>(i) * spacing,
                origin.y + static_cast<double>(j) * spacing,
                origin.z + static_cast<double>(k) * spacing};
    }

    // nearest lattice coordinates of an arbitrary position, clamped per axis
    std::array<std::size_t, 3> nearest_coords(const Vec3& p) const {
        std::array<std::size_t, 3> out;
        const double raw[3] = {(p.x - origin.x) / spacing, (p.y - origin.y) / spacing,
                               (p.z - origin.z) / spacing};
        for (int a = 0; a < 3; ++a) {
            const double r = std::round(raw[a]);
            const double clamped =
                std::min(std::max(r, 0.0), static_cast<double>(counts[a] - 1));
            out[a] = static_cast<std::size_t>(clamped);
        }
        return out;
    }
};

inline SamplingGrid build_grid(const Vec3& origin, const Vec3& extent, double spacing) {
    if (spacing <= 0.0) throw BoundsError("grid spacing must be positive");
    if (extent.x < 0.0 || extent.y < 0.0 || extent.z < 0.0)
        throw BoundsError("grid extent must be non-negative");
    SamplingGrid g;
    g.origin = origin;
    g.extent = extent;
    g.spacing = spacing;
    // the 1e-9 slack keeps exact multiples from losing their endpoint to
    // floating-point division
    g.counts = {static_cast<std::size_t>(std::floor(extent.x / spacing + 1e-9)) + 1,
                static_cast<std::size_t>(std::floor(extent.y / spacing + 1e-9)) + 1,
                static_cast<std::size_t>(std::floor(extent.z / spacing + 1e-9)) + 1};
    return g;
}

// Every lattice point must keep this clearance from the walls.
inline constexpr double kWallClearance = 0.1;

inline void ensure_grid_inside(const RoomSpec& room, const SamplingGrid& grid,
                               double clearance = kWallClearance) {
    const Vec3 lo = grid.origin;
    const Vec3 hi = grid.point(grid.counts[0] - 1, grid.counts[1] - 1, grid.counts[2] - 1);
    const bool ok = lo.x >= clearance && lo.y >= clearance && lo.z >= clearance &&
                    hi.x <= room.dims.x - clearance && hi.y <= room.dims.y - clearance &&
                    hi.z <= room.dims.z - clearance;
    if (!ok) throw BoundsError("sampling grid escapes the room (clearance " +
                               std::to_string(clearance) + " m)");
}

inline std::vector<Pose> grid_poses(const SamplingGrid& grid) {
    std::vector<Pose> poses;
    poses.reserve(grid.size());
    for (std::size_t i = 0; i < grid.counts[0]; ++i)
        for (std::size_t j = 0; j < grid.counts[1]; ++j)
            for (std::size_t k = 0; k < grid.counts[2]; ++k) {
                Pose p;
                p.position = grid.point(i, j, k);
                poses.push_back(p);
            }
    return poses;
}

}  // namespace rtfforge
