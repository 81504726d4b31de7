#pragma once

#include <array>
#include <cstdint>

#include "cowgraph/volume.hpp"

namespace cow {

/// 3x3x3 binary neighbourhood, index (dk+1)*9 + (dj+1)*3 + (di+1); the center is index 13.
using Neighborhood = std::array<std::uint8_t, 27>;

/// Topological-number test with (26, 6) connectivity: removing the center preserves both the
/// number of foreground 26-components and background 6-components in the neighbourhood.
bool is_simple_point(const Neighborhood& n);

/// Bit-packed variant; bit p set for foreground neighbour p (center bit ignored).
bool is_simple_point_bits(std::uint32_t bits);

/// Topology-preserving thinning of the nonzero voxels of `m` to a one-voxel-wide curve skeleton.
/// Removal order follows `dist` (ascending) then voxel index; computed from `m` when null.
Mask thin_mask(const Mask& m, const DistanceField* dist = nullptr);

/// Deletes terminal branches whose arc length is below bulge_size times the boundary distance at
/// their attachment voxel; repeats (with re-thinning) until stable.
Mask prune_spurs(const Mask& skeleton, double bulge_size, const DistanceField& dist);

/// Convenience: thin then prune with the given bulge size.
Mask skeletonize(const Mask& m, double bulge_size = 1.0);

}  // namespace cow
