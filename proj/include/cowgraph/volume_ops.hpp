#pragma once

#include <cstdint>
#include <vector>

#include "cowgraph/volume.hpp"

namespace cow {

/// Nearest-neighbour resampling onto a grid with the given spacing covering the same physical extent.
/// Output dims are ceil(dim * spacing / target); the grids share their outer corner.
Mask resample_nearest(const Mask& m, const Vec3& target_spacing);

/// 26-connected component labeling of nonzero voxels.
struct Components {
    Grid<std::int32_t> id;  ///< 0 for background, 1..count otherwise (in order of first voxel)
    int count = 0;
};
Components label_components(const Mask& m);
int count_components(const Mask& m);

/// Physical bounding-box diagonal per component (index 0 unused).
std::vector<double> component_diagonals(const Components& c);

/// Removes 26-connected components whose bounding-box diagonal is below `rel_diag` times the largest
/// diagonal among all components.
Mask filter_small_components(const Mask& m, double rel_diag = 0.05);

/// Exact Euclidean distance (mm) from every nonzero voxel center to the nearest zero voxel center.
/// Voxels outside the grid count as background.
DistanceField euclidean_distance_field(const Mask& m);

/// Same transform returning squared distances in mm^2 (exact for integer-valued geometry).
Grid<double> squared_distance_field(const Mask& m);

/// 1 where m != 0.
Mask binarize(const Mask& m);
/// Voxels of m equal to `code`.
Mask select_label(const Mask& m, std::uint8_t code);
/// One-voxel 26-neighbourhood dilation.
Mask dilate(const Mask& m);

std::size_t count_nonzero(const Mask& m);

}  // namespace cow
