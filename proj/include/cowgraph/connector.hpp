#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "cowgraph/volume.hpp"

namespace cow {

/// Search priority weights: f(n) = g(n) + w1 * |n - goal| - w2 * dist(n).
struct AStarParams {
    double w1 = 1.0;
    double w2 = 2.0;
};

struct VoxelPath {
    std::vector<std::size_t> voxels;  ///< flat indices, consecutive entries 26-adjacent
    double length_mm = 0.0;
};

class NoPath : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Gives every skeleton voxel the code of the nearest labeled mask voxel (ties: smaller code).
/// Throws std::runtime_error when a skeleton voxel has no labeled voxel within `max_mm`.
Mask transfer_labels(const Mask& skeleton, const Mask& labels, double max_mm = 5.0);

/// Best-first search between two disjoint voxel sets through `domain` (nonzero = traversable).
/// Starts at the closest voxel pair; returns once any voxel of `b` is expanded. Throws NoPath.
VoxelPath connect_pair(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, const Mask& domain,
                       const DistanceField& dist, const AStarParams& p = {});

/// Straight voxel line between two voxels (26-connected); the last-resort bridge.
std::vector<std::size_t> rasterize_line(const GridGeometry& g, std::size_t from, std::size_t to);

struct ConnectStats {
    int within_label = 0;    ///< bridges added while merging same-label fragments
    int across_labels = 0;   ///< bridges between adjacent labels
    int leftover = 0;        ///< bridges joining remaining pieces inside one mask component
    int widened_domain = 0;  ///< searches that needed a wider domain than the first choice
    int rasterized = 0;      ///< bridges drawn as straight lines
    int seeded = 0;          ///< mask components without skeleton that received a seed voxel
};

/// Repairs a fragmented labeled skeleton so that each foreground component of `labels` holds exactly
/// one skeleton component. Existing voxels are never removed; new voxels take transferred labels.
Mask connect_all(const Mask& labeled_skeleton, const Mask& labels, const DistanceField& dist,
                 const AStarParams& p = {}, ConnectStats* stats = nullptr);

}  // namespace cow
