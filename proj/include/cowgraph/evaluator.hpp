#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cowgraph/graph.hpp"
#include "cowgraph/variants.hpp"
#include "cowgraph/volume.hpp"

namespace cow {

/// 2|a and b| / (|a| + |b|) over nonzero voxels; 1 when both are empty. Throws on grid mismatch.
double dice(const Mask& a, const Mask& b);

/// |components(a) - components(b)| with 26-connectivity.
int betti0_error(const Mask& a, const Mask& b);

struct Thickness {
    double mean_mm = 0.0;
    double p99_mm = 0.0;
};

/// Per skeleton voxel, the shortest axis-aligned foreground run through it (mm); mean and p99.
Thickness skeleton_thickness(const Mask& skeleton);

struct DistanceStats {
    double mean_mm = 0.0;
    double sd_mm = 0.0;
    int support = 0;
};

struct NodeDistanceReport {
    DistanceStats major, minor, boundary, overall;
    int unmatched_pred = 0;
    int unmatched_ref = 0;
};

/// Bifurcation categories used for node statistics.
bool is_major_bifurcation(const AnatomicalNode& n);

/// Matches nodes by (segment, name); duplicates of one key are paired by minimum total distance.
/// Start/end nodes are excluded from every category.
NodeDistanceReport node_distance_stats(const std::vector<AnatomicalNode>& pred, const std::vector<AnatomicalNode>& ref);

/// Micro-averaged F1 over every binary slot pooled across paired cases; 1 when both sides are all-negative.
double variant_f1(const std::vector<VariantReport>& pred, const std::vector<VariantReport>& ref);

struct Agreement {
    double medre = 0.0;
    std::optional<double> pearson_r;  ///< missing with fewer than 2 pairs or zero variance
    int excluded_zero_ref = 0;
    int pairs = 0;
};

Agreement feature_agreement(const std::vector<double>& pred, const std::vector<double>& ref);

/// Minimum-cost assignment for a rows x cols cost matrix (rows <= cols); returns the column per row.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

struct EvalReport {
    double dice = 0.0;
    int betti0_error = 0;
    Thickness thickness;
    NodeDistanceReport nodes;
    std::optional<double> variant_f1;
    std::map<std::string, Agreement> features;
};

}  // namespace cow
