#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cowgraph/geometry.hpp"
#include "cowgraph/labels.hpp"
#include "cowgraph/volume.hpp"

namespace cow {

struct GraphNode {
    Vec3 pos;
    int degree = 0;
};

struct GraphEdge {
    int a = -1;
    int b = -1;
    std::vector<Vec3> points;  ///< points.front() == node a, points.back() == node b
    Label label = label::Background;
    std::vector<double> ce_radius;   ///< per point, NaN when unavailable
    std::vector<double> mis_radius;  ///< per point, NaN when unavailable

    double length() const;
    bool is_loop() const { return a == b; }
    int other(int n) const { return n == a ? b : a; }
};

/// Undirected multigraph; node and edge ids are their vector positions.
struct CenterlineGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;

    void recompute_degrees();
    /// Edge ids incident to a node (a self-loop appears once).
    std::vector<int> incident(int node) const;
    /// Connected components over nodes (isolated nodes included).
    int component_count() const;
    /// E - V + C.
    int cycle_rank() const;
    /// Drops the flagged edges, then nodes with no edges when `drop_isolated`, renumbering ids.
    void remove_edges(const std::vector<char>& drop, bool drop_isolated);
};

struct BuildOptions {
    int min_label_run = 3;  ///< label runs shorter than this (voxels) are absorbed by neighbours
};

/// Traces a labeled one-voxel-wide skeleton (nonzero voxel = label code) into a graph.
/// Nodes sit at voxels whose 26-neighbour count differs from 2 (adjacent junction voxels merge into one
/// node); label changes along a chain become degree-2 nodes; a closed ring gets one anchor node.
CenterlineGraph build_graph(const Mask& labeled_skeleton, const BuildOptions& opt = {});

enum class NodeType { Start, End, Bifurcation, Boundary };
const char* node_type_name(NodeType t);

struct AnatomicalNode {
    int id = -1;  ///< graph node id
    int degree = 0;
    Label label = label::Background;  ///< segment the entry belongs to
    NodeType type = NodeType::Boundary;
    std::string name;
    Vec3 pos;

    std::string segment() const { return std::string(label_name(label)); }
};

struct NodeExtraction {
    std::vector<AnatomicalNode> nodes;
    std::vector<std::string> diagnostics;
};

/// Named landmarks per segment using the fixed node vocabulary.
NodeExtraction extract_anatomical_nodes(const CenterlineGraph& g);

/// Finds an extracted node by segment and name.
std::optional<AnatomicalNode> find_node(const std::vector<AnatomicalNode>& nodes, Label segment,
                                        const std::string& name);

struct RuleOptions {
    double self_loop_factor = 4.0;  ///< self-loop removed when shorter than factor * boundary distance
    double parallel_factor = 4.0;   ///< parallel pair pruned when the loop is shorter than factor * max distance
};

/// Removes short self-loops, short same-label parallel edges and edges whose label is incompatible with
/// every other label at one of their nodes; then drops isolated nodes and merges same-label degree-2 nodes.
CenterlineGraph remove_spurious_edges(const CenterlineGraph& g, const DistanceField& dist, const RuleOptions& opt = {});

/// Joins the two edges at every degree-2 node whose edges share a label.
CenterlineGraph merge_degree2_nodes(const CenterlineGraph& g);

struct MergeResult {
    CenterlineGraph graph;
    std::vector<std::string> diagnostics;
};

/// Replaces the main graph's edges of each part's labels with the part's edges; part ends are snapped to
/// main-graph nodes within `snap_mm`. Parts without any snappable end are skipped with a diagnostic.
MergeResult merge_single_label_graphs(const CenterlineGraph& main, const std::vector<CenterlineGraph>& parts,
                                      double snap_mm = 1.0);

struct SmoothOptions {
    int window = 5;
    double trim_cap_mm = 1.0;
};

/// Trims min(boundary distance, cap) of arc length at degree-1 termini, then applies a moving average
/// to interior polyline points (endpoints fixed).
CenterlineGraph trim_and_smooth(const CenterlineGraph& g, const DistanceField& dist, const SmoothOptions& opt = {});

/// Boundary distance at a world point (nearest voxel; 0 outside the grid).
double sample_distance(const DistanceField& dist, const Vec3& p);

/// Moving average with the window clipped at the ends; first and last points are kept.
std::vector<Vec3> moving_average(const std::vector<Vec3>& pts, int window);

/// Removes `amount` of arc length from the front of a polyline, interpolating the new first point.
std::vector<Vec3> trim_front(const std::vector<Vec3>& pts, double amount);

double polyline_length(const std::vector<Vec3>& pts);

}  // namespace cow
