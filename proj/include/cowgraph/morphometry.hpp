#pragma once

#include <array>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cowgraph/graph.hpp"
#include "cowgraph/variants.hpp"

namespace cow {

struct SplineOptions {
    int knot_every = 3;          ///< one interior knot per this many input points
    double smoothing_mm = 2.0;   ///< roughness length scale; 0 disables the penalty
};

/// Clamped cubic B-spline over [0, 1] (chord-length parameter).
class SplineCurve {
public:
    SplineCurve() = default;
    SplineCurve(std::vector<double> knots, std::vector<Vec3> control);

    Vec3 point(double u) const;
    Vec3 derivative(double u, int order) const;

    /// Polyline length over `samples` uniform parameter values.
    double length(int samples = 1000) const;
    /// Mean of |c' x c''| / |c'|^3 over `samples` uniform parameter values.
    double mean_curvature(int samples = 100) const;

    const std::vector<Vec3>& control() const { return control_; }
    const std::vector<double>& knots() const { return knots_; }

private:
    std::vector<double> knots_;
    std::vector<Vec3> control_;
};

/// Least-squares cubic fit with endpoints interpolated. Fewer than 4 points give a straight segment.
SplineCurve fit_segment_spline(const std::vector<Vec3>& pts, const SplineOptions& opt = {});

enum class Modality { CTA, MRA };
const char* modality_name(Modality m);

struct SegmentDefinition {
    std::string name;
    Label label = label::Background;
    Label origin_segment = label::Background;
    std::string origin_node;
    Label target_segment = label::Background;
    std::string target_node;
    double offset_mm = 0.0;                 ///< skipped arc length from the origin
    std::optional<double> max_length_mm;    ///< window or truncation cap
};

struct SegmentPath {
    std::vector<Vec3> points;
    std::vector<double> ce, mis;
    std::vector<char> near_junction;  ///< excluded from medians
};

/// Graph node of a named landmark. Boundary names fall back to any node shared by edges of both labels.
std::optional<int> resolve_node(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes, Label segment,
                                const std::string& name);

/// Polyline between the definition's nodes (restricted to its label), cut to [offset, offset + max].
std::optional<SegmentPath> extract_segment_path(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                                                const SegmentDefinition& def);

struct SegmentFeatures {
    std::string name;
    bool present = false;
    double median_radius_mm = std::numeric_limits<double>::quiet_NaN();
    double length_mm = std::numeric_limits<double>::quiet_NaN();
    double endpoint_distance_mm = std::numeric_limits<double>::quiet_NaN();
    double tortuosity = std::numeric_limits<double>::quiet_NaN();
    double volume_mm3 = std::numeric_limits<double>::quiet_NaN();
    double mean_curvature_per_mm = std::numeric_limits<double>::quiet_NaN();
};

/// Features of an explicit path (radii may be empty).
SegmentFeatures features_from_path(const std::string& name, const SegmentPath& path, const SplineOptions& opt = {});

SegmentFeatures compute_segment_features(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                                         const SegmentDefinition& def, const SplineOptions& opt = {});

/// Segment list for a case; fallback windows replace missing communicating arteries.
std::vector<SegmentDefinition> define_subsegments(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                                                  const VariantReport& variants, Modality modality);

inline constexpr double kA1FallbackMm = 15.57;
inline constexpr double kP1FallbackMm = 7.18;
inline constexpr double kC7FallbackMm = 7.08;
inline constexpr double kCapMm = 10.0;
inline constexpr double kC6CapCtaMm = 5.0;

class NoExponent : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solves r_p^x = r_c1^x + r_c2^x by bisection on [0.1, 20].
double solve_bifurcation_exponent(double r_p, double r_c1, double r_c2);
/// |1 - (r_c1/r_p)^x - (r_c2/r_p)^x|
double exponent_residual(double r_p, double r_c1, double r_c2, double x);

struct BifurcationRoles {
    int node = -1;
    int parent = -1, child1 = -1, child2 = -1;  ///< incident edge ids
};

struct BifurcationFeatures {
    std::string name;
    bool present = false;
    bool major = false;
    std::array<double, 3> angles_deg{};
    bool reduced_offset = false;
    bool has_radius = false;
    double r_p = 0, r_c1 = 0, r_c2 = 0;
    double d1 = 0, d2 = 0;
    int n_average = 3;
    double ratio_c1_p = 0, ratio_c2_p = 0, ratio_c1_c2 = 0;
    double radius_sum_ratio = 0, area_sum_ratio = 0;
    std::optional<double> exponent;
    std::vector<std::string> flags;
};

/// Angles (parent, child1), (parent, child2), (child1, child2) from points `offset_mm` along each branch.
std::array<double, 3> compute_bifurcation_angles(const CenterlineGraph& g, const BifurcationRoles& roles,
                                                 double offset_mm = 1.0, bool* reduced = nullptr);

/// Radius sampling at max(d1, d2) from the node, d_i being the distance to child i's label boundary.
void compute_bifurcation_radius_features(const CenterlineGraph& g, const BifurcationRoles& roles,
                                         BifurcationFeatures& out);

/// Major (BA, both ICA) and minor (Pcom on PCA and ICA, Acom on both ACA) bifurcations.
std::vector<BifurcationFeatures> compute_all_bifurcations(const CenterlineGraph& g,
                                                          const std::vector<AnatomicalNode>& nodes);

/// Incident edge roles of a named bifurcation; nullopt when the node or a role is missing.
std::optional<BifurcationRoles> bifurcation_roles(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                                                  const std::string& which, Side side = Side::Right);

}  // namespace cow
