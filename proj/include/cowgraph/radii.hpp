#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cowgraph/graph.hpp"
#include "cowgraph/volume.hpp"

namespace cow {

struct CrossSectionOptions {
    double cell_mm = 0.1;
    double half_extent_mm = 10.0;
    double mis_percentile = 10.0;
};

struct CrossSection {
    Vec3 center;
    Vec3 tangent;
    double area_mm2 = 0.0;
    int cells = 0;
    std::vector<double> contour_mm;  ///< center-to-boundary distances

    double ce_radius() const;
    double mis_radius(double percentile = 10.0) const;
};

class SectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Samples the plane through `point` orthogonal to `tangent` and keeps the in-plane region of `label`
/// connected to the center cell. Throws SectionError if the center cell is not of that label.
CrossSection sample_cross_section(const Mask& labels, const Vec3& point, const Vec3& tangent, Label label,
                                  const CrossSectionOptions& opt = {});

/// Linear-interpolated percentile (0..100) of a non-empty sample.
double percentile(std::vector<double> v, double p);

struct RadiiReport {
    CenterlineGraph graph;
    std::vector<std::string> diagnostics;
};

/// Fills ce_radius / mis_radius for every polyline point. Failed sections copy the nearest valid point
/// of the same edge; an edge without any valid section keeps NaN and yields a diagnostic.
RadiiReport annotate_radii(const CenterlineGraph& g, const Mask& labels, const CrossSectionOptions& opt = {});

/// Unit tangent at point i by central differences (one-sided at the ends).
Vec3 polyline_tangent(const std::vector<Vec3>& pts, std::size_t i);

}  // namespace cow
