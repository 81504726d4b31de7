#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cowgraph/evaluator.hpp"
#include "cowgraph/graph.hpp"
#include "cowgraph/morphometry.hpp"
#include "cowgraph/variants.hpp"

namespace cow {

/// Legacy ASCII VTK polydata: one polyline cell per edge, point scalar "degree", cell scalars
/// "labels", "ce_radius" and "mis_radius" (per-edge means, -1 when unavailable).
std::string vtk_polydata(const CenterlineGraph& g);

/// Array of {id, degree, label, segment, name, node_type, coords_mm}.
std::string nodes_json(const std::vector<AnatomicalNode>& nodes);

/// {anterior, posterior, fetal, fenestrations} boolean groups.
std::string variants_json(const VariantReport& r);

/// {segments: [...], bifurcations: [...]}; minor bifurcations carry angles only.
std::string features_json(const std::vector<SegmentFeatures>& segments,
                          const std::vector<BifurcationFeatures>& bifurcations);

std::string eval_json(const EvalReport& r);

/// Value rounded to 6 significant digits (the precision used in every JSON export).
double round_sig6(double x);

void export_vtk_polydata(const CenterlineGraph& g, const std::filesystem::path& path);

}  // namespace cow
