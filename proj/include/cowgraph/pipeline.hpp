#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cowgraph/connector.hpp"
#include "cowgraph/graph.hpp"
#include "cowgraph/morphometry.hpp"
#include "cowgraph/radii.hpp"
#include "cowgraph/variants.hpp"
#include "cowgraph/volume.hpp"

namespace cow {

enum class SkeletonMode { Thinning, External };

struct PipelineConfig {
    Modality modality = Modality::MRA;
    SkeletonMode mode = SkeletonMode::Thinning;
    double target_spacing_mm = 0.25;
    double bulge_size = 1.0;
    double rel_diag = 0.05;
    AStarParams astar{};
    SmoothOptions smooth{};
    RuleOptions rules{};
    BuildOptions build{};
    CrossSectionOptions sections{};
    SplineOptions spline{};
    VariantOptions variants{};
    std::filesystem::path outdir = ".";
};

/// Failure of one pipeline stage; what() starts with the stage name.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error(stage + ": " + message), stage_(std::move(stage))
    {
    }
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct PipelineResult {
    Mask labels;             ///< resampled, filtered mask
    DistanceField dist;
    Mask skeleton;           ///< labeled, connected skeleton
    ConnectStats connect;
    CenterlineGraph graph;   ///< final annotated graph
    std::vector<AnatomicalNode> nodes;
    VariantReport variants;
    std::vector<SegmentFeatures> segments;
    std::vector<BifurcationFeatures> bifurcations;
    std::vector<std::string> diagnostics;
};

/// Stages up to and including the labeled, connected skeleton.
void run_skeleton_stages(const Mask& mask, const Mask* external_skeleton, const PipelineConfig& cfg,
                         PipelineResult& r);

/// Graph, nodes, radii, variants and features from a result whose skeleton stages ran.
void run_graph_stages(const PipelineConfig& cfg, PipelineResult& r);

/// Full in-memory pipeline.
PipelineResult run_pipeline(const Mask& mask, const Mask* external_skeleton, const PipelineConfig& cfg);

/// Reads the inputs, runs everything and writes graph.vtk, nodes.json, variants.json, features.json and
/// skeleton.nii into cfg.outdir. NiftiError propagates for unreadable inputs.
PipelineResult run_pipeline_files(const PipelineConfig& cfg, const std::filesystem::path& mask_path,
                                  const std::optional<std::filesystem::path>& skeleton_path);

void write_bundle(const PipelineResult& r, const std::filesystem::path& outdir);

/// Reads a NIfTI file as a uint8 label mask (integer-valued other kinds are converted).
Mask read_mask(const std::filesystem::path& path);

}  // namespace cow
