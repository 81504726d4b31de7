#include "cowgraph/pipeline.hpp"

#include <cmath>

#include "cowgraph/export.hpp"
#include "cowgraph/nifti.hpp"
#include "cowgraph/skeletonize.hpp"
#include "cowgraph/volume_ops.hpp"

namespace cow {

namespace {

bool needs_resample(const GridGeometry& g, double target)
{
    return std::abs(g.spacing.x - target) > 1e-6 || std::abs(g.spacing.y - target) > 1e-6 ||
           std::abs(g.spacing.z - target) > 1e-6;
}

template <typename F>
auto stage(const char* name, F&& f)
{
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

}  // namespace

Mask read_mask(const std::filesystem::path& path)
{
    return read_nifti_file(path).to_labels();
}

void run_skeleton_stages(const Mask& mask_in, const Mask* external, const PipelineConfig& cfg, PipelineResult& r)
{
    if (cfg.mode == SkeletonMode::External && external == nullptr)
        throw StageError("skeleton", "external-skeleton mode needs a skeleton volume");
    const Vec3 target{cfg.target_spacing_mm, cfg.target_spacing_mm, cfg.target_spacing_mm};

    Mask mask = stage("resample", [&] {
        for (Label v : mask_in.data)
            if (!is_valid_label(v)) throw std::runtime_error("voxel value " + std::to_string(v) + " is not a label code");
        return needs_resample(mask_in.geometry, cfg.target_spacing_mm) ? resample_nearest(mask_in, target) : mask_in;
    });
    r.labels = stage("filter", [&] { return filter_small_components(mask, cfg.rel_diag); });
    if (count_nonzero(r.labels) == 0) throw StageError("filter", "mask is empty");
    const Mask bin = binarize(r.labels);
    r.dist = stage("distance", [&] { return euclidean_distance_field(bin); });

    Mask skel = stage("skeleton", [&] {
        if (cfg.mode == SkeletonMode::External) {
            Mask s = binarize(*external);
            if (needs_resample(s.geometry, cfg.target_spacing_mm)) s = resample_nearest(s, target);
            if (!same_grid(s.geometry, r.labels.geometry))
                throw std::runtime_error("skeleton grid does not match the mask grid");
            return s;
        }
        const Mask thin = thin_mask(bin, &r.dist);
        return prune_spurs(thin, cfg.bulge_size, r.dist);
    });
    const Mask labeled = stage("transfer_labels", [&] { return transfer_labels(skel, r.labels); });
    const Mask connected = stage("connect", [&] { return connect_all(labeled, r.labels, r.dist, cfg.astar, &r.connect); });
    // Bridges can leave short triangles; a thinning pass removes them without changing topology.
    r.skeleton = stage("connect", [&] {
        const Mask thin = thin_mask(connected, &r.dist);
        Mask out(thin.geometry, 0);
        for (std::size_t i = 0; i < thin.size(); ++i)
            if (thin[i]) out[i] = connected[i];
        return out;
    });
}

void run_graph_stages(const PipelineConfig& cfg, PipelineResult& r)
{
    CenterlineGraph g = stage("graph", [&] { return build_graph(r.skeleton, cfg.build); });
    g = stage("rules", [&] { return remove_spurious_edges(g, r.dist, cfg.rules); });
    g = stage("smooth", [&] { return trim_and_smooth(g, r.dist, cfg.smooth); });
    NodeExtraction ex = stage("nodes", [&] { return extract_anatomical_nodes(g); });
    r.nodes = std::move(ex.nodes);
    r.diagnostics.insert(r.diagnostics.end(), ex.diagnostics.begin(), ex.diagnostics.end());
    RadiiReport rr = stage("radii", [&] { return annotate_radii(g, r.labels, cfg.sections); });
    r.graph = std::move(rr.graph);
    r.diagnostics.insert(r.diagnostics.end(), rr.diagnostics.begin(), rr.diagnostics.end());
    r.variants = stage("variants", [&] { return classify_variants(r.labels, r.graph, r.nodes, cfg.variants); });
    r.diagnostics.insert(r.diagnostics.end(), r.variants.diagnostics.begin(), r.variants.diagnostics.end());
    stage("features", [&] {
        for (const auto& def : define_subsegments(r.graph, r.nodes, r.variants, cfg.modality))
            r.segments.push_back(compute_segment_features(r.graph, r.nodes, def, cfg.spline));
        r.bifurcations = compute_all_bifurcations(r.graph, r.nodes);
        return 0;
    });
}

PipelineResult run_pipeline(const Mask& mask, const Mask* external_skeleton, const PipelineConfig& cfg)
{
    PipelineResult r;
    run_skeleton_stages(mask, external_skeleton, cfg, r);
    run_graph_stages(cfg, r);
    return r;
}

void write_bundle(const PipelineResult& r, const std::filesystem::path& outdir)
{
    stage("export", [&] {
        std::filesystem::create_directories(outdir);
        write_file_atomic(outdir / "graph.vtk", vtk_polydata(r.graph));
        write_file_atomic(outdir / "nodes.json", nodes_json(r.nodes));
        write_file_atomic(outdir / "variants.json", variants_json(r.variants));
        write_file_atomic(outdir / "features.json", features_json(r.segments, r.bifurcations));
        write_nifti_file(Volume(r.skeleton), outdir / "skeleton.nii");
        return 0;
    });
}

PipelineResult run_pipeline_files(const PipelineConfig& cfg, const std::filesystem::path& mask_path,
                                  const std::optional<std::filesystem::path>& skeleton_path)
{
    const Mask mask = read_mask(mask_path);
    std::optional<Mask> skel;
    if (skeleton_path) skel = read_nifti_file(*skeleton_path).to_binary();
    PipelineConfig c = cfg;
    if (skel && c.mode == SkeletonMode::Thinning) c.mode = SkeletonMode::External;
    PipelineResult r = run_pipeline(mask, skel ? &*skel : nullptr, c);
    write_bundle(r, cfg.outdir);
    return r;
}

}  // namespace cow
