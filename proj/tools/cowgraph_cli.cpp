#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cowgraph/evaluator.hpp"
#include "cowgraph/export.hpp"
#include "cowgraph/nifti.hpp"
#include "cowgraph/pipeline.hpp"
#include "cowgraph/skeletonize.hpp"
#include "cowgraph/volume_ops.hpp"

namespace fs = std::filesystem;
using namespace cow;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitStage = 3;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Args {
    std::string mask, skeleton, reference, config, outdir, modality, batch;
    double spacing = 0, bulge = 0, w1 = 0, w2 = 0;
    int window = 0, jobs = 1;
};

struct Flags {
    CLI::Option *spacing = nullptr, *bulge = nullptr, *w1 = nullptr, *w2 = nullptr, *window = nullptr,
                *outdir = nullptr, *modality = nullptr;
};

Modality parse_modality(const std::string& s)
{
    if (s == "CTA" || s == "cta") return Modality::CTA;
    if (s == "MRA" || s == "mra") return Modality::MRA;
    throw UsageError("unknown modality '" + s + "' (expected CTA or MRA)");
}

// Config file first, then explicit flags on top.
PipelineConfig make_config(const Args& a, const Flags& f)
{
    PipelineConfig c;
    if (!a.config.empty()) {
        std::ifstream in(a.config);
        if (!in) throw UsageError("cannot open config " + a.config);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config " + a.config + ": " + e.what());
        }
        if (j.contains("modality")) c.modality = parse_modality(j["modality"].get<std::string>());
        if (j.contains("spacing")) c.target_spacing_mm = j["spacing"].get<double>();
        if (j.contains("bulge_size")) c.bulge_size = j["bulge_size"].get<double>();
        if (j.contains("w1")) c.astar.w1 = j["w1"].get<double>();
        if (j.contains("w2")) c.astar.w2 = j["w2"].get<double>();
        if (j.contains("window")) c.smooth.window = j["window"].get<int>();
        if (j.contains("rel_diag")) c.rel_diag = j["rel_diag"].get<double>();
        if (j.contains("self_loop_factor")) c.rules.self_loop_factor = j["self_loop_factor"].get<double>();
        if (j.contains("parallel_factor")) c.rules.parallel_factor = j["parallel_factor"].get<double>();
        if (j.contains("spline_smoothing_mm")) c.spline.smoothing_mm = j["spline_smoothing_mm"].get<double>();
        if (j.contains("outdir")) c.outdir = j["outdir"].get<std::string>();
    }
    if (f.modality && f.modality->count()) c.modality = parse_modality(a.modality);
    if (f.spacing && f.spacing->count()) c.target_spacing_mm = a.spacing;
    if (f.bulge && f.bulge->count()) c.bulge_size = a.bulge;
    if (f.w1 && f.w1->count()) c.astar.w1 = a.w1;
    if (f.w2 && f.w2->count()) c.astar.w2 = a.w2;
    if (f.window && f.window->count()) c.smooth.window = a.window;
    if (f.outdir && f.outdir->count()) c.outdir = a.outdir;
    if (c.target_spacing_mm <= 0.0) throw UsageError("--spacing must be positive");
    if (c.smooth.window < 1) throw UsageError("--window must be at least 1");
    return c;
}

Flags add_common(CLI::App* sub, Args& a, bool needs_skeleton)
{
    Flags f;
    sub->add_option("--mask", a.mask, "multiclass label mask (NIfTI-1)")->required();
    auto* s = sub->add_option("--skeleton", a.skeleton, "external skeleton (NIfTI-1)");
    if (needs_skeleton) s->required();
    f.modality = sub->add_option("--modality", a.modality, "CTA or MRA (default MRA)");
    f.spacing = sub->add_option("--spacing", a.spacing, "working grid spacing in mm (default 0.25)");
    f.bulge = sub->add_option("--bulge-size", a.bulge, "spur pruning factor (default 1)");
    f.w1 = sub->add_option("--w1", a.w1, "A* goal-distance weight (default 1)");
    f.w2 = sub->add_option("--w2", a.w2, "A* boundary-distance weight (default 2)");
    f.window = sub->add_option("--window", a.window, "smoothing window (default 5)");
    f.outdir = sub->add_option("--outdir", a.outdir, "output directory (default .)");
    sub->add_option("--config", a.config, "JSON config file; flags override its values");
    return f;
}

PipelineResult skeleton_part(const PipelineConfig& cfg, const Args& a)
{
    const Mask mask = read_mask(a.mask);
    std::optional<Mask> ext;
    PipelineConfig c = cfg;
    if (!a.skeleton.empty()) {
        ext = read_nifti_file(a.skeleton).to_binary();
        c.mode = SkeletonMode::External;
    }
    PipelineResult r;
    run_skeleton_stages(mask, ext ? &*ext : nullptr, c, r);
    return r;
}

void print_diagnostics(const std::vector<std::string>& d)
{
    for (const auto& s : d) std::cerr << "note: " << s << "\n";
}

int cmd_skeletonize(const PipelineConfig& cfg, const Args& a)
{
    const Mask mask = read_mask(a.mask);
    PipelineConfig c = cfg;
    const Vec3 t{c.target_spacing_mm, c.target_spacing_mm, c.target_spacing_mm};
    Mask m = mask;
    if (std::abs(m.geometry.spacing.x - t.x) > 1e-6 || std::abs(m.geometry.spacing.y - t.y) > 1e-6 ||
        std::abs(m.geometry.spacing.z - t.z) > 1e-6)
        m = resample_nearest(m, t);
    m = filter_small_components(m, c.rel_diag);
    Mask skel;
    try {
        const Mask bin = binarize(m);
        const DistanceField d = euclidean_distance_field(bin);
        skel = prune_spurs(thin_mask(bin, &d), c.bulge_size, d);
    } catch (const std::exception& e) {
        throw StageError("skeleton", e.what());
    }
    fs::create_directories(c.outdir);
    write_nifti_file(Volume(skel), c.outdir / "skeleton.nii");
    std::cout << "skeleton voxels: " << count_nonzero(skel) << "\n";
    return 0;
}

int cmd_connect(const PipelineConfig& cfg, const Args& a)
{
    const PipelineResult r = skeleton_part(cfg, a);
    fs::create_directories(cfg.outdir);
    write_nifti_file(Volume(r.skeleton), cfg.outdir / "skeleton.nii");
    std::cout << "bridges: within-label " << r.connect.within_label << ", across-label " << r.connect.across_labels
              << ", leftover " << r.connect.leftover << ", rasterized " << r.connect.rasterized << ", seeded "
              << r.connect.seeded << "\n";
    return 0;
}

int cmd_graph_like(const PipelineConfig& cfg, const Args& a, const std::string& what)
{
    PipelineResult r = skeleton_part(cfg, a);
    run_graph_stages(cfg, r);
    print_diagnostics(r.diagnostics);
    fs::create_directories(cfg.outdir);
    if (what == "graph") {
        export_vtk_polydata(r.graph, cfg.outdir / "graph.vtk");
        write_file_atomic(cfg.outdir / "nodes.json", nodes_json(r.nodes));
    } else if (what == "features") {
        write_file_atomic(cfg.outdir / "features.json", features_json(r.segments, r.bifurcations));
    } else if (what == "variants") {
        write_file_atomic(cfg.outdir / "variants.json", variants_json(r.variants));
    } else {
        write_bundle(r, cfg.outdir);
    }
    return 0;
}

int run_batch(const PipelineConfig& cfg, const Args& a)
{
    std::ifstream in(a.batch);
    if (!in) throw UsageError("cannot open batch list " + a.batch);
    std::vector<std::string> cases;
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') cases.push_back(line);
    std::atomic<std::size_t> next{0};
    std::atomic<int> failures{0};
    std::mutex io;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < cases.size();) {
            PipelineConfig c = cfg;
            fs::path p(cases[i]);
            std::string stem = p.filename().string();
            for (const char* ext : {".nii.gz", ".nii"})
                if (stem.size() > std::strlen(ext) && stem.ends_with(ext)) stem.resize(stem.size() - std::strlen(ext));
            c.outdir = cfg.outdir / stem;
            try {
                run_pipeline_files(c, p, std::nullopt);
                std::lock_guard lk(io);
                std::cout << "ok " << cases[i] << "\n";
            } catch (const std::exception& e) {
                ++failures;
                std::lock_guard lk(io);
                std::cerr << "failed " << cases[i] << ": " << e.what() << "\n";
            }
        }
    };
    std::vector<std::thread> pool;
    const int jobs = std::max(1, a.jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return failures ? kExitStage : 0;
}

std::vector<std::pair<std::string, double SegmentFeatures::*>> feature_fields()
{
    return {{"median_radius_mm", &SegmentFeatures::median_radius_mm},
            {"length_mm", &SegmentFeatures::length_mm},
            {"tortuosity", &SegmentFeatures::tortuosity},
            {"volume_mm3", &SegmentFeatures::volume_mm3},
            {"mean_curvature_per_mm", &SegmentFeatures::mean_curvature_per_mm}};
}

int cmd_eval(const PipelineConfig& cfg, const Args& a)
{
    const Mask pred = read_nifti_file(a.skeleton).to_binary();
    const Mask ref = read_nifti_file(a.reference).to_binary();
    EvalReport rep;
    try {
        rep.dice = dice(pred, ref);
        rep.betti0_error = betti0_error(pred, ref);
        rep.thickness = skeleton_thickness(pred);
    } catch (const std::exception& e) {
        throw StageError("eval", e.what());
    }
    if (!a.mask.empty()) {
        const Mask mask = read_mask(a.mask);
        PipelineConfig c = cfg;
        c.mode = SkeletonMode::External;
        const PipelineResult rp = run_pipeline(mask, &pred, c);
        const PipelineResult rr = run_pipeline(mask, &ref, c);
        rep.nodes = node_distance_stats(rp.nodes, rr.nodes);
        rep.variant_f1 = variant_f1({rp.variants}, {rr.variants});
        for (const auto& [name, field] : feature_fields()) {
            std::vector<double> p, r;
            for (const auto& sp : rp.segments)
                for (const auto& sr : rr.segments)
                    if (sp.name == sr.name && std::isfinite(sp.*field) && std::isfinite(sr.*field)) {
                        p.push_back(sp.*field);
                        r.push_back(sr.*field);
                    }
            rep.features[name] = feature_agreement(p, r);
        }
    }
    fs::create_directories(cfg.outdir);
    write_file_atomic(cfg.outdir / "eval.json", eval_json(rep));
    std::cout << eval_json(rep);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Centerline graphs and morphometry for Circle of Willis label masks"};
    app.require_subcommand(1);
    Args a;
    std::vector<std::pair<CLI::App*, Flags>> subs;

    auto* sk = app.add_subcommand("skeletonize", "thin the mask into a one-voxel skeleton");
    subs.emplace_back(sk, add_common(sk, a, false));
    auto* cn = app.add_subcommand("connect", "label and reconnect an external skeleton");
    subs.emplace_back(cn, add_common(cn, a, true));
    auto* gr = app.add_subcommand("graph", "build the labeled graph (graph.vtk, nodes.json)");
    subs.emplace_back(gr, add_common(gr, a, false));
    auto* fe = app.add_subcommand("features", "segment and bifurcation features (features.json)");
    subs.emplace_back(fe, add_common(fe, a, false));
    auto* va = app.add_subcommand("variants", "variant classification (variants.json)");
    subs.emplace_back(va, add_common(va, a, false));
    auto* pl = app.add_subcommand("pipeline", "full run writing the whole output bundle");
    {
        Flags f;
        pl->add_option("--mask", a.mask, "multiclass label mask (NIfTI-1)");
        pl->add_option("--skeleton", a.skeleton, "external skeleton (NIfTI-1)");
        f.modality = pl->add_option("--modality", a.modality, "CTA or MRA (default MRA)");
        f.spacing = pl->add_option("--spacing", a.spacing, "working grid spacing in mm (default 0.25)");
        f.bulge = pl->add_option("--bulge-size", a.bulge, "spur pruning factor (default 1)");
        f.w1 = pl->add_option("--w1", a.w1, "A* goal-distance weight (default 1)");
        f.w2 = pl->add_option("--w2", a.w2, "A* boundary-distance weight (default 2)");
        f.window = pl->add_option("--window", a.window, "smoothing window (default 5)");
        f.outdir = pl->add_option("--outdir", a.outdir, "output directory (default .)");
        pl->add_option("--config", a.config, "JSON config file; flags override its values");
        pl->add_option("--batch", a.batch, "text file with one mask path per line");
        pl->add_option("--jobs", a.jobs, "parallel workers for --batch")->check(CLI::PositiveNumber);
        subs.emplace_back(pl, f);
    }
    auto* ev = app.add_subcommand("eval", "compare a predicted skeleton with a reference skeleton");
    Flags evf;
    ev->add_option("--skeleton", a.skeleton, "predicted skeleton (NIfTI-1)")->required();
    ev->add_option("--reference", a.reference, "reference skeleton (NIfTI-1)")->required();
    ev->add_option("--mask", a.mask, "label mask; enables node, variant and feature comparison");
    evf.modality = ev->add_option("--modality", a.modality, "CTA or MRA (default MRA)");
    evf.spacing = ev->add_option("--spacing", a.spacing, "working grid spacing in mm (default 0.25)");
    evf.outdir = ev->add_option("--outdir", a.outdir, "output directory (default .)");
    ev->add_option("--config", a.config, "JSON config file");
    subs.emplace_back(ev, evf);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        Flags flags;
        CLI::App* chosen = nullptr;
        for (auto& [s, f] : subs)
            if (s->parsed()) {
                chosen = s;
                flags = f;
            }
        const PipelineConfig cfg = make_config(a, flags);
        if (chosen == sk) return cmd_skeletonize(cfg, a);
        if (chosen == cn) return cmd_connect(cfg, a);
        if (chosen == gr) return cmd_graph_like(cfg, a, "graph");
        if (chosen == fe) return cmd_graph_like(cfg, a, "features");
        if (chosen == va) return cmd_graph_like(cfg, a, "variants");
        if (chosen == ev) return cmd_eval(cfg, a);
        if (chosen == pl) {
            if (!a.batch.empty()) return run_batch(cfg, a);
            if (a.mask.empty()) throw UsageError("pipeline needs --mask or --batch");
            const PipelineResult r =
                run_pipeline_files(cfg, a.mask, a.skeleton.empty() ? std::nullopt : std::optional<fs::path>(a.skeleton));
            print_diagnostics(r.diagnostics);
            std::cout << "wrote " << (cfg.outdir / "graph.vtk").string() << " and companions (" << r.graph.nodes.size()
                      << " nodes, " << r.graph.edges.size() << " edges)\n";
            return 0;
        }
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NiftiError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
}
