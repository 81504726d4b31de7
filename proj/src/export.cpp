#include "cowgraph/export.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <json.hpp>

#include "cowgraph/nifti.hpp"

namespace cow {

using Json = nlohmann::ordered_json;

double round_sig6(double x)
{
    if (!std::isfinite(x)) return x;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return std::strtod(buf, nullptr);
}

namespace {

Json num(double x)
{
    if (!std::isfinite(x)) return nullptr;
    return round_sig6(x);
}

Json vec(const Vec3& v) { return Json::array({num(v.x), num(v.y), num(v.z)}); }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

double mean_finite(const std::vector<double>& v)
{
    double s = 0.0;
    int n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    return n ? s / n : -1.0;
}

void appendf(std::string& out, const char* fmt, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, a);
    out += buf;
}

Json stats_json(const DistanceStats& s)
{
    return Json{{"mean_mm", num(s.mean_mm)}, {"sd_mm", num(s.sd_mm)}, {"support", s.support}};
}

}  // namespace

std::string vtk_polydata(const CenterlineGraph& g)
{
    std::size_t npts = 0, conn = 0;
    for (const auto& e : g.edges) {
        npts += e.points.size();
        conn += e.points.size() + 1;
    }
    std::string out;
    out += "# vtk DataFile Version 3.0\n";
    out += "cowgraph centerline graph\n";
    out += "ASCII\n";
    out += "DATASET POLYDATA\n";
    out += "POINTS " + std::to_string(npts) + " float\n";
    for (const auto& e : g.edges)
        for (const Vec3& p : e.points) {
            appendf(out, "%.9g ", p.x);
            appendf(out, "%.9g ", p.y);
            appendf(out, "%.9g\n", p.z);
        }
    out += "LINES " + std::to_string(g.edges.size()) + " " + std::to_string(conn) + "\n";
    std::size_t base = 0;
    for (const auto& e : g.edges) {
        out += std::to_string(e.points.size());
        for (std::size_t i = 0; i < e.points.size(); ++i) out += " " + std::to_string(base + i);
        out += "\n";
        base += e.points.size();
    }
    out += "POINT_DATA " + std::to_string(npts) + "\n";
    out += "SCALARS degree int 1\nLOOKUP_TABLE default\n";
    for (const auto& e : g.edges)
        for (std::size_t i = 0; i < e.points.size(); ++i) {
            int deg = 0;
            if (i == 0) deg = g.nodes[static_cast<std::size_t>(e.a)].degree;
            if (i + 1 == e.points.size()) deg = g.nodes[static_cast<std::size_t>(e.b)].degree;
            out += std::to_string(deg) + "\n";
        }
    out += "CELL_DATA " + std::to_string(g.edges.size()) + "\n";
    out += "SCALARS labels int 1\nLOOKUP_TABLE default\n";
    for (const auto& e : g.edges) out += std::to_string(static_cast<int>(e.label)) + "\n";
    out += "SCALARS ce_radius float 1\nLOOKUP_TABLE default\n";
    for (const auto& e : g.edges) appendf(out, "%.9g\n", mean_finite(e.ce_radius));
    out += "SCALARS mis_radius float 1\nLOOKUP_TABLE default\n";
    for (const auto& e : g.edges) appendf(out, "%.9g\n", mean_finite(e.mis_radius));
    return out;
}

void export_vtk_polydata(const CenterlineGraph& g, const std::filesystem::path& path)
{
    write_file_atomic(path, vtk_polydata(g));
}

std::string nodes_json(const std::vector<AnatomicalNode>& nodes)
{
    Json arr = Json::array();
    for (const auto& n : nodes)
        arr.push_back(Json{{"id", n.id},
                           {"degree", n.degree},
                           {"label", static_cast<int>(n.label)},
                           {"segment", n.segment()},
                           {"name", n.name},
                           {"node_type", node_type_name(n.type)},
                           {"coords_mm", vec(n.pos)}});
    return dump(arr);
}

std::string variants_json(const VariantReport& r)
{
    Json j = Json::object();
    for (const auto& [slot, value] : r.slots()) {
        const auto cut = slot.find('/');
        std::string group = slot.substr(0, cut);
        if (group == "fenestration") group = "fenestrations";
        j[group][slot.substr(cut + 1)] = value;
    }
    return dump(j);
}

std::string features_json(const std::vector<SegmentFeatures>& segments,
                          const std::vector<BifurcationFeatures>& bifurcations)
{
    Json segs = Json::array();
    for (const auto& s : segments)
        segs.push_back(Json{{"name", s.name},
                            {"present", s.present},
                            {"median_radius_mm", num(s.median_radius_mm)},
                            {"length_mm", num(s.length_mm)},
                            {"endpoint_distance_mm", num(s.endpoint_distance_mm)},
                            {"tortuosity", num(s.tortuosity)},
                            {"volume_mm3", num(s.volume_mm3)},
                            {"mean_curvature_per_mm", num(s.mean_curvature_per_mm)}});
    Json bifs = Json::array();
    for (const auto& b : bifurcations) {
        Json j{{"name", b.name}, {"present", b.present}, {"major", b.major}};
        j["angles_deg"] = b.present ? Json::array({num(b.angles_deg[0]), num(b.angles_deg[1]), num(b.angles_deg[2])})
                                    : Json(nullptr);
        if (b.major) {
            const bool ok = b.present && b.has_radius;
            auto val = [ok](double x) { return ok ? num(x) : Json(nullptr); };
            j["radius_sum_ratio"] = val(b.radius_sum_ratio);
            j["area_sum_ratio"] = val(b.area_sum_ratio);
            j["individual_ratios"] =
                Json{{"c1_p", val(b.ratio_c1_p)}, {"c2_p", val(b.ratio_c2_p)}, {"c1_c2", val(b.ratio_c1_c2)}};
            j["exponent"] = b.exponent ? num(*b.exponent) : Json(nullptr);
            j["radii_mm"] = Json{{"p", val(b.r_p)}, {"c1", val(b.r_c1)}, {"c2", val(b.r_c2)}};
            j["sampling_mm"] = Json{{"d1", val(b.d1)}, {"d2", val(b.d2)}, {"n", b.n_average}};
        }
        j["support_flags"] = b.flags;
        bifs.push_back(std::move(j));
    }
    return dump(Json{{"segments", segs}, {"bifurcations", bifs}});
}

std::string eval_json(const EvalReport& r)
{
    Json feats = Json::object();
    for (const auto& [name, a] : r.features)
        feats[name] = Json{{"medre", num(a.medre)},
                           {"pearson_r", a.pearson_r ? num(*a.pearson_r) : Json(nullptr)},
                           {"pairs", a.pairs},
                           {"excluded_zero_ref", a.excluded_zero_ref}};
    Json j{{"dice", num(r.dice)},
           {"betti0_error", r.betti0_error},
           {"thickness", Json{{"mean_mm", num(r.thickness.mean_mm)}, {"p99_mm", num(r.thickness.p99_mm)}}},
           {"node_distances",
            Json{{"major", stats_json(r.nodes.major)},
                 {"minor", stats_json(r.nodes.minor)},
                 {"boundary", stats_json(r.nodes.boundary)},
                 {"overall", stats_json(r.nodes.overall)},
                 {"unmatched_pred", r.nodes.unmatched_pred},
                 {"unmatched_ref", r.nodes.unmatched_ref}}},
           {"variant_f1", r.variant_f1 ? num(*r.variant_f1) : Json(nullptr)},
           {"feature_agreement", feats}};
    return dump(j);
}

}  // namespace cow
