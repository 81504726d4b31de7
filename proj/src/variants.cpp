#include "cowgraph/variants.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "cowgraph/morphometry.hpp"
#include "cowgraph/radii.hpp"

namespace cow {

std::vector<std::pair<std::string, bool>> VariantReport::slots() const
{
    return {
        {"anterior/L-A1", l_a1},           {"anterior/Acom", acom},         {"anterior/3rd-A2", third_a2},
        {"anterior/R-A1", r_a1},           {"posterior/L-Pcom", l_pcom},    {"posterior/L-P1", l_p1},
        {"posterior/R-P1", r_p1},          {"posterior/R-Pcom", r_pcom},    {"fetal/L-PCA", fetal_l},
        {"fetal/R-PCA", fetal_r},          {"fenestration/L-A1", fen_l_a1}, {"fenestration/Acom", fen_acom},
        {"fenestration/R-A1", fen_r_a1},   {"fenestration/L-P1", fen_l_p1}, {"fenestration/R-P1", fen_r_p1},
    };
}

double presence_volume_mm3(const VariantOptions& opt)
{
    return opt.min_voxels * std::pow(opt.reference_mm, 3.0);
}

void classify_segment_presence(const Mask& labels, const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                               VariantReport& r, const VariantOptions& opt)
{
    std::map<Label, std::size_t> counts;
    for (Label v : labels.data)
        if (v != 0) ++counts[v];
    const double vox = labels.geometry.voxel_volume();
    const double need = presence_volume_mm3(opt);
    auto present = [&](Label l) { return static_cast<double>(counts[l]) * vox >= need - 1e-12; };
    r.acom = present(label::Acom);
    r.third_a2 = present(label::ThirdA2);
    r.r_pcom = present(label::RPcom);
    r.l_pcom = present(label::LPcom);

    // A1 / P1 exist when their segment reaches the parent vessel.
    auto reaches = [&](Label seg, const char* boundary) { return resolve_node(g, nodes, seg, boundary).has_value(); };
    r.r_a1 = reaches(label::RACA, "ICA boundary");
    r.l_a1 = reaches(label::LACA, "ICA boundary");
    r.r_p1 = reaches(label::RPCA, "BA boundary");
    r.l_p1 = reaches(label::LPCA, "BA boundary");
}

namespace {

std::vector<double> path_radii(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                               const SegmentDefinition& def)
{
    std::vector<double> out, all;
    const auto path = extract_segment_path(g, nodes, def);
    if (!path) return out;
    for (std::size_t i = 0; i < path->ce.size(); ++i) {
        if (std::isnan(path->ce[i])) continue;
        all.push_back(path->ce[i]);
        if (!path->near_junction[i]) out.push_back(path->ce[i]);
    }
    return out.empty() ? all : out;
}

}  // namespace

bool fetal_rule(const std::vector<double>& pcom_radii, const std::vector<double>& p1_radii, bool pcom_present,
                const VariantOptions& opt)
{
    if (!pcom_present || pcom_radii.empty()) return false;
    if (p1_radii.empty()) return true;
    return percentile(pcom_radii, opt.fetal_percentile) >= opt.fetal_factor * percentile(p1_radii, opt.fetal_percentile);
}

bool classify_fetal_pca(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes, Side side,
                        const VariantReport& presence, std::vector<std::string>* diagnostics,
                        const VariantOptions& opt)
{
    const bool pcom_present = side == Side::Right ? presence.r_pcom : presence.l_pcom;
    const bool p1_present = side == Side::Right ? presence.r_p1 : presence.l_p1;
    if (!pcom_present) return false;
    const Label P = pca(side), C = pcom(side);
    const SegmentDefinition pcom_def{"Pcom", C, C, "ICA boundary", C, "PCA boundary", 0.0, std::nullopt};
    const auto pcom_r = path_radii(g, nodes, pcom_def);
    std::vector<double> p1_r;
    if (p1_present) {
        const bool has_bif = find_node(nodes, P, "Pcom bifurcation").has_value();
        const SegmentDefinition p1_def =
            has_bif ? SegmentDefinition{"P1", P, P, "BA boundary", P, "Pcom bifurcation", 0.0, std::nullopt}
                    : SegmentDefinition{"P1", P, P, "BA boundary", P, "PCA end", 0.0, kP1FallbackMm};
        p1_r = path_radii(g, nodes, p1_def);
    }
    const std::string s = side == Side::Right ? "R" : "L";
    if (pcom_r.empty()) {
        if (diagnostics) diagnostics->push_back(s + "-Pcom present but no centerline radii");
        return false;
    }
    if (p1_present && p1_r.empty() && diagnostics)
        diagnostics->push_back(s + "-P1 present but no centerline radii");
    return fetal_rule(pcom_r, p1_r, true, opt);
}

int label_cycle_rank(const CenterlineGraph& g, Label l)
{
    std::map<int, int> parent;
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    int edges = 0;
    for (const auto& e : g.edges) {
        if (e.label != l) continue;
        ++edges;
        for (int n : {e.a, e.b})
            if (!parent.count(n)) parent[n] = n;
        const int ra = find(e.a), rb = find(e.b);
        if (ra != rb) parent[ra] = rb;
    }
    std::set<int> roots;
    for (const auto& [n, _] : parent) roots.insert(find(n));
    return edges - static_cast<int>(parent.size()) + static_cast<int>(roots.size());
}

void detect_fenestrations(const CenterlineGraph& g, VariantReport& r)
{
    r.fen_r_a1 = label_cycle_rank(g, label::RACA) >= 1;
    r.fen_l_a1 = label_cycle_rank(g, label::LACA) >= 1;
    r.fen_acom = label_cycle_rank(g, label::Acom) >= 1;
    r.fen_r_p1 = label_cycle_rank(g, label::RPCA) >= 1;
    r.fen_l_p1 = label_cycle_rank(g, label::LPCA) >= 1;
}

VariantReport classify_variants(const Mask& labels, const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                                const VariantOptions& opt)
{
    VariantReport r;
    classify_segment_presence(labels, g, nodes, r, opt);
    r.fetal_r = classify_fetal_pca(g, nodes, Side::Right, r, &r.diagnostics, opt);
    r.fetal_l = classify_fetal_pca(g, nodes, Side::Left, r, &r.diagnostics, opt);
    detect_fenestrations(g, r);
    return r;
}

}  // namespace cow
