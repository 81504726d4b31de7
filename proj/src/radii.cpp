#include "cowgraph/radii.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cow {

double CrossSection::ce_radius() const { return std::sqrt(area_mm2 / M_PI); }

double CrossSection::mis_radius(double p) const
{
    return contour_mm.empty() ? 0.0 : percentile(contour_mm, p);
}

double percentile(std::vector<double> v, double p)
{
    if (v.empty()) throw std::invalid_argument("percentile of empty sample");
    std::sort(v.begin(), v.end());
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return v[lo] + (v[hi] - v[lo]) * f;
}

CrossSection sample_cross_section(const Mask& labels, const Vec3& point, const Vec3& tangent_in, Label label,
                                  const CrossSectionOptions& opt)
{
    const Vec3 t = normalized(tangent_in);
    if (norm(t) == 0.0) throw SectionError("cross-section: zero tangent");
    // Helper axis least aligned with the tangent.
    Vec3 helper{1, 0, 0};
    if (std::abs(t.y) < std::abs(t.x) && std::abs(t.y) <= std::abs(t.z))
        helper = {0, 1, 0};
    else if (std::abs(t.z) < std::abs(t.x) && std::abs(t.z) < std::abs(t.y))
        helper = {0, 0, 1};
    const Vec3 u = normalized(cross(t, helper));
    const Vec3 v = cross(t, u);

    const int half = static_cast<int>(std::lround(opt.half_extent_mm / opt.cell_mm));
    const int n = 2 * half + 1;
    const GridGeometry& g = labels.geometry;

    // 0 unknown, 1 occupied, 2 empty
    std::vector<std::uint8_t> state(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    auto cell_pos = [&](int i, int j) {
        return point + u * ((i - half) * opt.cell_mm) + v * ((j - half) * opt.cell_mm);
    };
    auto occupied = [&](int i, int j) {
        std::uint8_t& s = state[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
        if (s == 0) {
            const auto vox = g.nearest_voxel(cell_pos(i, j));
            s = (vox && labels((*vox)[0], (*vox)[1], (*vox)[2]) == label) ? 1 : 2;
        }
        return s == 1;
    };
    if (!occupied(half, half)) throw SectionError("cross-section: center is outside the vessel label");

    CrossSection cs;
    cs.center = point;
    cs.tangent = t;
    std::vector<char> inside(state.size(), 0);
    std::vector<std::pair<int, int>> stack{{half, half}};
    inside[static_cast<std::size_t>(half) * static_cast<std::size_t>(n) + static_cast<std::size_t>(half)] = 1;
    constexpr std::array<std::pair<int, int>, 4> dirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    while (!stack.empty()) {
        const auto [i, j] = stack.back();
        stack.pop_back();
        ++cs.cells;
        for (const auto& [di, dj] : dirs) {
            const int x = i + di, y = j + dj;
            const bool in_grid = x >= 0 && y >= 0 && x < n && y < n;
            if (in_grid && occupied(x, y)) {
                char& f = inside[static_cast<std::size_t>(y) * static_cast<std::size_t>(n) + static_cast<std::size_t>(x)];
                if (!f) {
                    f = 1;
                    stack.emplace_back(x, y);
                }
                continue;
            }
            // Midpoint of the cell edge facing the empty neighbour.
            const double ex = (i - half + 0.5 * di) * opt.cell_mm;
            const double ey = (j - half + 0.5 * dj) * opt.cell_mm;
            cs.contour_mm.push_back(std::sqrt(ex * ex + ey * ey));
        }
    }
    cs.area_mm2 = cs.cells * opt.cell_mm * opt.cell_mm;
    return cs;
}

Vec3 polyline_tangent(const std::vector<Vec3>& pts, std::size_t i)
{
    if (pts.size() < 2) return {0, 0, 1};
    Vec3 d;
    if (i == 0)
        d = pts[1] - pts[0];
    else if (i + 1 >= pts.size())
        d = pts[pts.size() - 1] - pts[pts.size() - 2];
    else
        d = pts[i + 1] - pts[i - 1];
    const Vec3 t = normalized(d);
    return norm(t) > 0.0 ? t : Vec3{0, 0, 1};
}

RadiiReport annotate_radii(const CenterlineGraph& in, const Mask& labels, const CrossSectionOptions& opt)
{
    RadiiReport r{in, {}};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t ei = 0; ei < r.graph.edges.size(); ++ei) {
        GraphEdge& e = r.graph.edges[ei];
        const std::size_t n = e.points.size();
        e.ce_radius.assign(n, nan);
        e.mis_radius.assign(n, nan);
        std::vector<std::size_t> valid;
        for (std::size_t i = 0; i < n; ++i) {
            try {
                const CrossSection cs = sample_cross_section(labels, e.points[i], polyline_tangent(e.points, i), e.label, opt);
                e.ce_radius[i] = cs.ce_radius();
                e.mis_radius[i] = cs.mis_radius(opt.mis_percentile);
                valid.push_back(i);
            } catch (const SectionError&) {
            }
        }
        if (valid.empty()) {
            r.diagnostics.push_back("edge " + std::to_string(ei) + " (" + std::string(label_name(e.label)) +
                                    "): no valid cross-section");
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isnan(e.ce_radius[i])) continue;
            std::size_t best = valid.front();
            for (std::size_t k : valid) {
                const auto dk = static_cast<long>(k) - static_cast<long>(i);
                const auto db = static_cast<long>(best) - static_cast<long>(i);
                if (std::labs(dk) < std::labs(db)) best = k;
            }
            e.ce_radius[i] = e.ce_radius[best];
            e.mis_radius[i] = e.mis_radius[best];
        }
    }
    return r;
}

}  // namespace cow
