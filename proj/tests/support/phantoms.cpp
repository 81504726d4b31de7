#include "phantoms.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace cowtest {

using cow::GridGeometry;
using cow::Index3;
namespace L = cow::label;

double capsule_depth(const Capsule& c, const Vec3& p)
{
    const Vec3 ab = c.b - c.a;
    const double len2 = cow::dot(ab, ab);
    double t = len2 > 0.0 ? cow::dot(p - c.a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec3 q = c.a + ab * t;
    const double r = c.ra + (c.rb - c.ra) * t;
    return r - cow::distance(p, q);
}

namespace {

double ellipse_depth(const EllipticTube& e, const Vec3& p)
{
    const Vec3 axis = e.b - e.a;
    const double len = cow::norm(axis);
    const Vec3 t = axis / len;
    const double s = cow::dot(p - e.a, t);
    if (s < 0.0 || s > len) return -1.0;
    const Vec3 u = cow::normalized(e.u - t * cow::dot(e.u, t));
    const Vec3 v = cow::cross(t, u);
    const Vec3 d = p - e.a - t * s;
    const double x = cow::dot(d, u) / e.ru, y = cow::dot(d, v) / e.rv;
    // Scaled so the depth is positive inside and comparable to a radius.
    return (1.0 - std::sqrt(x * x + y * y)) * std::min(e.ru, e.rv);
}

}  // namespace

void Phantom::add_polyline(const std::vector<Vec3>& pts, double r, Label l)
{
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) add(pts[i], pts[i + 1], r, l);
}

void Phantom::add_arc(const Vec3& center, double R, const Vec3& e1, const Vec3& e2, double a0, double a1, double r,
                      Label l, int pieces)
{
    std::vector<Vec3> pts;
    for (int i = 0; i <= pieces; ++i) {
        const double a = a0 + (a1 - a0) * i / pieces;
        pts.push_back(center + e1 * (R * std::cos(a)) + e2 * (R * std::sin(a)));
    }
    add_polyline(pts, r, l);
}

Label Phantom::label_at(const Vec3& p) const
{
    double best = 0.0;
    Label lab = 0;
    for (const auto& c : tubes) {
        const double d = capsule_depth(c, p);
        if (d >= 0.0 && (lab == 0 || d > best)) {
            best = d;
            lab = c.label;
        }
    }
    for (const auto& e : ellipses) {
        const double d = ellipse_depth(e, p);
        if (d >= 0.0 && (lab == 0 || d > best)) {
            best = d;
            lab = e.label;
        }
    }
    if (lab != 0)
        for (const auto& s : spheres)
            if (cow::distance(p, s.center) <= s.radius) return s.label;
    return lab;
}

GridGeometry make_grid(const Vec3& lo, const Vec3& hi, double spacing)
{
    GridGeometry g;
    g.spacing = {spacing, spacing, spacing};
    g.origin = lo;
    for (int a = 0; a < 3; ++a) g.dims[static_cast<std::size_t>(a)] = static_cast<int>(std::ceil((hi[a] - lo[a]) / spacing)) + 1;
    return g;
}

GridGeometry fit_grid(const Phantom& ph, double spacing, double margin)
{
    Vec3 lo{1e9, 1e9, 1e9}, hi{-1e9, -1e9, -1e9};
    auto grow = [&](const Vec3& p, double r) {
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a] - r);
            hi[a] = std::max(hi[a], p[a] + r);
        }
    };
    for (const auto& c : ph.tubes) {
        grow(c.a, c.ra);
        grow(c.b, c.rb);
    }
    for (const auto& e : ph.ellipses) {
        grow(e.a, std::max(e.ru, e.rv));
        grow(e.b, std::max(e.ru, e.rv));
    }
    lo -= Vec3{margin, margin, margin};
    hi += Vec3{margin, margin, margin};
    // Snap to the spacing lattice so shapes sit identically relative to voxel centers.
    for (int a = 0; a < 3; ++a) lo[a] = std::floor(lo[a] / spacing) * spacing;
    return make_grid(lo, hi, spacing);
}

Mask rasterize(const Phantom& ph, const GridGeometry& g)
{
    Mask m(g, 0);
    // Per-shape bounding boxes keep this linear in the covered volume.
    std::vector<double> best(m.size(), -1.0);
    auto visit = [&](const Vec3& lo, const Vec3& hi, auto&& depth, Label label) {
        const Vec3 il = g.to_index(lo), ih = g.to_index(hi);
        const int i0 = std::max(0, static_cast<int>(std::floor(std::min(il.x, ih.x))));
        const int j0 = std::max(0, static_cast<int>(std::floor(std::min(il.y, ih.y))));
        const int k0 = std::max(0, static_cast<int>(std::floor(std::min(il.z, ih.z))));
        const int i1 = std::min(g.dims[0] - 1, static_cast<int>(std::ceil(std::max(il.x, ih.x))));
        const int j1 = std::min(g.dims[1] - 1, static_cast<int>(std::ceil(std::max(il.y, ih.y))));
        const int k1 = std::min(g.dims[2] - 1, static_cast<int>(std::ceil(std::max(il.z, ih.z))));
        for (int k = k0; k <= k1; ++k)
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i) {
                    const double d = depth(g.to_world(Index3{i, j, k}));
                    if (d < 0.0) continue;
                    const std::size_t idx = g.flat(i, j, k);
                    if (d > best[idx]) {
                        best[idx] = d;
                        m[idx] = label;
                    }
                }
    };
    for (const auto& c : ph.tubes) {
        const double r = std::max(c.ra, c.rb);
        Vec3 lo, hi;
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(c.a[a], c.b[a]) - r;
            hi[a] = std::max(c.a[a], c.b[a]) + r;
        }
        visit(lo, hi, [&c](const Vec3& p) { return capsule_depth(c, p); }, c.label);
    }
    for (const auto& e : ph.ellipses) {
        const double r = std::max(e.ru, e.rv);
        Vec3 lo, hi;
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(e.a[a], e.b[a]) - r;
            hi[a] = std::max(e.a[a], e.b[a]) + r;
        }
        visit(lo, hi, [&e](const Vec3& p) { return ellipse_depth(e, p); }, e.label);
    }
    if (!ph.spheres.empty())
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (!m[i]) continue;
            const Vec3 p = g.to_world(i);
            for (const auto& s : ph.spheres)
                if (cow::distance(p, s.center) <= s.radius) {
                    m[i] = s.label;
                    break;
                }
        }
    return m;
}

Phantom straight_tube(double length, double radius, const Vec3& dir, const Vec3& offset)
{
    Phantom ph;
    const Vec3 d = cow::normalized(dir);
    ph.add(offset + d * (-length / 2), offset + d * (length / 2), radius, 1);
    return ph;
}

Phantom l_bend(double arm, double radius)
{
    Phantom ph;
    ph.add({0, 0, 0}, {arm, 0, 0}, radius, 1);
    ph.add({0, 0, 0}, {0, arm, 0}, radius, 1);
    return ph;
}

Phantom y_junction(double r_parent, double r_child1, double r_child2, double parent_len, double child_len,
                   double half_angle_deg)
{
    Phantom ph;
    const double a = half_angle_deg * M_PI / 180.0;
    ph.add({0, 0, -parent_len}, {0, 0, 0}, r_parent, 1);
    ph.add({0, 0, 0}, {child_len * std::sin(a), 0, child_len * std::cos(a)}, r_child1, 2);
    ph.add({0, 0, 0}, {-child_len * std::sin(a), 0, child_len * std::cos(a)}, r_child2, 3);
    ph.add_sphere({0, 0, 0}, r_parent, 1);
    return ph;
}

Phantom torus(double R, double r)
{
    Phantom ph;
    ph.add_arc({0, 0, 0}, R, {1, 0, 0}, {0, 1, 0}, 0.0, 2 * M_PI, r, 1, 64);
    return ph;
}

Phantom two_components(double radius)
{
    Phantom ph;
    ph.add({-4, 0, -5}, {-4, 0, 5}, radius, 1);
    ph.add({4, 0, -5}, {4, 3, 5}, radius, 1);
    return ph;
}

// ---------------------------------------------------------------------------------------------------------------

cow::VariantReport CowSpec::expected() const
{
    cow::VariantReport r;
    r.r_a1 = r_a1;
    r.l_a1 = l_a1;
    r.acom = acom;
    r.third_a2 = third_a2;
    r.r_pcom = r_pcom;
    r.l_pcom = l_pcom;
    r.r_p1 = r_p1;
    r.l_p1 = l_p1;
    r.fetal_r = fetal_r && r_pcom;
    r.fetal_l = fetal_l && l_pcom;
    r.fen_acom = fen_acom && acom;
    r.fen_r_a1 = fen_r_a1 && r_a1;
    r.fen_l_a1 = fen_l_a1 && l_a1;
    return r;
}

namespace {

// First point along a -> b (bisection) where the phantom label becomes `child`.
Vec3 label_switch(const Phantom& ph, const Vec3& a, const Vec3& b, Label child)
{
    double lo = 0.0, hi = 1.0;
    if (ph.label_at(a) == child) return a;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ph.label_at(a + (b - a) * mid) == child ? hi : lo) = mid;
    }
    return a + (b - a) * hi;
}

std::string bname(Label segment, Label other)
{
    const std::string_view t = cow::vessel_type(segment);
    if (t == "BA" || t == "Acom") return std::string(cow::label_name(other)) + " boundary";
    return std::string(cow::vessel_type(other)) + " boundary";
}

}  // namespace

CowPhantom make_cow(const CowSpec& spec)
{
    CowPhantom out;
    Phantom& ph = out.phantom;
    const double k = spec.scale;
    auto P = [&](double x, double y, double z) { return Vec3{x, y, z} * k + spec.shift; };
    auto R = [&](double r) { return r * k; };

    const Vec3 ba_start = P(0, -8, -12), ba_top = P(0, -8, 0);
    ph.add(ba_start, ba_top, R(1.5), L::BA);
    ph.add_sphere(ba_top, R(1.5), L::BA);
    out.nodes.push_back({L::BA, "BA start", ba_start});
    if (spec.r_p1 && spec.l_p1) out.nodes.push_back({L::BA, "BA bifurcation", ba_top});

    struct Attach {
        Label child, parent;
        Vec3 from, to;  // along the child axis, starting at the parent side
    };
    std::vector<Attach> attach;

    const Vec3 mid_acom = P(0, 12, 1);
    for (int side = -1; side <= 1; side += 2) {
        const cow::Side S = side < 0 ? cow::Side::Right : cow::Side::Left;
        const double s = side;
        const bool p1 = S == cow::Side::Right ? spec.r_p1 : spec.l_p1;
        const bool pc = S == cow::Side::Right ? spec.r_pcom : spec.l_pcom;
        const bool a1 = S == cow::Side::Right ? spec.r_a1 : spec.l_a1;
        const bool fetal = S == cow::Side::Right ? spec.fetal_r : spec.fetal_l;
        const bool fen_a1 = S == cow::Side::Right ? spec.fen_r_a1 : spec.fen_l_a1;
        const Label pca = cow::pca(S), ica = cow::ica(S), mca = cow::mca(S), pcom = cow::pcom(S), aca = cow::aca(S);

        const Vec3 pj = P(6 * s, -8, 0), pe = P(14 * s, -15, 3);
        const Vec3 is = P(10 * s, 2, -12), ip = P(10 * s, 2, -4), ib = P(10 * s, 2, 0);
        const Vec3 me = P(22 * s, 4, 1), aj = P(3 * s, 12, 1), ae = P(3 * s, 22, 6);

        if (p1) {
            ph.add(ba_top, pj, R(fetal ? 0.7 : 1.1), pca);
            attach.push_back({pca, L::BA, ba_top, pj});
        }
        ph.add(pj, pe, R(1.0), pca);
        out.nodes.push_back({pca, "PCA end", pe});
        if (pc) {
            ph.add(ip, pj, R(fetal ? 1.2 : 0.7), pcom);
            if (p1 && !fetal) ph.add_sphere(pj, R(1.1), pca);
            attach.push_back({pcom, ica, ip, pj});
            attach.push_back({pcom, pca, pj, ip});
            out.nodes.push_back({ica, "Pcom bifurcation", ip});
            if (p1) out.nodes.push_back({pca, "Pcom bifurcation", pj});
        }
        ph.add(is, ib, R(1.8), ica);
        ph.add_sphere(ib, R(1.8), ica);
        out.nodes.push_back({ica, "ICA start", is});
        ph.add(ib, me, R(1.3), mca);
        attach.push_back({mca, ica, ib, me});
        out.nodes.push_back({mca, "MCA end", me});
        if (a1) {
            if (fen_a1) {
                const Vec3 f1 = ib + (aj - ib) * 0.3, f2 = ib + (aj - ib) * 0.7;
                const Vec3 up = P(0, 0, 1) - spec.shift;
                ph.add(ib, f1, R(1.0), aca);
                for (double o : {-1.0, 1.0})
                    ph.add_polyline({f1, f1 + (f2 - f1) * 0.2 + up * o, f1 + (f2 - f1) * 0.8 + up * o, f2}, R(0.5), aca);
                ph.add(f2, aj, R(1.0), aca);
            } else {
                ph.add(ib, aj, R(1.0), aca);
            }
            attach.push_back({aca, ica, ib, aj});
            out.nodes.push_back({ica, "ICA bifurcation", ib});
        }
        ph.add(aj, ae, R(0.9), aca);
        out.nodes.push_back({aca, "ACA end", ae});
        if (spec.acom) {
            if (a1) ph.add_sphere(aj, R(1.0), aca);
            attach.push_back({L::Acom, aca, aj, mid_acom});
            if (a1) out.nodes.push_back({aca, "Acom bifurcation", aj});
        }
    }
    if (spec.acom) {
        const Vec3 r = P(-3, 12, 1), l = P(3, 12, 1);
        if (spec.fen_acom) {
            const Vec3 q1 = P(-1.5, 12, 1), q2 = P(1.5, 12, 1);
            ph.add(r, q1, R(0.6), L::Acom);
            for (double o : {-0.9, 0.9}) ph.add_polyline({q1, P(-0.75, 12, 1 + o), P(0.75, 12, 1 + o), q2}, R(0.4), L::Acom);
            ph.add(q2, l, R(0.6), L::Acom);
        } else {
            ph.add(r, l, R(0.6), L::Acom);
        }
    }
    if (spec.third_a2 && spec.acom) {
        const Vec3 te = P(0, 22, 8);
        ph.add(mid_acom, te, R(0.7), L::ThirdA2);
        attach.push_back({L::ThirdA2, L::Acom, mid_acom, te});
        out.nodes.push_back({L::Acom, "3rd-A2 bifurcation", mid_acom});
        out.nodes.push_back({L::ThirdA2, "3rd-A2 end", te});
    }

    for (const Attach& a : attach) {
        const Vec3 p = label_switch(ph, a.from, a.to, a.child);
        const Label parent_here = ph.label_at(a.from);
        const Label parent = parent_here != 0 ? parent_here : a.parent;
        if (parent == a.child) continue;
        out.nodes.push_back({a.child, bname(a.child, parent), p});
        out.nodes.push_back({parent, bname(parent, a.child), p});
    }
    return out;
}

std::vector<cow::AnatomicalNode> as_anatomical(const std::vector<RefNode>& ref)
{
    std::vector<cow::AnatomicalNode> out;
    for (const auto& r : ref) {
        cow::AnatomicalNode n;
        n.label = r.segment;
        n.name = r.name;
        n.pos = r.pos;
        if (r.name.ends_with("start"))
            n.type = cow::NodeType::Start;
        else if (r.name.ends_with("end"))
            n.type = cow::NodeType::End;
        else if (r.name.ends_with("bifurcation"))
            n.type = cow::NodeType::Bifurcation;
        else
            n.type = cow::NodeType::Boundary;
        out.push_back(n);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------------------------

int count_components_bfs(const Mask& m)
{
    const GridGeometry& g = m.geometry;
    std::vector<char> seen(m.size(), 0);
    int count = 0;
    std::deque<std::size_t> q;
    for (std::size_t s = 0; s < m.size(); ++s) {
        if (!m[s] || seen[s]) continue;
        ++count;
        seen[s] = 1;
        q.push_back(s);
        while (!q.empty()) {
            const Index3 v = g.unflat(q.front());
            q.pop_front();
            for (int dk = -1; dk <= 1; ++dk)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) {
                        const int x = v[0] + di, y = v[1] + dj, z = v[2] + dk;
                        if (!g.contains(x, y, z)) continue;
                        const std::size_t n = g.flat(x, y, z);
                        if (m[n] && !seen[n]) {
                            seen[n] = 1;
                            q.push_back(n);
                        }
                    }
        }
    }
    return count;
}

int enclosed_cavities(const Mask& m)
{
    const GridGeometry& g = m.geometry;
    std::vector<char> seen(m.size(), 0);
    int cavities = 0;
    std::deque<std::size_t> q;
    for (std::size_t s = 0; s < m.size(); ++s) {
        if (m[s] || seen[s]) continue;
        bool border = false;
        seen[s] = 1;
        q.push_back(s);
        while (!q.empty()) {
            const Index3 v = g.unflat(q.front());
            q.pop_front();
            for (int a = 0; a < 3; ++a)
                if (v[static_cast<std::size_t>(a)] == 0 || v[static_cast<std::size_t>(a)] == g.dims[static_cast<std::size_t>(a)] - 1)
                    border = true;
            for (const auto& o : cow::neighbor_offsets_6()) {
                const int x = v[0] + o[0], y = v[1] + o[1], z = v[2] + o[2];
                if (!g.contains(x, y, z)) continue;
                const std::size_t n = g.flat(x, y, z);
                if (!m[n] && !seen[n]) {
                    seen[n] = 1;
                    q.push_back(n);
                }
            }
        }
        if (!border) ++cavities;
    }
    return cavities;
}

long euler_characteristic(const Mask& m)
{
    const auto& d = m.geometry.dims;
    auto vox = [&](int i, int j, int k) { return m.get_or_zero(i, j, k) != 0; };
    long V = 0, E = 0, F = 0, C = 0;
    for (int k = 0; k <= d[2]; ++k)
        for (int j = 0; j <= d[1]; ++j)
            for (int i = 0; i <= d[0]; ++i) {
                // lattice vertex (i, j, k) is the min corner of voxel (i, j, k)
                bool v = false;
                for (int c = 0; c < 8 && !v; ++c) v = vox(i - (c & 1), j - ((c >> 1) & 1), k - ((c >> 2) & 1));
                V += v;
                // edges along x, y, z starting at the vertex
                E += vox(i, j, k) || vox(i, j - 1, k) || vox(i, j, k - 1) || vox(i, j - 1, k - 1);
                E += vox(i, j, k) || vox(i - 1, j, k) || vox(i, j, k - 1) || vox(i - 1, j, k - 1);
                E += vox(i, j, k) || vox(i - 1, j, k) || vox(i, j - 1, k) || vox(i - 1, j - 1, k);
                // faces normal to x, y, z
                F += vox(i, j, k) || vox(i - 1, j, k);
                F += vox(i, j, k) || vox(i, j - 1, k);
                F += vox(i, j, k) || vox(i, j, k - 1);
                C += vox(i, j, k);
            }
    return V - E + F - C;
}

int betti1(const Mask& m)
{
    return static_cast<int>(count_components_bfs(m) + enclosed_cavities(m) - euler_characteristic(m));
}

Mask random_mask(std::mt19937& rng, int n, double fill)
{
    GridGeometry g;
    g.dims = {n, n, n};
    Mask m(g, 0);
    std::bernoulli_distribution b(fill);
    for (auto& v : m.data) v = b(rng) ? 1 : 0;
    return m;
}

}  // namespace cowtest
