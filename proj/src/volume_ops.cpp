#include "cowgraph/volume_ops.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace cow {

Mask resample_nearest(const Mask& m, const Vec3& target)
{
    for (int a = 0; a < 3; ++a)
        if (!(target[a] > 0.0)) throw std::invalid_argument("target spacing must be > 0");

    const GridGeometry& in = m.geometry;
    GridGeometry out = in;
    out.spacing = target;
    for (int a = 0; a < 3; ++a) {
        const double extent = in.dims[static_cast<std::size_t>(a)] * in.spacing[a] / target[a];
        // Guard against 8.0000000001 style rounding before ceil.
        out.dims[static_cast<std::size_t>(a)] = std::max(1, static_cast<int>(std::ceil(extent - 1e-9)));
    }
    const Vec3 shift{(target.x - in.spacing.x) / 2, (target.y - in.spacing.y) / 2, (target.z - in.spacing.z) / 2};
    out.origin = in.origin + in.orientation * shift;

    std::array<std::vector<int>, 3> map;
    for (int a = 0; a < 3; ++a) {
        const auto n = static_cast<std::size_t>(out.dims[static_cast<std::size_t>(a)]);
        map[static_cast<std::size_t>(a)].resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double pos = (static_cast<double>(j) + 0.5) * target[a] / in.spacing[a];
            int i = static_cast<int>(std::floor(pos + 1e-9));
            i = std::clamp(i, 0, in.dims[static_cast<std::size_t>(a)] - 1);
            map[static_cast<std::size_t>(a)][j] = i;
        }
    }

    Mask r(out);
    for (int k = 0; k < out.dims[2]; ++k)
        for (int j = 0; j < out.dims[1]; ++j)
            for (int i = 0; i < out.dims[0]; ++i)
                r(i, j, k) = m(map[0][static_cast<std::size_t>(i)], map[1][static_cast<std::size_t>(j)],
                               map[2][static_cast<std::size_t>(k)]);
    return r;
}

Components label_components(const Mask& m)
{
    Components c;
    c.id = Grid<std::int32_t>(m.geometry, 0);
    const GridGeometry& g = m.geometry;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < m.size(); ++start) {
        if (m[start] == 0 || c.id[start] != 0) continue;
        const int id = ++c.count;
        c.id[start] = id;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            const Index3 v = g.unflat(cur);
            for (const auto& o : neighbor_offsets_26()) {
                const int x = v[0] + o[0], y = v[1] + o[1], z = v[2] + o[2];
                if (!g.contains(x, y, z)) continue;
                const std::size_t n = g.flat(x, y, z);
                if (m[n] != 0 && c.id[n] == 0) {
                    c.id[n] = id;
                    stack.push_back(n);
                }
            }
        }
    }
    return c;
}

int count_components(const Mask& m) { return label_components(m).count; }

std::vector<double> component_diagonals(const Components& c)
{
    const auto n = static_cast<std::size_t>(c.count) + 1;
    std::vector<Index3> lo(n, Index3{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(),
                                     std::numeric_limits<int>::max()});
    std::vector<Index3> hi(n, Index3{-1, -1, -1});
    const GridGeometry& g = c.id.geometry;
    for (std::size_t idx = 0; idx < c.id.size(); ++idx) {
        const auto id = static_cast<std::size_t>(c.id[idx]);
        if (id == 0) continue;
        const Index3 v = g.unflat(idx);
        for (std::size_t a = 0; a < 3; ++a) {
            lo[id][a] = std::min(lo[id][a], v[a]);
            hi[id][a] = std::max(hi[id][a], v[a]);
        }
    }
    std::vector<double> diag(n, 0.0);
    for (std::size_t id = 1; id < n; ++id) {
        const Vec3 e{(hi[id][0] - lo[id][0] + 1) * g.spacing.x, (hi[id][1] - lo[id][1] + 1) * g.spacing.y,
                     (hi[id][2] - lo[id][2] + 1) * g.spacing.z};
        diag[id] = norm(e);
    }
    return diag;
}

Mask filter_small_components(const Mask& m, double rel_diag)
{
    if (!(rel_diag >= 0.0 && rel_diag < 1.0)) throw std::invalid_argument("rel_diag must be in [0, 1)");
    const Components c = label_components(m);
    if (c.count <= 1) return m;
    const std::vector<double> diag = component_diagonals(c);
    const double largest = *std::max_element(diag.begin(), diag.end());
    const double threshold = rel_diag * largest;
    Mask out = m;
    for (std::size_t idx = 0; idx < m.size(); ++idx) {
        const auto id = static_cast<std::size_t>(c.id[idx]);
        if (id != 0 && diag[id] < threshold) out[idx] = 0;
    }
    return out;
}

namespace {

// One exact 1D pass: out[i] = min_j f[j] + ((i - j) * s)^2, with zero-valued samples at -1 and n.
void edt_pass(const double* f, double* out, std::size_t n, double s, std::vector<int>& v, std::vector<double>& z,
              std::vector<double>& pos, std::vector<double>& val)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    pos.clear();
    val.clear();
    pos.push_back(-s);
    val.push_back(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (f[i] == inf) continue;
        pos.push_back(static_cast<double>(i) * s);
        val.push_back(f[i]);
    }
    pos.push_back(static_cast<double>(n) * s);
    val.push_back(0.0);

    const std::size_t m = pos.size();
    v.assign(m, 0);
    z.assign(m + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (std::size_t q = 1; q < m; ++q) {
        double sq;
        for (;;) {
            const auto p = static_cast<std::size_t>(v[static_cast<std::size_t>(k)]);
            sq = ((val[q] + pos[q] * pos[q]) - (val[p] + pos[p] * pos[p])) / (2.0 * (pos[q] - pos[p]));
            if (sq <= z[static_cast<std::size_t>(k)] && k > 0) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[static_cast<std::size_t>(k)] = static_cast<int>(q);
        z[static_cast<std::size_t>(k)] = sq;
        z[static_cast<std::size_t>(k) + 1] = inf;
    }
    k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) * s;
        while (z[static_cast<std::size_t>(k) + 1] < x) ++k;
        const auto p = static_cast<std::size_t>(v[static_cast<std::size_t>(k)]);
        const double d = x - pos[p];
        out[i] = d * d + val[p];
    }
}

}  // namespace

Grid<double> squared_distance_field(const Mask& m)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    const GridGeometry& g = m.geometry;
    Grid<double> d(g, 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) d[i] = m[i] != 0 ? inf : 0.0;

    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const int nmax = std::max({nx, ny, nz});
    std::vector<double> in(static_cast<std::size_t>(nmax)), out(static_cast<std::size_t>(nmax));
    std::vector<int> v;
    std::vector<double> z, pos, val;

    // Pass order x, y, z; each line is gathered, transformed, scattered.
    const std::array<int, 3> n{nx, ny, nz};
    for (int axis = 0; axis < 3; ++axis) {
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        const auto len = static_cast<std::size_t>(n[static_cast<std::size_t>(axis)]);
        for (int u = 0; u < n[static_cast<std::size_t>(a1)]; ++u) {
            for (int w = 0; w < n[static_cast<std::size_t>(a2)]; ++w) {
                Index3 idx{};
                idx[static_cast<std::size_t>(a1)] = u;
                idx[static_cast<std::size_t>(a2)] = w;
                bool any = false;
                for (std::size_t t = 0; t < len; ++t) {
                    idx[static_cast<std::size_t>(axis)] = static_cast<int>(t);
                    in[t] = d[g.flat(idx)];
                    any = any || in[t] != 0.0;
                }
                if (!any) continue;
                edt_pass(in.data(), out.data(), len, g.spacing[axis], v, z, pos, val);
                for (std::size_t t = 0; t < len; ++t) {
                    idx[static_cast<std::size_t>(axis)] = static_cast<int>(t);
                    d[g.flat(idx)] = out[t];
                }
            }
        }
    }
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i] == 0) d[i] = 0.0;
    return d;
}

DistanceField euclidean_distance_field(const Mask& m)
{
    const Grid<double> sq = squared_distance_field(m);
    DistanceField f(m.geometry, 0.0f);
    for (std::size_t i = 0; i < sq.size(); ++i) f[i] = static_cast<float>(std::sqrt(sq[i]));
    return f;
}

Mask binarize(const Mask& m)
{
    Mask out(m.geometry);
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] != 0 ? 1 : 0;
    return out;
}

Mask select_label(const Mask& m, std::uint8_t code)
{
    Mask out(m.geometry);
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] == code ? 1 : 0;
    return out;
}

Mask dilate(const Mask& m)
{
    Mask out = binarize(m);
    const GridGeometry& g = m.geometry;
    for (std::size_t idx = 0; idx < m.size(); ++idx) {
        if (m[idx] == 0) continue;
        const Index3 v = g.unflat(idx);
        for (const auto& o : neighbor_offsets_26()) {
            const int x = v[0] + o[0], y = v[1] + o[1], z = v[2] + o[2];
            if (g.contains(x, y, z)) out(x, y, z) = 1;
        }
    }
    return out;
}

std::size_t count_nonzero(const Mask& m)
{
    return static_cast<std::size_t>(std::count_if(m.data.begin(), m.data.end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace cow
