#include "cowgraph/skeletonize.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <vector>

#include "cowgraph/volume_ops.hpp"

namespace cow {

namespace {

constexpr int kCenter = 13;
constexpr std::uint32_t kCenterBit = 1u << kCenter;

struct Tables {
    std::array<std::uint32_t, 27> adj26{};
    std::array<std::uint32_t, 27> adj6{};
    std::uint32_t all26 = 0;
    std::uint32_t n18 = 0;
    std::uint32_t faces = 0;

    Tables()
    {
        auto coord = [](int p) { return Index3{p % 3 - 1, (p / 3) % 3 - 1, p / 9 - 1}; };
        for (int p = 0; p < 27; ++p) {
            if (p == kCenter) continue;
            const Index3 a = coord(p);
            const int l1 = std::abs(a[0]) + std::abs(a[1]) + std::abs(a[2]);
            all26 |= 1u << p;
            if (l1 <= 2) n18 |= 1u << p;
            if (l1 == 1) faces |= 1u << p;
            for (int q = 0; q < 27; ++q) {
                if (q == p || q == kCenter) continue;
                const Index3 b = coord(q);
                const int dx = std::abs(a[0] - b[0]), dy = std::abs(a[1] - b[1]), dz = std::abs(a[2] - b[2]);
                if (std::max({dx, dy, dz}) == 1) adj26[static_cast<std::size_t>(p)] |= 1u << q;
                if (dx + dy + dz == 1) adj6[static_cast<std::size_t>(p)] |= 1u << q;
            }
        }
    }
};

const Tables& tables()
{
    static const Tables t;
    return t;
}

std::uint32_t grow(std::uint32_t seed, std::uint32_t set, const std::array<std::uint32_t, 27>& adj)
{
    std::uint32_t comp = seed;
    for (;;) {
        std::uint32_t nb = 0;
        for (std::uint32_t rest = comp; rest != 0; rest &= rest - 1)
            nb |= adj[static_cast<std::size_t>(std::countr_zero(rest))];
        const std::uint32_t next = comp | (nb & set);
        if (next == comp) return comp;
        comp = next;
    }
}

}  // namespace

bool is_simple_point_bits(std::uint32_t bits)
{
    const Tables& t = tables();
    std::uint32_t fg = bits & t.all26;
    if (fg == 0) return false;

    // T26 == 1
    const std::uint32_t first = grow(fg & (~fg + 1), fg, t.adj26);
    if ((fg & ~first) != 0) return false;

    // T6 == 1 over background in N18, counting components that touch a face neighbour.
    std::uint32_t bg = ~bits & t.n18;
    int touching = 0;
    while (bg != 0) {
        const std::uint32_t comp = grow(bg & (~bg + 1), bg, t.adj6);
        bg &= ~comp;
        if ((comp & t.faces) != 0 && ++touching > 1) return false;
    }
    return touching == 1;
}

bool is_simple_point(const Neighborhood& n)
{
    std::uint32_t bits = 0;
    for (int p = 0; p < 27; ++p)
        if (n[static_cast<std::size_t>(p)] != 0) bits |= 1u << p;
    return is_simple_point_bits(bits);
}

namespace {

// Foreground cropped to its bounding box plus a one-voxel zero border.
struct Workspace {
    Index3 lo{};
    Index3 dims{};
    std::vector<std::uint8_t> x;
    std::array<std::ptrdiff_t, 27> off{};

    std::size_t local(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i - lo[0] + 1) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j - lo[1] + 1) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k - lo[2] + 1));
    }

    std::uint32_t bits(std::size_t idx) const
    {
        // 1 foreground, 2 pending candidate, 3 removed in the current sub-iteration
        std::uint32_t b = 0;
        for (int p = 0; p < 27; ++p) {
            const std::uint8_t v = x[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(idx) + off[static_cast<std::size_t>(p)])];
            if (v == 1 || v == 2) b |= 1u << p;
        }
        return b;
    }
};

bool bounding_box(const Mask& m, Index3& lo, Index3& hi)
{
    lo = {std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
    hi = {-1, -1, -1};
    const GridGeometry& g = m.geometry;
    for (std::size_t idx = 0; idx < m.size(); ++idx) {
        if (m[idx] == 0) continue;
        const Index3 v = g.unflat(idx);
        for (std::size_t a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], v[a]);
            hi[a] = std::max(hi[a], v[a]);
        }
    }
    return hi[0] >= 0;
}

}  // namespace

Mask thin_mask(const Mask& m, const DistanceField* dist)
{
    Mask out(m.geometry, 0);
    Index3 lo, hi;
    if (!bounding_box(m, lo, hi)) return out;

    DistanceField own;
    if (dist == nullptr) {
        own = euclidean_distance_field(m);
        dist = &own;
    }

    Workspace w;
    w.lo = lo;
    w.dims = {hi[0] - lo[0] + 3, hi[1] - lo[1] + 3, hi[2] - lo[2] + 3};
    const std::size_t total = static_cast<std::size_t>(w.dims[0]) * static_cast<std::size_t>(w.dims[1]) *
                              static_cast<std::size_t>(w.dims[2]);
    w.x.assign(total, 0);
    const auto sx = static_cast<std::ptrdiff_t>(w.dims[0]);
    const std::ptrdiff_t sxy = sx * w.dims[1];
    for (int p = 0; p < 27; ++p)
        w.off[static_cast<std::size_t>(p)] = (p % 3 - 1) + ((p / 3) % 3 - 1) * sx + (p / 9 - 1) * sxy;

    std::vector<float> d(total, 0.0f);
    std::vector<std::size_t> active;
    for (int k = lo[2]; k <= hi[2]; ++k)
        for (int j = lo[1]; j <= hi[1]; ++j)
            for (int i = lo[0]; i <= hi[0]; ++i) {
                if (m(i, j, k) == 0) continue;
                const std::size_t l = w.local(i, j, k);
                w.x[l] = 1;
                d[l] = (*dist)(i, j, k);
                active.push_back(l);
            }

    // Face directions as neighbourhood positions: -x, +x, -y, +y, -z, +z.
    constexpr std::array<int, 6> kFaces{12, 14, 10, 16, 4, 22};
    std::vector<std::size_t> cand;
    for (;;) {
        bool changed = false;
        for (int face : kFaces) {
            const std::ptrdiff_t fo = w.off[static_cast<std::size_t>(face)];
            cand.clear();
            for (std::size_t idx : active)
                if (w.x[idx] != 0 && w.x[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(idx) + fo)] == 0)
                    cand.push_back(idx);
            std::sort(cand.begin(), cand.end(), [&d](std::size_t a, std::size_t b) {
                return d[a] != d[b] ? d[a] < d[b] : a < b;
            });
            // Endpoints are judged on the state before this sub-iteration.
            std::erase_if(cand, [&w](std::size_t idx) { return std::popcount(w.bits(idx) & ~kCenterBit) <= 1; });
            for (std::size_t idx : cand) w.x[idx] = 2;
            for (std::size_t idx : cand) {
                const std::uint32_t b = w.bits(idx);
                // A tip exposed by a removal in this sub-iteration waits; otherwise a two-voxel strand is eaten
                // from its end before an endpoint can form.
                if (std::popcount(b & ~kCenterBit) <= 3) {
                    bool near_removed = false;
                    for (int p = 0; p < 27 && !near_removed; ++p)
                        near_removed = w.x[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(idx) +
                                                                    w.off[static_cast<std::size_t>(p)])] == 3;
                    if (near_removed) continue;
                }
                if (!is_simple_point_bits(b)) continue;
                w.x[idx] = 3;
                changed = true;
            }
            for (std::size_t idx : cand) w.x[idx] = w.x[idx] == 3 ? 0 : 1;
        }
        std::erase_if(active, [&w](std::size_t idx) { return w.x[idx] == 0; });
        if (!changed) break;
    }

    for (int k = lo[2]; k <= hi[2]; ++k)
        for (int j = lo[1]; j <= hi[1]; ++j)
            for (int i = lo[0]; i <= hi[0]; ++i)
                if (w.x[w.local(i, j, k)] != 0) out(i, j, k) = 1;
    return out;
}

namespace {

std::vector<std::size_t> skeleton_neighbors(const Mask& s, std::size_t idx)
{
    std::vector<std::size_t> n;
    const GridGeometry& g = s.geometry;
    const Index3 v = g.unflat(idx);
    for (const auto& o : neighbor_offsets_26()) {
        const int x = v[0] + o[0], y = v[1] + o[1], z = v[2] + o[2];
        if (g.contains(x, y, z) && s(x, y, z) != 0) n.push_back(g.flat(x, y, z));
    }
    return n;
}

double step(const GridGeometry& g, std::size_t a, std::size_t b)
{
    return distance(g.to_world(a), g.to_world(b));
}

// One pruning round; returns the number of removed voxels.
std::size_t prune_once(Mask& s, double bulge, const DistanceField& dist)
{
    const GridGeometry& g = s.geometry;
    std::vector<std::size_t> remove;
    for (std::size_t idx = 0; idx < s.size(); ++idx) {
        if (s[idx] == 0) continue;
        if (skeleton_neighbors(s, idx).size() != 1) continue;
        std::vector<std::size_t> path{idx};
        std::size_t prev = idx, cur = skeleton_neighbors(s, idx)[0];
        double length = step(g, prev, cur);
        bool terminal = false;
        for (;;) {
            const auto nb = skeleton_neighbors(s, cur);
            if (nb.size() >= 3) {
                terminal = true;
                break;
            }
            if (nb.size() <= 1) break;  // isolated chain
            const std::size_t next = nb[0] == prev ? nb[1] : nb[0];
            if (next == prev || std::find(path.begin(), path.end(), next) != path.end()) break;
            path.push_back(cur);
            prev = cur;
            cur = next;
            length += step(g, prev, cur);
        }
        if (!terminal) continue;
        if (length < bulge * static_cast<double>(dist[cur])) remove.insert(remove.end(), path.begin(), path.end());
    }
    for (std::size_t idx : remove) s[idx] = 0;
    return remove.size();
}

}  // namespace

Mask prune_spurs(const Mask& skeleton, double bulge_size, const DistanceField& dist)
{
    if (!same_grid(skeleton.geometry, dist.geometry)) throw std::invalid_argument("prune_spurs: grid mismatch");
    Mask s = binarize(skeleton);
    if (bulge_size <= 0.0) return s;
    for (int round = 0; round < 64; ++round) {
        std::size_t removed = 0;
        while (std::size_t n = prune_once(s, bulge_size, dist)) removed += n;
        if (removed == 0) break;
        Mask thinned = thin_mask(s, &dist);
        if (thinned == s) break;
        s = std::move(thinned);
    }
    return s;
}

Mask skeletonize(const Mask& m, double bulge_size)
{
    const Mask bin = binarize(m);
    const DistanceField dist = euclidean_distance_field(bin);
    return prune_spurs(thin_mask(bin, &dist), bulge_size, dist);
}

}  // namespace cow
