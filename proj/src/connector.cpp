#include "cowgraph/connector.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "cowgraph/labels.hpp"
#include "cowgraph/volume_ops.hpp"

namespace cow {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

struct Offset {
    Index3 d;
    double dist;
};

// All index offsets within `max_mm`, sorted by physical distance then lexicographically.
std::vector<Offset> offsets_within(const Vec3& spacing, double max_mm)
{
    std::vector<Offset> out;
    const int rx = static_cast<int>(std::floor(max_mm / spacing.x));
    const int ry = static_cast<int>(std::floor(max_mm / spacing.y));
    const int rz = static_cast<int>(std::floor(max_mm / spacing.z));
    for (int k = -rz; k <= rz; ++k)
        for (int j = -ry; j <= ry; ++j)
            for (int i = -rx; i <= rx; ++i) {
                const double d = std::sqrt(i * i * spacing.x * spacing.x + j * j * spacing.y * spacing.y +
                                           k * k * spacing.z * spacing.z);
                if (d <= max_mm + 1e-12) out.push_back({{i, j, k}, d});
            }
    std::stable_sort(out.begin(), out.end(), [](const Offset& a, const Offset& b) { return a.dist < b.dist; });
    return out;
}

// Nearest nonzero voxel of `labels` (ties: smaller code, then offset order). kNone if none within range.
std::size_t nearest_labeled(const Mask& labels, std::size_t idx, const std::vector<Offset>& offsets)
{
    if (labels[idx] != 0) return idx;
    const GridGeometry& g = labels.geometry;
    const Index3 v = g.unflat(idx);
    std::size_t best = kNone;
    double best_d = 0.0;
    for (const Offset& o : offsets) {
        if (best != kNone && o.dist > best_d + 1e-9) break;
        const int x = v[0] + o.d[0], y = v[1] + o.d[1], z = v[2] + o.d[2];
        if (!g.contains(x, y, z)) continue;
        const std::size_t n = g.flat(x, y, z);
        if (labels[n] == 0) continue;
        if (best == kNone || labels[n] < labels[best]) {
            best = n;
            best_d = o.dist;
        }
    }
    return best;
}

struct Entry {
    double f;
    std::size_t idx;
    bool operator>(const Entry& o) const { return f != o.f ? f > o.f : idx > o.idx; }
};

struct ClosestPair {
    std::size_t a = kNone, b = kNone;
    double dist = std::numeric_limits<double>::infinity();
};

ClosestPair closest_pair(const GridGeometry& g, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b)
{
    ClosestPair best;
    std::vector<Vec3> pb(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) pb[j] = g.to_world(b[j]);
    for (std::size_t ia : a) {
        const Vec3 pa = g.to_world(ia);
        for (std::size_t j = 0; j < b.size(); ++j) {
            const Vec3 d = pa - pb[j];
            const double dd = dot(d, d);
            // Strict improvement keeps the lexicographically first pair on ties (inputs are sorted).
            if (dd < best.dist) {
                best = {ia, b[j], dd};
            }
        }
    }
    best.dist = std::sqrt(best.dist);
    return best;
}

template <typename Domain>
VoxelPath search(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, const GridGeometry& g,
                 const Domain& in_domain, const DistanceField& dist, const AStarParams& p)
{
    if (a.empty() || b.empty()) throw NoPath("connect_pair: empty endpoint set");
    std::vector<std::size_t> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const ClosestPair cp = closest_pair(g, sa, sb);
    const std::unordered_set<std::size_t> aset(sa.begin(), sa.end());
    const std::unordered_set<std::size_t> bset(sb.begin(), sb.end());
    const Vec3 goal = g.to_world(cp.b);

    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    std::unordered_map<std::size_t, double> gscore;
    std::unordered_map<std::size_t, std::size_t> parent;
    std::unordered_set<std::size_t> closed;

    auto priority = [&](std::size_t idx, double gv) {
        return gv + p.w1 * distance(g.to_world(idx), goal) - p.w2 * static_cast<double>(dist[idx]);
    };
    gscore[cp.a] = 0.0;
    parent[cp.a] = kNone;
    open.push({priority(cp.a, 0.0), cp.a});

    while (!open.empty()) {
        const Entry e = open.top();
        open.pop();
        if (!closed.insert(e.idx).second) continue;
        if (bset.count(e.idx) != 0) {
            VoxelPath path;
            for (std::size_t cur = e.idx; cur != kNone; cur = parent[cur]) path.voxels.push_back(cur);
            std::reverse(path.voxels.begin(), path.voxels.end());
            for (std::size_t i = 1; i < path.voxels.size(); ++i)
                path.length_mm += distance(g.to_world(path.voxels[i - 1]), g.to_world(path.voxels[i]));
            return path;
        }
        const double gcur = gscore[e.idx];
        const Index3 v = g.unflat(e.idx);
        for (const auto& o : neighbor_offsets_26()) {
            const int x = v[0] + o[0], y = v[1] + o[1], z = v[2] + o[2];
            if (!g.contains(x, y, z)) continue;
            const std::size_t n = g.flat(x, y, z);
            if (closed.count(n) != 0) continue;
            if (!in_domain(n) && aset.count(n) == 0 && bset.count(n) == 0) continue;
            const double ng = gcur + g.step_length(o[0], o[1], o[2]);
            const auto it = gscore.find(n);
            if (it != gscore.end() && it->second <= ng) continue;
            gscore[n] = ng;
            parent[n] = e.idx;
            open.push({priority(n, ng), n});
        }
    }
    throw NoPath("connect_pair: no path within domain");
}

// Skeleton components over the sparse voxel set.
struct SkeletonParts {
    std::vector<std::size_t> voxels;  // sorted flat indices
    std::vector<int> part;            // component id per voxel
    int count = 0;
};

SkeletonParts skeleton_parts(const Mask& s)
{
    SkeletonParts r;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] != 0) r.voxels.push_back(i);
    std::unordered_map<std::size_t, std::size_t> pos;
    pos.reserve(r.voxels.size() * 2);
    for (std::size_t i = 0; i < r.voxels.size(); ++i) pos[r.voxels[i]] = i;
    std::vector<std::size_t> uf(r.voxels.size());
    std::iota(uf.begin(), uf.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (uf[x] != x) x = uf[x] = uf[uf[x]];
        return x;
    };
    const GridGeometry& g = s.geometry;
    for (std::size_t i = 0; i < r.voxels.size(); ++i) {
        const Index3 v = g.unflat(r.voxels[i]);
        for (const auto& o : neighbor_offsets_26()) {
            const int x = v[0] + o[0], y = v[1] + o[1], z = v[2] + o[2];
            if (!g.contains(x, y, z)) continue;
            const auto it = pos.find(g.flat(x, y, z));
            if (it == pos.end()) continue;
            const std::size_t ra = find(i), rb = find(it->second);
            if (ra != rb) uf[std::max(ra, rb)] = std::min(ra, rb);
        }
    }
    std::unordered_map<std::size_t, int> ids;
    r.part.resize(r.voxels.size());
    for (std::size_t i = 0; i < r.voxels.size(); ++i) {
        const std::size_t root = find(i);
        const auto it = ids.find(root);
        if (it == ids.end()) {
            ids[root] = r.count;
            r.part[i] = r.count++;
        } else {
            r.part[i] = it->second;
        }
    }
    return r;
}

class Connector {
public:
    Connector(const Mask& skeleton, const Mask& labels, const DistanceField& dist, const AStarParams& p,
              ConnectStats& stats)
        : skel_(skeleton), labels_(labels), dist_(dist), p_(p), stats_(stats), g_(labels.geometry),
          offsets_(offsets_within(labels.geometry.spacing, 5.0)), mask_comp_(label_components(labels))
    {
    }

    Mask run()
    {
        for (Label l : all_labels()) stage_within(l);
        for (Label a : all_labels())
            for (Label b : all_labels())
                if (a < b && labels_adjacent(a, b)) stage_across(a, b);
        stage_leftover();
        return skel_;
    }

private:
    // Mask component of a skeleton voxel (nearest labeled voxel when outside the mask).
    int mask_component(std::size_t idx) const
    {
        const std::size_t n = nearest_labeled(labels_, idx, offsets_);
        return n == kNone ? 0 : mask_comp_.id[n];
    }

    struct Part {
        std::vector<std::size_t> voxels;
        int mask_comp = 0;
    };

    std::vector<Part> parts() const
    {
        const SkeletonParts sp = skeleton_parts(skel_);
        std::vector<Part> out(static_cast<std::size_t>(sp.count));
        for (std::size_t i = 0; i < sp.voxels.size(); ++i) out[static_cast<std::size_t>(sp.part[i])].voxels.push_back(sp.voxels[i]);
        for (Part& p : out) p.mask_comp = mask_component(p.voxels.front());
        return out;
    }

    std::vector<std::size_t> with_label(const Part& p, Label l) const
    {
        std::vector<std::size_t> r;
        for (std::size_t v : p.voxels)
            if (skel_[v] == l) r.push_back(v);
        return r;
    }

    void add_path(const std::vector<std::size_t>& voxels)
    {
        for (std::size_t v : voxels) {
            if (skel_[v] != 0) continue;
            const std::size_t n = nearest_labeled(labels_, v, offsets_);
            skel_[v] = n == kNone ? label::Background : labels_[n];
            if (skel_[v] == 0) throw std::runtime_error("connect_all: bridge voxel far from any label");
        }
    }

    template <typename Primary>
    void bridge(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, int comp, const Primary& primary)
    {
        try {
            add_path(search(a, b, g_, primary, dist_, p_).voxels);
            return;
        } catch (const NoPath&) {
        }
        ++stats_.widened_domain;
        auto in_comp = [this, comp](std::size_t n) { return mask_comp_.id[n] == comp; };
        try {
            add_path(search(a, b, g_, in_comp, dist_, p_).voxels);
            return;
        } catch (const NoPath&) {
        }
        auto dilated = [this, comp](std::size_t n) {
            const Index3 v = g_.unflat(n);
            for (int dk = -1; dk <= 1; ++dk)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) {
                        const int x = v[0] + di, y = v[1] + dj, z = v[2] + dk;
                        if (g_.contains(x, y, z) && mask_comp_.id(x, y, z) == comp) return true;
                    }
            return false;
        };
        try {
            add_path(search(a, b, g_, dilated, dist_, p_).voxels);
            return;
        } catch (const NoPath&) {
        }
        ++stats_.rasterized;
        std::vector<std::size_t> sa = a, sb = b;
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        const ClosestPair cp = closest_pair(g_, sa, sb);
        add_path(rasterize_line(g_, cp.a, cp.b));
    }

    void stage_within(Label l)
    {
        auto in_label = [this, l](std::size_t n) { return labels_[n] == l; };
        for (;;) {
            const std::vector<Part> ps = parts();
            std::vector<std::vector<std::size_t>> sel(ps.size());
            for (std::size_t i = 0; i < ps.size(); ++i) sel[i] = with_label(ps[i], l);
            ClosestPair best;
            std::size_t bi = kNone, bj = kNone;
            for (std::size_t i = 0; i < ps.size(); ++i) {
                if (sel[i].empty()) continue;
                for (std::size_t j = i + 1; j < ps.size(); ++j) {
                    if (sel[j].empty() || ps[i].mask_comp != ps[j].mask_comp) continue;
                    const ClosestPair cp = closest_pair(g_, sel[i], sel[j]);
                    if (cp.dist < best.dist) {
                        best = cp;
                        bi = i;
                        bj = j;
                    }
                }
            }
            if (bi == kNone) return;
            bridge(sel[bi], sel[bj], ps[bi].mask_comp, in_label);
            ++stats_.within_label;
        }
    }

    void stage_across(Label la, Label lb)
    {
        auto in_pair = [this, la, lb](std::size_t n) { return labels_[n] == la || labels_[n] == lb; };
        for (;;) {
            const std::vector<Part> ps = parts();
            ClosestPair best;
            std::vector<std::size_t> best_a, best_b;
            int comp = 0;
            for (std::size_t i = 0; i < ps.size(); ++i) {
                const auto va = with_label(ps[i], la);
                if (va.empty()) continue;
                for (std::size_t j = 0; j < ps.size(); ++j) {
                    if (i == j || ps[i].mask_comp != ps[j].mask_comp) continue;
                    const auto vb = with_label(ps[j], lb);
                    if (vb.empty()) continue;
                    const ClosestPair cp = closest_pair(g_, va, vb);
                    if (cp.dist < best.dist) {
                        best = cp;
                        best_a = va;
                        best_b = vb;
                        comp = ps[i].mask_comp;
                    }
                }
            }
            if (best_a.empty()) return;
            bridge(best_a, best_b, comp, in_pair);
            ++stats_.across_labels;
        }
    }

    void stage_leftover()
    {
        for (;;) {
            const std::vector<Part> ps = parts();
            ClosestPair best;
            std::size_t bi = kNone, bj = kNone;
            for (std::size_t i = 0; i < ps.size(); ++i)
                for (std::size_t j = i + 1; j < ps.size(); ++j) {
                    if (ps[i].mask_comp != ps[j].mask_comp) continue;
                    const ClosestPair cp = closest_pair(g_, ps[i].voxels, ps[j].voxels);
                    if (cp.dist < best.dist) {
                        best = cp;
                        bi = i;
                        bj = j;
                    }
                }
            if (bi == kNone) break;
            const int comp = ps[bi].mask_comp;
            auto in_comp = [this, comp](std::size_t n) { return mask_comp_.id[n] == comp; };
            bridge(ps[bi].voxels, ps[bj].voxels, comp, in_comp);
            ++stats_.leftover;
        }

        // Mask components that carry no skeleton at all get their deepest voxel.
        std::vector<char> covered(static_cast<std::size_t>(mask_comp_.count) + 1, 0);
        for (std::size_t i = 0; i < skel_.size(); ++i)
            if (skel_[i] != 0) covered[static_cast<std::size_t>(mask_component(i))] = 1;
        std::vector<std::size_t> deepest(covered.size(), kNone);
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            const auto c = static_cast<std::size_t>(mask_comp_.id[i]);
            if (c == 0 || covered[c]) continue;
            if (deepest[c] == kNone || dist_[i] > dist_[deepest[c]]) deepest[c] = i;
        }
        for (std::size_t c = 1; c < deepest.size(); ++c) {
            if (deepest[c] == kNone) continue;
            skel_[deepest[c]] = labels_[deepest[c]];
            ++stats_.seeded;
        }
    }

    Mask skel_;
    const Mask& labels_;
    const DistanceField& dist_;
    AStarParams p_;
    ConnectStats& stats_;
    const GridGeometry& g_;
    std::vector<Offset> offsets_;
    Components mask_comp_;
};

}  // namespace

Mask transfer_labels(const Mask& skeleton, const Mask& labels, double max_mm)
{
    if (!same_grid(skeleton.geometry, labels.geometry)) throw std::invalid_argument("transfer_labels: grid mismatch");
    const std::vector<Offset> offsets = offsets_within(labels.geometry.spacing, max_mm);
    Mask out(skeleton.geometry, 0);
    for (std::size_t i = 0; i < skeleton.size(); ++i) {
        if (skeleton[i] == 0) continue;
        const std::size_t n = nearest_labeled(labels, i, offsets);
        if (n == kNone) {
            const Index3 v = skeleton.geometry.unflat(i);
            throw std::runtime_error("transfer_labels: skeleton voxel (" + std::to_string(v[0]) + "," +
                                     std::to_string(v[1]) + "," + std::to_string(v[2]) +
                                     ") has no labeled voxel within range");
        }
        out[i] = labels[n];
    }
    return out;
}

VoxelPath connect_pair(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, const Mask& domain,
                       const DistanceField& dist, const AStarParams& p)
{
    if (!(p.w1 > 0.0) || p.w2 < 0.0) throw std::invalid_argument("connect_pair: weights must satisfy w1 > 0, w2 >= 0");
    auto in_domain = [&domain](std::size_t n) { return domain[n] != 0; };
    return search(a, b, domain.geometry, in_domain, dist, p);
}

std::vector<std::size_t> rasterize_line(const GridGeometry& g, std::size_t from, std::size_t to)
{
    const Index3 a = g.unflat(from), b = g.unflat(to);
    const int n = std::max({std::abs(b[0] - a[0]), std::abs(b[1] - a[1]), std::abs(b[2] - a[2])});
    std::vector<std::size_t> out;
    for (int t = 0; t <= n; ++t) {
        const double f = n == 0 ? 0.0 : static_cast<double>(t) / n;
        Index3 v;
        for (std::size_t ax = 0; ax < 3; ++ax) v[ax] = static_cast<int>(std::lround(a[ax] + f * (b[ax] - a[ax])));
        out.push_back(g.flat(v));
    }
    return out;
}

Mask connect_all(const Mask& labeled_skeleton, const Mask& labels, const DistanceField& dist, const AStarParams& p,
                 ConnectStats* stats)
{
    if (!same_grid(labeled_skeleton.geometry, labels.geometry) || !same_grid(labels.geometry, dist.geometry))
        throw std::invalid_argument("connect_all: grid mismatch");
    if (!(p.w1 > 0.0) || p.w2 < 0.0) throw std::invalid_argument("connect_all: weights must satisfy w1 > 0, w2 >= 0");
    ConnectStats local;
    Connector c(labeled_skeleton, labels, dist, p, stats ? *stats : local);
    return c.run();
}

}  // namespace cow
