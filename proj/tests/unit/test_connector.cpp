#include <queue>
#include <random>

#include "cowgraph/connector.hpp"
#include "cowgraph/skeletonize.hpp"
#include "cowgraph/volume_ops.hpp"
#include "doctest.h"
#include "phantoms.hpp"

using namespace cow;

namespace {

Mask empty_grid(Index3 dims, double spacing = 0.25)
{
    GridGeometry g;
    g.dims = dims;
    g.spacing = {spacing, spacing, spacing};
    return Mask(g, 0);
}

// Plain 26-connected Dijkstra in mm through the domain.
double dijkstra_mm(const Mask& domain, std::size_t from, std::size_t to)
{
    const GridGeometry& g = domain.geometry;
    std::vector<double> d(domain.size(), std::numeric_limits<double>::infinity());
    using QE = std::pair<double, std::size_t>;
    std::priority_queue<QE, std::vector<QE>, std::greater<>> q;
    d[from] = 0;
    q.emplace(0.0, from);
    while (!q.empty()) {
        auto [du, u] = q.top();
        q.pop();
        if (u == to) return du;
        if (du > d[u]) continue;
        const Index3 v = g.unflat(u);
        for (const Index3& o : neighbor_offsets_26()) {
            const Index3 w{v[0] + o[0], v[1] + o[1], v[2] + o[2]};
            if (!g.contains(w) || !domain[g.flat(w)]) continue;
            const double nd = du + g.step_length(o[0], o[1], o[2]);
            if (nd < d[g.flat(w)]) {
                d[g.flat(w)] = nd;
                q.emplace(nd, g.flat(w));
            }
        }
    }
    return d[to];
}

bool adjacent26(const GridGeometry& g, std::size_t a, std::size_t b)
{
    const Index3 u = g.unflat(a), v = g.unflat(b);
    int m = 0;
    for (int i = 0; i < 3; ++i) m = std::max(m, std::abs(u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(i)]));
    return m == 1;
}

}  // namespace

TEST_CASE("transfer_labels: containment, ties and empty mask")
{
    Mask labels = empty_grid({9, 5, 5});
    for (int i = 0; i < 4; ++i) labels(i, 2, 2) = 2;
    for (int i = 5; i < 9; ++i) labels(i, 2, 2) = 3;
    labels(1, 1, 1) = 4;
    Mask skel = empty_grid({9, 5, 5});
    skel(4, 2, 2) = 1;  // equidistant from labels 2 and 3
    skel(1, 1, 1) = 1;
    const Mask t = transfer_labels(skel, labels);
    CHECK(t(4, 2, 2) == 2);
    CHECK(t(1, 1, 1) == 4);
    CHECK(t(0, 0, 0) == 0);
    CHECK_THROWS(transfer_labels(skel, empty_grid({9, 5, 5})));
}

TEST_CASE("connect_pair: uniform corridor matches Dijkstra and the straight chain")
{
    Mask dom = empty_grid({30, 7, 7});
    for (auto& v : dom.data) v = 1;
    DistanceField f(dom.geometry, 1.0f);
    const std::size_t a = dom.geometry.flat(1, 3, 3), b = dom.geometry.flat(28, 3, 3);
    const VoxelPath p = connect_pair({a}, {b}, dom, f, {1.0, 0.0});
    CHECK(p.voxels.front() == a);
    CHECK(p.voxels.back() == b);
    CHECK(p.length_mm == doctest::Approx(dijkstra_mm(dom, a, b)));
    CHECK(p.length_mm <= distance(dom.geometry.to_world(a), dom.geometry.to_world(b)) + 0.25 * std::sqrt(3.0));
    for (std::size_t i = 1; i < p.voxels.size(); ++i) CHECK(adjacent26(dom.geometry, p.voxels[i - 1], p.voxels[i]));
}

TEST_CASE("connect_pair: w2 = 0 equals the Dijkstra length on random domains")
{
    std::mt19937 rng(99);
    for (int rep = 0; rep < 30; ++rep) {
        Mask dom = empty_grid({20, 20, 6}, rep % 2 ? 0.25 : 0.5);
        std::bernoulli_distribution open(0.75);
        for (auto& v : dom.data) v = open(rng) ? 1 : 0;
        const std::size_t a = dom.geometry.flat(0, 0, 0), b = dom.geometry.flat(19, 19, 5);
        dom[a] = dom[b] = 1;
        DistanceField f(dom.geometry, 1.0f);
        const double ref = dijkstra_mm(dom, a, b);
        if (std::isinf(ref)) {
            CHECK_THROWS_AS(connect_pair({a}, {b}, dom, f, {1.0, 0.0}), NoPath);
            continue;
        }
        const VoxelPath p = connect_pair({a}, {b}, dom, f, {1.0, 0.0});
        CHECK(p.length_mm == doctest::Approx(ref).epsilon(1e-9));
        for (std::size_t v : p.voxels) CHECK(dom[v]);
    }
}

TEST_CASE("connect_pair: centre-line attraction with w2 = 2")
{
    // Corridor 5 voxels wide, distance maximal on the middle row; many equally short chains leave the row.
    Mask dom = empty_grid({25, 5, 1});
    for (auto& v : dom.data) v = 1;
    DistanceField f(dom.geometry, 0.0f);
    for (int i = 0; i < 25; ++i)
        for (int j = 0; j < 5; ++j) f(i, j, 0) = static_cast<float>(0.25 * (3 - std::abs(j - 2)));
    const std::size_t a = dom.geometry.flat(0, 2, 0), b = dom.geometry.flat(24, 2, 0);
    const VoxelPath p = connect_pair({a}, {b}, dom, f, {1.0, 2.0});
    for (std::size_t v : p.voxels) CHECK(dom.geometry.unflat(v)[1] == 2);

}

TEST_CASE("connect_pair: separate domain components give NoPath")
{
    Mask dom = empty_grid({10, 3, 3});
    for (int i = 0; i < 4; ++i) dom(i, 1, 1) = 1;
    for (int i = 6; i < 10; ++i) dom(i, 1, 1) = 1;
    DistanceField f(dom.geometry, 1.0f);
    CHECK_THROWS_AS(connect_pair({dom.geometry.flat(0, 1, 1)}, {dom.geometry.flat(9, 1, 1)}, dom, f), NoPath);
}

TEST_CASE("rasterize_line is 26-connected")
{
    GridGeometry g;
    g.dims = {20, 20, 20};
    const auto line = rasterize_line(g, g.flat(0, 3, 1), g.flat(17, 9, 14));
    CHECK(line.front() == g.flat(0, 3, 1));
    CHECK(line.back() == g.flat(17, 9, 14));
    for (std::size_t i = 1; i < line.size(); ++i) CHECK(adjacent26(g, line[i - 1], line[i]));
}

namespace {

struct Prepared {
    Mask labels;
    DistanceField dist;
    Mask skeleton;
};

Prepared prepare(const cowtest::Phantom& ph)
{
    Prepared p;
    p.labels = cowtest::rasterize(ph, cowtest::fit_grid(ph, 0.25));
    p.dist = euclidean_distance_field(binarize(p.labels));
    p.skeleton = transfer_labels(skeletonize(binarize(p.labels)), p.labels);
    return p;
}

}  // namespace

TEST_CASE("connect_all: six fragments inside one mask component")
{
    Prepared p = prepare(cowtest::straight_tube(20.0, 1.5, {1, 0.3, 0.2}));
    Mask cut = p.skeleton;
    std::vector<std::size_t> on;
    for (std::size_t i = 0; i < cut.size(); ++i)
        if (cut[i]) on.push_back(i);
    for (int k = 1; k <= 5; ++k) cut[on[on.size() * static_cast<std::size_t>(k) / 6]] = 0;
    REQUIRE(count_components(cut) == 6);
    ConnectStats st;
    const Mask c = connect_all(cut, p.labels, p.dist, {}, &st);
    CHECK(count_components(c) == count_components(p.labels));
    CHECK(st.rasterized == 0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (cut[i]) CHECK(c[i] == cut[i]);
        if (c[i]) CHECK(p.labels[i] != 0);
    }
}

TEST_CASE("connect_all: connected skeleton is unchanged")
{
    Prepared p = prepare(cowtest::l_bend(6.0, 1.2));
    CHECK(connect_all(p.skeleton, p.labels, p.dist) == p.skeleton);
}

TEST_CASE("connect_all: touching labels with disjoint skeletons get one bridge")
{
    cowtest::Phantom ph;
    ph.add({0, 0, 0}, {6, 0, 0}, 1.2, 2);
    ph.add({6, 0, 0}, {12, 0, 0}, 1.2, 3);
    Prepared p = prepare(ph);
    // Remove the skeleton around the interface so the two label pieces are apart.
    Mask cut = p.skeleton;
    for (std::size_t i = 0; i < cut.size(); ++i)
        if (cut[i] && std::abs(cut.geometry.to_world(i).x - 6.0) < 1.0) cut[i] = 0;
    REQUIRE(count_components(cut) == 2);
    ConnectStats st;
    const Mask c = connect_all(cut, p.labels, p.dist, {}, &st);
    CHECK(count_components(c) == 1);
    CHECK(st.across_labels + st.within_label + st.leftover == 1);
}
