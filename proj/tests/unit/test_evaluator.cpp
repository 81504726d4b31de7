#include <algorithm>
#include <numeric>
#include <random>

#include "cowgraph/evaluator.hpp"
#include "cowgraph/skeletonize.hpp"
#include "cowgraph/volume_ops.hpp"
#include "doctest.h"
#include "phantoms.hpp"

using namespace cow;

namespace {

Mask empty_grid(Index3 dims)
{
    GridGeometry g;
    g.dims = dims;
    g.spacing = {0.25, 0.25, 0.25};
    return Mask(g, 0);
}

Mask set_first(Index3 dims, int from, int count)
{
    Mask m = empty_grid(dims);
    for (int i = from; i < from + count; ++i) m[static_cast<std::size_t>(i)] = 1;
    return m;
}

AnatomicalNode node(Label seg, const std::string& name, NodeType t, const Vec3& p, int degree = 3)
{
    AnatomicalNode n;
    n.id = 0;
    n.degree = degree;
    n.label = seg;
    n.type = t;
    n.name = name;
    n.pos = p;
    return n;
}

std::vector<AnatomicalNode> sample_nodes()
{
    return {
        node(label::BA, "BA bifurcation", NodeType::Bifurcation, {0, 0, 0}),
        node(label::RICA, "ICA bifurcation", NodeType::Bifurcation, {10, 5, 3}),
        node(label::LICA, "ICA bifurcation", NodeType::Bifurcation, {-10, 5, 3}),
        node(label::RPCA, "Pcom bifurcation", NodeType::Bifurcation, {6, 1, 0}),
        node(label::RPCA, "BA boundary", NodeType::Boundary, {1, 0, 0}, 2),
        node(label::LPCA, "BA boundary", NodeType::Boundary, {-1, 0, 0}, 2),
        node(label::BA, "BA start", NodeType::Start, {0, -10, -5}, 1),
    };
}

}  // namespace

TEST_CASE("dice: closed-form cases")
{
    const Mask a = set_first({10, 10, 2}, 0, 100);
    CHECK(dice(a, a) == 1.0);
    CHECK(dice(a, set_first({10, 10, 2}, 100, 100)) == 0.0);
    CHECK(dice(a, set_first({10, 10, 2}, 40, 100)) == doctest::Approx(0.6));
    CHECK(dice(empty_grid({3, 3, 3}), empty_grid({3, 3, 3})) == 1.0);
    CHECK_THROWS(dice(a, empty_grid({3, 3, 3})));
}

TEST_CASE("dice and betti0_error: brute-force oracles on random volumes")
{
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> size(4, 32);
    std::uniform_real_distribution<double> fill(0.02, 0.5);
    for (int t = 0; t < 40; ++t) {
        const int n = size(rng);
        const Mask a = cowtest::random_mask(rng, n, fill(rng));
        const Mask b = cowtest::random_mask(rng, n, fill(rng));
        long na = 0, nb = 0, both = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            na += a[i] != 0;
            nb += b[i] != 0;
            both += a[i] != 0 && b[i] != 0;
        }
        const double expect = na + nb == 0 ? 1.0 : 2.0 * both / static_cast<double>(na + nb);
        CHECK(dice(a, b) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(dice(a, b) == dice(b, a));
        const int oracle = std::abs(cowtest::count_components_bfs(a) - cowtest::count_components_bfs(b));
        CHECK(betti0_error(a, b) == oracle);
        CHECK(betti0_error(b, a) == oracle);
    }
}

TEST_CASE("betti0_error: fragments against one component")
{
    Mask frag = empty_grid({40, 5, 5});
    for (int k = 0; k < 6; ++k)
        for (int i = 0; i < 4; ++i) frag(k * 6 + i, 2, 2) = 1;
    Mask whole = empty_grid({40, 5, 5});
    for (int i = 0; i < 36; ++i) whole(i, 2, 2) = 1;
    CHECK(betti0_error(frag, whole) == 5);
    CHECK(betti0_error(whole, whole) == 0);
}

TEST_CASE("skeleton_thickness: line and slab")
{
    Mask line = empty_grid({30, 9, 9});
    for (int i = 2; i < 28; ++i) line(i, 4, 4) = 1;
    const Thickness tl = skeleton_thickness(line);
    CHECK(tl.mean_mm == doctest::Approx(0.25));
    CHECK(tl.p99_mm >= tl.mean_mm);

    Mask slab = empty_grid({30, 9, 9});
    for (int i = 2; i < 28; ++i)
        for (int j = 4; j < 6; ++j)
            for (int k = 2; k < 7; ++k) slab(i, j, k) = 1;
    const Thickness ts = skeleton_thickness(slab);
    CHECK(ts.mean_mm == doctest::Approx(0.5));
    CHECK(ts.p99_mm >= ts.mean_mm);
}

TEST_CASE("skeleton_thickness: thinned tube")
{
    const auto ph = cowtest::straight_tube(12, 1.5, normalized(Vec3{1, 0.3, 2}), cowtest::kGenericOffset);
    const Mask s = thin_mask(binarize(cowtest::rasterize(ph, cowtest::fit_grid(ph, 0.25))));
    const Thickness t = skeleton_thickness(s);
    CHECK(t.mean_mm >= 0.2);
    CHECK(t.mean_mm <= 0.3);
    CHECK(t.p99_mm <= 0.4);
}

TEST_CASE("node_distance_stats: identity and a uniform shift")
{
    const auto ref = sample_nodes();
    const NodeDistanceReport same = node_distance_stats(ref, ref);
    CHECK(same.overall.mean_mm == 0.0);
    CHECK(same.overall.support == 6);  // start node excluded
    CHECK(same.major.support == 3);
    CHECK(same.minor.support == 1);
    CHECK(same.boundary.support == 2);
    CHECK(same.unmatched_pred == 0);
    CHECK(same.unmatched_ref == 0);

    auto shifted = ref;
    for (auto& n : shifted) n.pos += Vec3{0.25, 0, 0};
    const NodeDistanceReport s = node_distance_stats(shifted, ref);
    CHECK(s.overall.mean_mm == doctest::Approx(0.25));
    CHECK(s.major.mean_mm == doctest::Approx(0.25));
    CHECK(s.boundary.mean_mm == doctest::Approx(0.25));
    CHECK(s.overall.sd_mm == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("node_distance_stats: unmatched nodes are counted")
{
    auto ref = sample_nodes();
    auto pred = ref;
    pred.erase(pred.begin() + 1);
    pred.push_back(node(label::Acom, "ACA boundary", NodeType::Boundary, {0, 9, 3}, 2));
    const NodeDistanceReport r = node_distance_stats(pred, ref);
    CHECK(r.unmatched_ref == 1);
    CHECK(r.unmatched_pred == 1);
    CHECK(r.overall.support == 5);
}

TEST_CASE("node_distance_stats: duplicate names are paired by minimum total distance")
{
    std::vector<AnatomicalNode> ref = {
        node(label::Acom, "ACA boundary", NodeType::Boundary, {0, 0, 0}, 2),
        node(label::Acom, "ACA boundary", NodeType::Boundary, {4, 0, 0}, 2),
    };
    std::vector<AnatomicalNode> pred = {
        node(label::Acom, "ACA boundary", NodeType::Boundary, {4.1, 0, 0}, 2),
        node(label::Acom, "ACA boundary", NodeType::Boundary, {0.1, 0, 0}, 2),
    };
    const NodeDistanceReport r = node_distance_stats(pred, ref);
    CHECK(r.overall.support == 2);
    CHECK(r.overall.mean_mm == doctest::Approx(0.1));
}

TEST_CASE("hungarian: agrees with exhaustive search")
{
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int t = 0; t < 60; ++t) {
        const int rows = 1 + t % 5, cols = rows + t % 3;
        std::vector<std::vector<double>> c(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols)));
        for (auto& r : c)
            for (auto& x : r) x = u(rng);
        const auto asg = hungarian(c);
        REQUIRE(asg.size() == static_cast<std::size_t>(rows));
        double got = 0.0;
        for (int r = 0; r < rows; ++r) got += c[static_cast<std::size_t>(r)][static_cast<std::size_t>(asg[static_cast<std::size_t>(r)])];
        std::vector<int> perm(static_cast<std::size_t>(cols));
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e300;
        do {
            double s = 0.0;
            for (int r = 0; r < rows; ++r) s += c[static_cast<std::size_t>(r)][static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])];
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(got == doctest::Approx(best).epsilon(1e-12));
        std::vector<int> sorted = asg;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    }
}

TEST_CASE("variant_f1: pooled micro average")
{
    VariantReport all_true;
    for (bool* f : {&all_true.l_a1, &all_true.acom, &all_true.third_a2, &all_true.r_a1, &all_true.l_pcom,
                    &all_true.l_p1, &all_true.r_p1, &all_true.r_pcom, &all_true.fetal_l, &all_true.fetal_r,
                    &all_true.fen_l_a1, &all_true.fen_acom, &all_true.fen_r_a1, &all_true.fen_l_p1, &all_true.fen_r_p1})
        *f = true;
    const VariantReport all_false;
    CHECK(variant_f1({all_true}, {all_true}) == 1.0);
    CHECK(variant_f1({all_false}, {all_false}) == 1.0);
    CHECK(variant_f1({all_true}, {all_false}) == 0.0);

    // TP 8, FP 1, FN 1.
    VariantReport ref, pred;
    ref.l_a1 = ref.acom = ref.r_a1 = ref.l_pcom = ref.l_p1 = ref.r_p1 = ref.r_pcom = true;
    pred = ref;
    ref.fetal_r = true;
    pred.fetal_l = true;
    VariantReport ref2, pred2;
    ref2.acom = pred2.acom = true;
    CHECK(variant_f1({pred, pred2}, {ref, ref2}) == doctest::Approx(8.0 / 9.0));
    CHECK_THROWS(variant_f1({pred}, {ref, ref2}));
}

TEST_CASE("feature_agreement: closed forms")
{
    const std::vector<double> x = {1.0, 2.5, 3.0, 4.2, 0.7};
    const Agreement same = feature_agreement(x, x);
    CHECK(same.medre == 0.0);
    REQUIRE(same.pearson_r.has_value());
    CHECK(*same.pearson_r == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> y;
    for (double v : x) y.push_back(1.02 * v);
    const Agreement s = feature_agreement(y, x);
    CHECK(std::abs(s.medre - 0.02) < 1e-12);
    CHECK(std::abs(*s.pearson_r - 1.0) < 1e-12);

    const Agreement anti = feature_agreement({1, 2}, {2, 1});
    CHECK(*anti.pearson_r == doctest::Approx(-1.0));

    const Agreement one = feature_agreement({1.0}, {2.0});
    CHECK_FALSE(one.pearson_r.has_value());
    CHECK(one.medre == doctest::Approx(0.5));

    const Agreement zero = feature_agreement({1.0, 2.0, 3.0}, {0.0, 2.0, 2.0});
    CHECK(zero.excluded_zero_ref == 1);
    CHECK(zero.medre == doctest::Approx(0.25));
}

TEST_CASE("feature_agreement: invariant under a shared scale")
{
    const std::vector<double> p = {1.1, 2.2, 2.9, 4.5}, r = {1.0, 2.0, 3.1, 4.0};
    const Agreement a = feature_agreement(p, r);
    std::vector<double> p2, r2;
    for (double v : p) p2.push_back(3.5 * v);
    for (double v : r) r2.push_back(3.5 * v);
    const Agreement b = feature_agreement(p2, r2);
    CHECK(a.medre == doctest::Approx(b.medre).epsilon(1e-12));
    CHECK(*a.pearson_r == doctest::Approx(*b.pearson_r).epsilon(1e-12));
}
