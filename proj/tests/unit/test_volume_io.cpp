#include <cstring>
#include <random>
#include <set>

#include "cowgraph/nifti.hpp"
#include "cowgraph/volume_ops.hpp"
#include "doctest.h"
#include "phantoms.hpp"

using namespace cow;

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& b, std::size_t off, T v)
{
    std::memcpy(b.data() + off, &v, sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& b, std::size_t off)
{
    T v;
    std::memcpy(&v, b.data() + off, sizeof(T));
    return v;
}

// Hand-built single-file header for a 4^3 uint8 image at 0.6 mm with an identity sform.
std::vector<std::uint8_t> minimal_header(const char* magic)
{
    std::vector<std::uint8_t> b(352 + 64, 0);
    put<std::int32_t>(b, 0, 348);
    const std::int16_t dim[8] = {3, 4, 4, 4, 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) put<std::int16_t>(b, 40 + 2 * i, dim[i]);
    put<std::int16_t>(b, 70, 2);
    put<std::int16_t>(b, 72, 8);
    const float pix[8] = {1, 0.6f, 0.6f, 0.6f, 0, 0, 0, 0};
    for (int i = 0; i < 8; ++i) put<float>(b, 76 + 4 * i, pix[i]);
    put<float>(b, 108, 352.0f);
    put<std::int16_t>(b, 254, 1);
    const float srow[3][4] = {{0.6f, 0, 0, 0}, {0, 0.6f, 0, 0}, {0, 0, 0.6f, 0}};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) put<float>(b, 280 + 16 * r + 4 * c, srow[r][c]);
    std::memcpy(b.data() + 344, magic, 4);
    for (int i = 0; i < 64; ++i) b[352 + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i % 3);
    return b;
}

template <typename T>
Grid<T> random_grid(std::mt19937& rng, Index3 dims, Vec3 spacing)
{
    GridGeometry g;
    g.dims = dims;
    g.spacing = spacing;
    g.origin = {-3.5, 2.25, 10.0};
    Grid<T> out(g);
    std::uniform_int_distribution<int> d(0, 200);
    for (auto& v : out.data) v = static_cast<T>(d(rng));
    return out;
}

Mask block_mask(Index3 dims, double spacing)
{
    GridGeometry g;
    g.dims = dims;
    g.spacing = {spacing, spacing, spacing};
    return Mask(g, 0);
}

}  // namespace

TEST_CASE("parse_nifti: minimal well-formed header")
{
    const auto b = minimal_header("n+1\0");
    const Volume v = parse_nifti(b);
    CHECK(v.geometry().dims == Index3{4, 4, 4});
    CHECK(v.geometry().spacing.x == doctest::Approx(0.6));
    CHECK(v.geometry().spacing.y == doctest::Approx(0.6));
    CHECK(v.geometry().spacing.z == doctest::Approx(0.6));
    CHECK(v.kind() == ElementKind::UInt8);
    CHECK(v.value(5) == 2.0);
}

TEST_CASE("parse_nifti: two-file magic is rejected")
{
    const auto b = minimal_header("ni1\0");
    try {
        parse_nifti(b);
        FAIL("expected NiftiError");
    } catch (const NiftiError& e) {
        CHECK(std::string(e.what()).find("unsupported magic") != std::string::npos);
        CHECK(e.field() == "magic");
    }
}

TEST_CASE("parse_nifti: malformed inputs")
{
    auto b = minimal_header("n+1\0");
    CHECK_THROWS_AS(parse_nifti(std::span<const std::uint8_t>(b.data(), 100)), NiftiError);
    auto bad = b;
    std::memcpy(bad.data() + 344, "xyz\0", 4);
    CHECK_THROWS_WITH_AS(parse_nifti(bad), "parse_nifti: bad magic", NiftiError);
    bad = b;
    put<std::int16_t>(bad, 70, 64);
    CHECK_THROWS_AS(parse_nifti(bad), NiftiError);
    bad = b;
    b.resize(352 + 10);
    CHECK_THROWS_AS(parse_nifti(b), NiftiError);
}

TEST_CASE("write_nifti: byte round trip on a canonical fixture")
{
    std::mt19937 rng(7);
    const Volume v(random_grid<std::int16_t>(rng, {5, 3, 4}, {0.5, 0.25, 0.75}));
    const auto bytes = write_nifti(v);
    CHECK(write_nifti(parse_nifti(bytes)) == bytes);
}

TEST_CASE("write_nifti: parse(write(v)) == v for every element kind")
{
    std::mt19937 rng(11);
    for (int rep = 0; rep < 4; ++rep) {
        const Index3 dims{1 + rep, 3, 2 + rep};
        const std::vector<Volume> vols = {Volume(random_grid<std::uint8_t>(rng, dims, {0.25, 0.25, 0.25})),
                                          Volume(random_grid<std::int16_t>(rng, dims, {1, 2, 3})),
                                          Volume(random_grid<std::uint16_t>(rng, dims, {0.5, 0.5, 1})),
                                          Volume(random_grid<float>(rng, dims, {0.375, 0.375, 0.375}))};  // header fields are float32
        for (const auto& v : vols) CHECK(parse_nifti(write_nifti(v)) == v);
    }
    // Rotated orientation survives as well.
    auto g = random_grid<std::uint8_t>(rng, {3, 3, 3}, {0.5, 0.5, 0.5});
    g.geometry.orientation = rotation(normalized(Vec3{1, 2, 3}), 0.7);
    const Volume back = parse_nifti(write_nifti(Volume(g)));
    CHECK(same_grid(back.geometry(), g.geometry, 1e-5));
}

TEST_CASE("write_nifti: header layout of a 1x1x1 volume")
{
    GridGeometry g;
    Grid<std::uint8_t> one(g, 7);
    const auto b = write_nifti(Volume(one));
    REQUIRE(b.size() == 348 + 4 + 1);
    CHECK(get<std::int32_t>(b, 0) == 348);
    CHECK(get<float>(b, 108) == 352.0f);
    CHECK(b[352] == 7);
}

TEST_CASE("write_nifti: float volume uses datatype 16")
{
    GridGeometry g;
    g.dims = {2, 2, 2};
    const auto b = write_nifti(Volume(Grid<float>(g, 1.5f)));
    CHECK(get<std::int16_t>(b, 70) == 16);
    CHECK(get<std::int16_t>(b, 72) == 32);
}

TEST_CASE("file io: atomic write and missing file")
{
    const auto dir = std::filesystem::temp_directory_path() / "cowgraph_io_test";
    std::filesystem::create_directories(dir);
    std::mt19937 rng(3);
    const Volume v(random_grid<std::uint8_t>(rng, {4, 5, 6}, {0.25, 0.25, 0.25}));
    write_nifti_file(v, dir / "a.nii");
    CHECK(read_nifti_file(dir / "a.nii") == v);
    CHECK_THROWS_AS(read_nifti_file(dir / "missing.nii"), NiftiError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("resample_nearest: 0.5 mm to 0.25 mm replicates 2^3 blocks")
{
    std::mt19937 rng(5);
    Mask m = block_mask({4, 4, 4}, 0.5);
    std::uniform_int_distribution<int> d(0, 12);
    for (auto& v : m.data) v = static_cast<std::uint8_t>(d(rng));
    const Mask r = resample_nearest(m, {0.25, 0.25, 0.25});
    REQUIRE(r.dims() == Index3{8, 8, 8});
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i) CHECK(r(i, j, k) == m(i / 2, j / 2, k / 2));
}

TEST_CASE("resample_nearest: identity and single voxel")
{
    Mask m = block_mask({3, 4, 5}, 0.25);
    m(1, 2, 3) = 4;
    CHECK(resample_nearest(m, {0.25, 0.25, 0.25}) == m);

    Mask one = block_mask({1, 1, 1}, 0.5);
    one[0] = 10;
    const Mask r = resample_nearest(one, {0.25, 0.25, 0.25});
    CHECK(r.dims() == Index3{2, 2, 2});
    CHECK(count_nonzero(select_label(r, 10)) == 8);
}

TEST_CASE("resample_nearest never introduces labels")
{
    std::mt19937 rng(9);
    std::uniform_int_distribution<int> d(0, 3);
    for (int rep = 0; rep < 10; ++rep) {
        Mask m = block_mask({5, 6, 7}, 0.4);
        for (auto& v : m.data) v = static_cast<std::uint8_t>(d(rng) * 3);
        const Mask r = resample_nearest(m, {0.25, 0.3, 0.55});
        std::set<int> in(m.data.begin(), m.data.end()), out(r.data.begin(), r.data.end());
        for (int v : out) CHECK(in.count(v) == 1);
    }
}

TEST_CASE("filter_small_components: diagonal rule")
{
    Mask m = block_mask({120, 10, 10}, 1.0);
    for (int i = 0; i < 100; ++i) m(i, 5, 5) = 1;  // diagonal ~100
    for (int i = 110; i < 114; ++i) m(i, 2, 2) = 1;  // diagonal ~4.2 < 5
    const auto diags = component_diagonals(label_components(m));
    REQUIRE(diags.size() == 3);
    const Mask f = filter_small_components(m, 0.05);
    CHECK(count_nonzero(f) == 100);
    CHECK(filter_small_components(f, 0.05) == f);

    Mask single = block_mask({10, 10, 10}, 1.0);
    for (int i = 0; i < 5; ++i) single(i, 3, 3) = 2;
    CHECK(filter_small_components(single) == single);

    Mask twins = block_mask({20, 10, 10}, 1.0);
    for (int i = 0; i < 5; ++i) twins(i, 3, 3) = twins(i + 10, 6, 6) = 1;
    CHECK(filter_small_components(twins) == twins);
}

TEST_CASE("filter_small_components is idempotent on random volumes")
{
    std::mt19937 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const Mask m = cowtest::random_mask(rng, 16, 0.08);
        const Mask f = filter_small_components(m, 0.3);
        CHECK(filter_small_components(f, 0.3) == f);
    }
}

TEST_CASE("label_components agrees with a BFS oracle")
{
    std::mt19937 rng(4);
    for (int rep = 0; rep < 30; ++rep) {
        const Mask m = cowtest::random_mask(rng, 12, 0.2 + 0.02 * rep);
        CHECK(count_components(m) == cowtest::count_components_bfs(m));
    }
}

namespace {

// All-pairs squared distance in index units (exact integers).
long brute_sq(const Mask& m, std::size_t idx)
{
    const GridGeometry& g = m.geometry;
    if (!m[idx]) return 0;
    const Index3 v = g.unflat(idx);
    long best = std::numeric_limits<long>::max();
    // Out-of-grid background: one step past each face.
    for (int a = 0; a < 3; ++a) {
        const long d1 = v[static_cast<std::size_t>(a)] + 1;
        const long d2 = g.dims[static_cast<std::size_t>(a)] - v[static_cast<std::size_t>(a)];
        best = std::min(best, std::min(d1 * d1, d2 * d2));
    }
    for (std::size_t j = 0; j < m.size(); ++j) {
        if (m[j]) continue;
        const Index3 w = g.unflat(j);
        long s = 0;
        for (int a = 0; a < 3; ++a) {
            const long d = v[static_cast<std::size_t>(a)] - w[static_cast<std::size_t>(a)];
            s += d * d;
        }
        best = std::min(best, s);
    }
    return best;
}

}  // namespace

TEST_CASE("euclidean_distance_field: examples")
{
    Mask one = block_mask({5, 5, 5}, 0.25);
    one(2, 2, 2) = 1;
    const DistanceField d = euclidean_distance_field(one);
    CHECK(d(2, 2, 2) == doctest::Approx(0.25));
    CHECK(d(0, 0, 0) == 0.0f);

    Mask cube = block_mask({9, 9, 9}, 1.0);
    for (auto& v : cube.data) v = 1;
    const DistanceField dc = euclidean_distance_field(cube);
    CHECK(dc(4, 4, 4) == doctest::Approx(std::sqrt(double(brute_sq(cube, cube.geometry.flat(4, 4, 4))))));
    CHECK(dc(4, 4, 4) == doctest::Approx(5.0));
}

TEST_CASE("squared_distance_field equals all-pairs brute force exactly")
{
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> side(1, 16);
    for (int rep = 0; rep < 25; ++rep) {
        Mask m = block_mask({side(rng), side(rng), side(rng)}, 1.0);
        std::bernoulli_distribution fill(0.6 + 0.015 * rep);
        for (auto& v : m.data) v = fill(rng) ? 1 : 0;
        const Grid<double> sq = squared_distance_field(m);
        bool ok = true;
        for (std::size_t i = 0; i < m.size(); ++i)
            if (static_cast<long>(std::llround(sq[i])) != brute_sq(m, i) || sq[i] != std::round(sq[i])) ok = false;
        CHECK(ok);
        // Scaled field agrees with the index-space result.
        m.geometry.spacing = {0.25, 0.25, 0.25};
        const DistanceField d = euclidean_distance_field(m);
        bool ok2 = true;
        for (std::size_t i = 0; i < m.size(); ++i)
            if (std::abs(d[i] - 0.25 * std::sqrt(double(brute_sq(m, i)))) > 1e-5) ok2 = false;
        CHECK(ok2);
    }
}
