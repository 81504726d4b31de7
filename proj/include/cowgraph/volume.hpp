#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cowgraph/geometry.hpp"

namespace cow {

using Index3 = std::array<int, 3>;

/// Placement of a voxel grid in world space: world = origin + R * diag(spacing) * index.
struct GridGeometry {
    Index3 dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{};
    Mat3 orientation = Mat3::identity();

    std::size_t voxel_count() const
    {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }

    bool contains(int i, int j, int k) const
    {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }
    bool contains(const Index3& v) const { return contains(v[0], v[1], v[2]); }

    std::size_t flat(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
    }
    std::size_t flat(const Index3& v) const { return flat(v[0], v[1], v[2]); }

    Index3 unflat(std::size_t idx) const
    {
        const auto nx = static_cast<std::size_t>(dims[0]);
        const auto ny = static_cast<std::size_t>(dims[1]);
        return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
    }

    Vec3 to_world(const Vec3& continuous_index) const
    {
        const Vec3 scaled{continuous_index.x * spacing.x, continuous_index.y * spacing.y,
                          continuous_index.z * spacing.z};
        return origin + orientation * scaled;
    }
    Vec3 to_world(const Index3& v) const { return to_world(Vec3{double(v[0]), double(v[1]), double(v[2])}); }
    Vec3 to_world(std::size_t idx) const { return to_world(unflat(idx)); }

    /// Inverse of to_world; orientation is orthonormal so its transpose is its inverse.
    Vec3 to_index(const Vec3& world) const
    {
        const Vec3 local = orientation.transposed() * (world - origin);
        return {local.x / spacing.x, local.y / spacing.y, local.z / spacing.z};
    }

    /// Voxel whose center is nearest to a world point, if inside the grid.
    std::optional<Index3> nearest_voxel(const Vec3& world) const;

    double voxel_volume() const { return spacing.x * spacing.y * spacing.z; }

    /// Physical length of an integer index step.
    double step_length(int di, int dj, int dk) const;

    /// Throws std::invalid_argument when dims, spacing or orientation are invalid.
    void validate() const;

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Same grid up to floating tolerance on spacing/origin/orientation.
bool same_grid(const GridGeometry& a, const GridGeometry& b, double tol = 1e-6);

template <typename T>
struct Grid {
    GridGeometry geometry;
    std::vector<T> data;

    Grid() = default;
    explicit Grid(const GridGeometry& g, T fill = T{}) : geometry(g), data(g.voxel_count(), fill) {}

    const Index3& dims() const { return geometry.dims; }
    std::size_t size() const { return data.size(); }

    T& operator()(int i, int j, int k) { return data[geometry.flat(i, j, k)]; }
    const T& operator()(int i, int j, int k) const { return data[geometry.flat(i, j, k)]; }
    T& operator[](std::size_t idx) { return data[idx]; }
    const T& operator[](std::size_t idx) const { return data[idx]; }

    /// Out-of-bounds reads yield zero (background).
    T get_or_zero(int i, int j, int k) const
    {
        return geometry.contains(i, j, k) ? data[geometry.flat(i, j, k)] : T{};
    }

    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Multiclass or binary voxel mask; label codes per `labels.hpp`.
using Mask = Grid<std::uint8_t>;
/// Distances in mm from foreground voxel centers to the nearest background voxel center.
using DistanceField = Grid<float>;

enum class ElementKind { UInt8, Int16, UInt16, Float32 };

const char* element_kind_name(ElementKind kind);

/// A volume as stored on disk: geometry plus typed voxel payload.
class Volume {
public:
    using Storage = std::variant<Grid<std::uint8_t>, Grid<std::int16_t>, Grid<std::uint16_t>, Grid<float>>;

    Volume() = default;
    template <typename T>
    Volume(Grid<T> grid) : storage_(std::move(grid))  // NOLINT(google-explicit-constructor)
    {
    }

    ElementKind kind() const;
    const GridGeometry& geometry() const;
    std::size_t size() const;

    template <typename T>
    const Grid<T>& as() const
    {
        return std::get<Grid<T>>(storage_);
    }
    template <typename T>
    bool holds() const
    {
        return std::holds_alternative<Grid<T>>(storage_);
    }

    /// Voxel value as double regardless of element kind.
    double value(std::size_t idx) const;

    /// Binarize (value > threshold -> 1) or cast to label codes.
    Mask to_binary(double threshold = 0.5) const;
    Mask to_labels() const;

    const Storage& storage() const { return storage_; }

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    Storage storage_;
};

/// The 26 neighbor offsets in (dk, dj, di)-lexicographic order.
const std::array<Index3, 26>& neighbor_offsets_26();
/// The 6 face-neighbor offsets.
const std::array<Index3, 6>& neighbor_offsets_6();

/// Number of nonzero 26-neighbors of a voxel.
int count_neighbors_26(const Mask& m, const Index3& v);

}  // namespace cow
