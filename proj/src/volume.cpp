#include "cowgraph/volume.hpp"

#include <cmath>

namespace cow {

std::optional<Index3> GridGeometry::nearest_voxel(const Vec3& world) const
{
    const Vec3 c = to_index(world);
    const Index3 v{static_cast<int>(std::lround(c.x)), static_cast<int>(std::lround(c.y)),
                   static_cast<int>(std::lround(c.z))};
    if (!contains(v)) return std::nullopt;
    return v;
}

double GridGeometry::step_length(int di, int dj, int dk) const
{
    const double x = di * spacing.x;
    const double y = dj * spacing.y;
    const double z = dk * spacing.z;
    return std::sqrt(x * x + y * y + z * z);
}

void GridGeometry::validate() const
{
    for (int a = 0; a < 3; ++a) {
        if (dims[static_cast<std::size_t>(a)] < 1) throw std::invalid_argument("grid dims must be >= 1");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
            throw std::invalid_argument("grid spacing must be > 0");
    }
    for (int c = 0; c < 3; ++c) {
        for (int d = 0; d < 3; ++d) {
            const double expect = c == d ? 1.0 : 0.0;
            if (std::abs(dot(orientation.column(c), orientation.column(d)) - expect) > 1e-4)
                throw std::invalid_argument("grid orientation is not orthonormal");
        }
    }
}

bool same_grid(const GridGeometry& a, const GridGeometry& b, double tol)
{
    if (a.dims != b.dims) return false;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(a.spacing[i] - b.spacing[i]) > tol) return false;
        if (std::abs(a.origin[i] - b.origin[i]) > tol) return false;
    }
    for (std::size_t i = 0; i < 9; ++i)
        if (std::abs(a.orientation.m[i] - b.orientation.m[i]) > tol) return false;
    return true;
}

const char* element_kind_name(ElementKind kind)
{
    switch (kind) {
    case ElementKind::UInt8: return "uint8";
    case ElementKind::Int16: return "int16";
    case ElementKind::UInt16: return "uint16";
    case ElementKind::Float32: return "float32";
    }
    return "unknown";
}

ElementKind Volume::kind() const
{
    switch (storage_.index()) {
    case 0: return ElementKind::UInt8;
    case 1: return ElementKind::Int16;
    case 2: return ElementKind::UInt16;
    default: return ElementKind::Float32;
    }
}

const GridGeometry& Volume::geometry() const
{
    return std::visit([](const auto& g) -> const GridGeometry& { return g.geometry; }, storage_);
}

std::size_t Volume::size() const
{
    return std::visit([](const auto& g) { return g.data.size(); }, storage_);
}

double Volume::value(std::size_t idx) const
{
    return std::visit([idx](const auto& g) { return static_cast<double>(g.data[idx]); }, storage_);
}

Mask Volume::to_binary(double threshold) const
{
    Mask out(geometry());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(i) > threshold ? 1 : 0;
    return out;
}

Mask Volume::to_labels() const
{
    Mask out(geometry());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = value(i);
        if (v < 0.0 || v > 255.0 || v != std::floor(v))
            throw std::invalid_argument("volume value is not a label code: " + std::to_string(v));
        out[i] = static_cast<std::uint8_t>(v);
    }
    return out;
}

const std::array<Index3, 26>& neighbor_offsets_26()
{
    static const std::array<Index3, 26> offsets = [] {
        std::array<Index3, 26> o{};
        std::size_t n = 0;
        for (int dk = -1; dk <= 1; ++dk)
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di)
                    if (di != 0 || dj != 0 || dk != 0) o[n++] = {di, dj, dk};
        return o;
    }();
    return offsets;
}

const std::array<Index3, 6>& neighbor_offsets_6()
{
    static const std::array<Index3, 6> offsets{
        Index3{-1, 0, 0}, Index3{1, 0, 0}, Index3{0, -1, 0}, Index3{0, 1, 0}, Index3{0, 0, -1}, Index3{0, 0, 1}};
    return offsets;
}

int count_neighbors_26(const Mask& m, const Index3& v)
{
    int n = 0;
    for (const auto& o : neighbor_offsets_26())
        if (m.get_or_zero(v[0] + o[0], v[1] + o[1], v[2] + o[2]) != 0) ++n;
    return n;
}

}  // namespace cow
