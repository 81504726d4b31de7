#include "cowgraph/nifti.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace cow {

static_assert(std::endian::native == std::endian::little, "NIfTI codec assumes a little-endian host");

namespace {

// Header field offsets (NIfTI-1).
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuaternB = 256;
constexpr std::size_t kOffQoffsetX = 268;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffMagic = 344;

constexpr std::int16_t kDtUInt8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtUInt16 = 512;

template <typename T>
T load(std::span<const std::uint8_t> b, std::size_t off)
{
    T v;
    std::memcpy(&v, b.data() + off, sizeof(T));
    return v;
}

template <typename T>
void store(std::vector<std::uint8_t>& b, std::size_t off, T v)
{
    std::memcpy(b.data() + off, &v, sizeof(T));
}

std::int16_t datatype_code(ElementKind k)
{
    switch (k) {
    case ElementKind::UInt8: return kDtUInt8;
    case ElementKind::Int16: return kDtInt16;
    case ElementKind::UInt16: return kDtUInt16;
    case ElementKind::Float32: return kDtFloat32;
    }
    return 0;
}

std::size_t element_size(std::int16_t datatype)
{
    switch (datatype) {
    case kDtUInt8: return 1;
    case kDtInt16:
    case kDtUInt16: return 2;
    case kDtFloat32: return 4;
    default: return 0;
    }
}

Mat3 quaternion_to_matrix(double b, double c, double d, double qfac)
{
    double a = 1.0 - (b * b + c * c + d * d);
    if (a < 1e-7) {
        // b, c, d describe a 180 degree rotation; renormalize.
        const double n = 1.0 / std::sqrt(b * b + c * c + d * d);
        b *= n;
        c *= n;
        d *= n;
        a = 0.0;
    } else {
        a = std::sqrt(a);
    }
    Mat3 r;
    r(0, 0) = a * a + b * b - c * c - d * d;
    r(0, 1) = 2 * (b * c - a * d);
    r(0, 2) = 2 * (b * d + a * c);
    r(1, 0) = 2 * (b * c + a * d);
    r(1, 1) = a * a + c * c - b * b - d * d;
    r(1, 2) = 2 * (c * d - a * b);
    r(2, 0) = 2 * (b * d - a * c);
    r(2, 1) = 2 * (c * d + a * b);
    r(2, 2) = a * a + d * d - c * c - b * b;
    if (qfac < 0) {
        r(0, 2) = -r(0, 2);
        r(1, 2) = -r(1, 2);
        r(2, 2) = -r(2, 2);
    }
    return r;
}

struct Quaternion {
    double b = 0, c = 0, d = 0, qfac = 1;
};

// Follows the reference nifti1_io conversion for an orthonormal matrix.
Quaternion matrix_to_quaternion(Mat3 r)
{
    Quaternion q;
    const double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                       r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                       r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
    if (det < 0) {
        q.qfac = -1;
        r(0, 2) = -r(0, 2);
        r(1, 2) = -r(1, 2);
        r(2, 2) = -r(2, 2);
    }
    double a = r(0, 0) + r(1, 1) + r(2, 2) + 1.0;
    double b, c, d;
    if (a > 0.5) {
        a = 0.5 * std::sqrt(a);
        b = 0.25 * (r(2, 1) - r(1, 2)) / a;
        c = 0.25 * (r(0, 2) - r(2, 0)) / a;
        d = 0.25 * (r(1, 0) - r(0, 1)) / a;
    } else {
        const double xd = 1.0 + r(0, 0) - (r(1, 1) + r(2, 2));
        const double yd = 1.0 + r(1, 1) - (r(0, 0) + r(2, 2));
        const double zd = 1.0 + r(2, 2) - (r(0, 0) + r(1, 1));
        if (xd > 1.0) {
            b = 0.5 * std::sqrt(xd);
            c = 0.25 * (r(0, 1) + r(1, 0)) / b;
            d = 0.25 * (r(0, 2) + r(2, 0)) / b;
            a = 0.25 * (r(2, 1) - r(1, 2)) / b;
        } else if (yd > 1.0) {
            c = 0.5 * std::sqrt(yd);
            b = 0.25 * (r(0, 1) + r(1, 0)) / c;
            d = 0.25 * (r(1, 2) + r(2, 1)) / c;
            a = 0.25 * (r(0, 2) - r(2, 0)) / c;
        } else {
            d = 0.5 * std::sqrt(zd);
            b = 0.25 * (r(0, 2) + r(2, 0)) / d;
            c = 0.25 * (r(1, 2) + r(2, 1)) / d;
            a = 0.25 * (r(1, 0) - r(0, 1)) / d;
        }
        if (a < 0.0) {
            b = -b;
            c = -c;
            d = -d;
        }
    }
    q.b = b;
    q.c = c;
    q.d = d;
    return q;
}

template <typename T>
Grid<T> decode_payload(const GridGeometry& g, std::span<const std::uint8_t> bytes, std::size_t offset)
{
    Grid<T> grid(g);
    std::memcpy(grid.data.data(), bytes.data() + offset, grid.data.size() * sizeof(T));
    return grid;
}

void warn(std::vector<std::string>* warnings, std::string msg)
{
    if (warnings) warnings->push_back(std::move(msg));
}

}  // namespace

Volume parse_nifti(std::span<const std::uint8_t> bytes, std::vector<std::string>* warnings)
{
    if (bytes.size() < kNiftiHeaderSize) throw NiftiError("sizeof_hdr", "truncated header");

    const auto sizeof_hdr = load<std::int32_t>(bytes, kOffSizeofHdr);
    if (sizeof_hdr != 348) {
        const auto u = static_cast<std::uint32_t>(sizeof_hdr);
        const std::uint32_t swapped = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
        if (swapped == 348u)
            throw NiftiError("sizeof_hdr", "big-endian files are not supported");
        throw NiftiError("sizeof_hdr", "bad sizeof_hdr " + std::to_string(sizeof_hdr));
    }

    char magic[4];
    std::memcpy(magic, bytes.data() + kOffMagic, 4);
    if (std::memcmp(magic, "ni1\0", 4) == 0)
        throw NiftiError("magic", "unsupported magic \"ni1\" (two-file layout)");
    if (std::memcmp(magic, "n+1\0", 4) != 0) throw NiftiError("magic", "bad magic");

    std::array<std::int16_t, 8> dim{};
    for (std::size_t i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(bytes, kOffDim + 2 * i);
    if (dim[0] != 3) throw NiftiError("dim", "expected 3 dimensions, got " + std::to_string(dim[0]));
    for (std::size_t i = 1; i <= 3; ++i)
        if (dim[i] < 1) throw NiftiError("dim", "dimension " + std::to_string(i) + " is not positive");

    const auto datatype = load<std::int16_t>(bytes, kOffDatatype);
    const std::size_t esize = element_size(datatype);
    if (esize == 0) throw NiftiError("datatype", "unsupported datatype " + std::to_string(datatype));
    const auto bitpix = load<std::int16_t>(bytes, kOffBitpix);
    if (static_cast<std::size_t>(bitpix) != esize * 8)
        throw NiftiError("bitpix", "bitpix " + std::to_string(bitpix) + " does not match datatype");

    std::array<float, 8> pixdim{};
    for (std::size_t i = 0; i < 8; ++i) pixdim[i] = load<float>(bytes, kOffPixdim + 4 * i);

    GridGeometry g;
    g.dims = {dim[1], dim[2], dim[3]};
    for (int i = 0; i < 3; ++i) {
        const double s = pixdim[static_cast<std::size_t>(i + 1)];
        if (!(s > 0.0) || !std::isfinite(s)) throw NiftiError("pixdim", "voxel spacing must be positive");
        g.spacing[i] = s;
    }

    const float vox_offset = load<float>(bytes, kOffVoxOffset);
    const std::size_t payload = g.voxel_count() * esize;
    if (!(vox_offset >= static_cast<float>(kNiftiHeaderSize)) || vox_offset != std::floor(vox_offset) ||
        static_cast<std::size_t>(vox_offset) + payload > bytes.size())
        throw NiftiError("vox_offset", "inconsistent vox_offset " + std::to_string(vox_offset));
    const auto offset = static_cast<std::size_t>(vox_offset);

    const float slope = load<float>(bytes, kOffSclSlope);
    const float inter = load<float>(bytes, kOffSclInter);
    if (slope != 0.0f && (slope != 1.0f || inter != 0.0f)) warn(warnings, "intensity scaling ignored");

    const auto qform_code = load<std::int16_t>(bytes, kOffQformCode);
    const auto sform_code = load<std::int16_t>(bytes, kOffSformCode);
    if (sform_code > 0) {
        for (int r = 0; r < 3; ++r) {
            const std::size_t row = kOffSrowX + 16 * static_cast<std::size_t>(r);
            for (int c = 0; c < 3; ++c) {
                double v = load<float>(bytes, row + 4 * static_cast<std::size_t>(c));
                g.orientation(r, c) = v;
            }
            g.origin[r] = load<float>(bytes, row + 12);
        }
        for (int c = 0; c < 3; ++c) {
            const Vec3 col = g.orientation.column(c);
            const double n = norm(col);
            if (n == 0.0) throw NiftiError("srow_x", "degenerate sform matrix");
            double scale = g.spacing[c];
            if (std::abs(n / scale - 1.0) > 1e-4) {
                warn(warnings, "sform column norms disagree with pixdim; using pixdim spacing");
                scale = n;
            }
            for (int r = 0; r < 3; ++r) g.orientation(r, c) /= scale;
        }
    } else if (qform_code > 0) {
        const double b = load<float>(bytes, kOffQuaternB);
        const double c = load<float>(bytes, kOffQuaternB + 4);
        const double d = load<float>(bytes, kOffQuaternB + 8);
        const double qfac = pixdim[0] < 0.0f ? -1.0 : 1.0;
        g.orientation = quaternion_to_matrix(b, c, d, qfac);
        g.origin = {load<float>(bytes, kOffQoffsetX), load<float>(bytes, kOffQoffsetX + 4),
                    load<float>(bytes, kOffQoffsetX + 8)};
    } else {
        warn(warnings, "no sform or qform; using identity orientation");
    }

    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw NiftiError(sform_code > 0 ? "srow_x" : "quatern_b", e.what());
    }

    switch (datatype) {
    case kDtUInt8: return decode_payload<std::uint8_t>(g, bytes, offset);
    case kDtInt16: return decode_payload<std::int16_t>(g, bytes, offset);
    case kDtUInt16: return decode_payload<std::uint16_t>(g, bytes, offset);
    default: return decode_payload<float>(g, bytes, offset);
    }
}

std::vector<std::uint8_t> write_nifti(const Volume& volume)
{
    const GridGeometry& g = volume.geometry();
    const std::int16_t datatype = datatype_code(volume.kind());
    const std::size_t esize = element_size(datatype);
    std::vector<std::uint8_t> out(kNiftiDataOffset + volume.size() * esize, 0);

    store<std::int32_t>(out, kOffSizeofHdr, 348);
    store<std::int16_t>(out, kOffDim, 3);
    for (std::size_t i = 0; i < 3; ++i) store<std::int16_t>(out, kOffDim + 2 * (i + 1), static_cast<std::int16_t>(g.dims[i]));
    for (std::size_t i = 4; i < 8; ++i) store<std::int16_t>(out, kOffDim + 2 * i, 1);
    store<std::int16_t>(out, kOffDatatype, datatype);
    store<std::int16_t>(out, kOffBitpix, static_cast<std::int16_t>(esize * 8));

    const Quaternion q = matrix_to_quaternion(g.orientation);
    store<float>(out, kOffPixdim, static_cast<float>(q.qfac));
    for (std::size_t i = 0; i < 3; ++i) store<float>(out, kOffPixdim + 4 * (i + 1), static_cast<float>(g.spacing[static_cast<int>(i)]));
    store<float>(out, kOffVoxOffset, static_cast<float>(kNiftiDataOffset));
    store<float>(out, kOffSclSlope, 1.0f);
    out[kOffXyztUnits] = 2;  // millimetres

    store<std::int16_t>(out, kOffQformCode, 1);
    store<std::int16_t>(out, kOffSformCode, 1);
    store<float>(out, kOffQuaternB, static_cast<float>(q.b));
    store<float>(out, kOffQuaternB + 4, static_cast<float>(q.c));
    store<float>(out, kOffQuaternB + 8, static_cast<float>(q.d));
    for (int r = 0; r < 3; ++r) {
        store<float>(out, kOffQoffsetX + 4 * static_cast<std::size_t>(r), static_cast<float>(g.origin[r]));
        const std::size_t row = kOffSrowX + 16 * static_cast<std::size_t>(r);
        for (int c = 0; c < 3; ++c)
            store<float>(out, row + 4 * static_cast<std::size_t>(c), static_cast<float>(g.orientation(r, c) * g.spacing[c]));
        store<float>(out, row + 12, static_cast<float>(g.origin[r]));
    }
    std::memcpy(out.data() + kOffMagic, "n+1\0", 4);

    std::visit(
        [&out](const auto& grid) {
            if (!grid.data.empty())
                std::memcpy(out.data() + kNiftiDataOffset, grid.data.data(), grid.data.size() * sizeof(grid.data[0]));
        },
        volume.storage());
    return out;
}

Volume read_nifti_file(const std::filesystem::path& path, std::vector<std::string>* warnings)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NiftiError("file", "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
        throw NiftiError("sizeof_hdr", "gzip-compressed input; decompress before parsing");
    return parse_nifti(bytes, warnings);
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text)
{
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_nifti_file(const Volume& volume, const std::filesystem::path& path)
{
    const auto bytes = write_nifti(volume);
    write_file_atomic(path, bytes);
}

}  // namespace cow
