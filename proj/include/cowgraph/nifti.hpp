#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cowgraph/volume.hpp"

namespace cow {

/// Malformed or unsupported NIfTI input. `field()` names the offending header field.
class NiftiError : public std::runtime_error {
public:
    NiftiError(std::string field, const std::string& message)
        : std::runtime_error("parse_nifti: " + message), field_(std::move(field))
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::size_t kNiftiDataOffset = 352;

/// Decode a single-file ("n+1"), little-endian, uncompressed NIfTI-1 image with three dimensions.
/// Supported datatypes: 2 (uint8), 4 (int16), 512 (uint16), 16 (float32).
/// Non-fatal oddities (no spatial transform, ignored intensity scaling) are appended to `warnings`.
Volume parse_nifti(std::span<const std::uint8_t> bytes, std::vector<std::string>* warnings = nullptr);

/// Encode a volume; the sform and qform are both populated from the geometry.
std::vector<std::uint8_t> write_nifti(const Volume& volume);

Volume read_nifti_file(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Writes through a temporary sibling file and renames it into place.
void write_nifti_file(const Volume& volume, const std::filesystem::path& path);

/// Write bytes atomically (temporary file + rename).
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace cow
