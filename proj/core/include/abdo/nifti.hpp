#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "abdo/volume.hpp"

namespace abdo {

/// NIfTI-1 datatype codes accepted by the reader.
enum class NiftiDatatype : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kUint16 = 512,
  kUint32 = 768,
};

/// Integer data without scaling and without negative values decodes to a
/// LabelMap; everything else decodes to a ScalarVolume.
using NiftiImage = std::variant<ScalarVolume, LabelMap>;

/// Reads a single-file NIfTI-1 image (`.nii` or `.nii.gz`). Geometry comes
/// from the qform when set, then the sform, then pixdim alone.
NiftiImage read_nifti(const std::filesystem::path& path);

/// Decodes an uncompressed NIfTI-1 byte stream.
NiftiImage decode_nifti(std::span<const std::uint8_t> bytes);

/// Any supported datatype, converted to single-precision intensities.
ScalarVolume read_scalar_nifti(const std::filesystem::path& path);
/// Throws InvalidArgument when the file does not hold a label map.
LabelMap read_label_nifti(const std::filesystem::path& path);

/// Writes a single-file NIfTI-1 image; gzip-compressed when `path` ends in
/// `.gz`. The file is written to a sibling temporary and renamed, so a failed
/// write leaves nothing behind.
void write_nifti(const ScalarVolume& volume, const std::filesystem::path& path);
void write_nifti(const LabelMap& labels, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_nifti(const ScalarVolume& volume);
/// Labels are stored as the narrowest of uint8/uint16/uint32 that fits.
std::vector<std::uint8_t> encode_nifti(const LabelMap& labels);

const Geometry& geometry_of(const NiftiImage& image) noexcept;

}  // namespace abdo
