#pragma once

#include <filesystem>

#include "acfclust/volgrid.hpp"

namespace acfclust {

// Single-file NIfTI-1 (.nii, magic "n+1"), uncompressed. Reading accepts the
// common integer and floating datatypes (with scl_slope/scl_inter applied) in
// either byte order; writing always produces little-endian float32.
// Spatial orientation is reduced to per-axis spacing (pixdim) and an origin
// taken from the sform/qform translation; rotations are ignored.

Series4D read_nifti(const std::filesystem::path& path);
// Nonzero voxels of the first volume are in the mask.
Mask read_nifti_mask(const std::filesystem::path& path);

void write_nifti(const std::filesystem::path& path, const ScalarField& field);
void write_nifti(const std::filesystem::path& path, const Series4D& series);
void write_nifti(const std::filesystem::path& path, const Mask& mask);

}  // namespace acfclust
