/**
 * @file volume_io.hpp
 * @brief NIfTI-1 reading/writing and RAS canonicalisation
 *
 * Single-file NIfTI-1 only (.nii and .nii.gz). Images are held as float32 and
 * masks as uint8 in memory; any integer or float datatype is accepted on
 * read. Orientation comes from the sform when present, else the qform.
 */
#pragma once

#include <filesystem>

#include "roiforge/volume.hpp"

namespace roiforge {

VolumeGrid load_volume(const std::filesystem::path& path);

/// Loads a label/mask file. Every voxel must be 0 or 1.
MaskGrid load_mask(const std::filesystem::path& path);

/// Writes float32 data; ".gz" suffix selects gzip compression.
void save_volume(const VolumeGrid& vol, const std::filesystem::path& path);

/// Writes uint8 data.
void save_mask(const MaskGrid& mask, const std::filesystem::path& path);

/// Reorders and flips axes so the grid is stored in RAS. Every voxel keeps
/// its world coordinate. Throws DataError when the orientation is missing
/// or oblique.
template <typename T>
Grid<T> canonicalize_ras(const Grid<T>& grid);

extern template VolumeGrid canonicalize_ras(const VolumeGrid&);
extern template MaskGrid canonicalize_ras(const MaskGrid&);

}  // namespace roiforge
