/**
 * @file volume.hpp
 * @brief Voxel grid container shared by every pipeline stage
 *
 * Voxels are stored x-fastest (x + W * (y + H * z)), the same order NIfTI
 * uses on disk. x runs left-right (width), y anterior-posterior (height) and
 * z over slices (depth).
 */
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roiforge/error.hpp"

namespace roiforge {

struct Shape {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t depth = 0;

    [[nodiscard]] std::size_t voxels() const noexcept { return width * height * depth; }
    [[nodiscard]] std::size_t slice_voxels() const noexcept { return width * height; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

/// Voxel size in millimetres along x, y, z.
struct Spacing {
    double x = 1.0;
    double y = 1.0;
    double z = 1.0;

    [[nodiscard]] double voxel_volume() const noexcept { return x * y * z; }

    friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// True when every component differs by at most `tol` millimetres.
bool spacing_close(const Spacing& a, const Spacing& b, double tol = 1e-4);

/// Voxel index -> world (RAS+, mm) transform. Row-major 3x4; the implicit
/// last row is (0, 0, 0, 1).
struct Affine {
    std::array<std::array<double, 4>, 3> m{};

    static Affine diagonal(const Spacing& spacing);

    [[nodiscard]] std::array<double, 3> apply(double i, double j, double k) const noexcept;

    friend bool operator==(const Affine&, const Affine&) = default;
};

/// Axis-direction code triple, e.g. {'R','A','S'} or {'L','P','S'}.
using AxisCodes = std::array<char, 3>;

inline constexpr AxisCodes kRas{'R', 'A', 'S'};

/// Codes for an axis-aligned affine; nullopt when any voxel axis is oblique
/// or two voxel axes map onto the same world axis.
std::optional<AxisCodes> axis_codes(const Affine& affine);

std::string to_string(const AxisCodes& codes);

/// 3D grid of scalars with voxel spacing and an optional orientation.
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;

    Grid(Shape shape, Spacing spacing, T fill = T{})
        : shape_(shape), spacing_(spacing), data_(shape.voxels(), fill) {
        validate();
    }

    Grid(Shape shape, Spacing spacing, std::vector<T> data)
        : shape_(shape), spacing_(spacing), data_(std::move(data)) {
        validate();
        if (data_.size() != shape_.voxels()) {
            throw DataError("voxel buffer size does not match shape " + to_string(shape_));
        }
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t width() const noexcept { return shape_.width; }
    [[nodiscard]] std::size_t height() const noexcept { return shape_.height; }
    [[nodiscard]] std::size_t depth() const noexcept { return shape_.depth; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    [[nodiscard]] const Spacing& spacing() const noexcept { return spacing_; }
    void set_spacing(const Spacing& spacing) {
        spacing_ = spacing;
        validate();
    }

    [[nodiscard]] const std::optional<Affine>& affine() const noexcept { return affine_; }
    void set_affine(std::optional<Affine> affine) { affine_ = affine; }

    /// Orientation codes; nullopt when the orientation is missing or oblique.
    [[nodiscard]] std::optional<AxisCodes> orientation() const {
        return affine_ ? axis_codes(*affine_) : std::nullopt;
    }

    [[nodiscard]] std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
        return x + shape_.width * (y + shape_.height * z);
    }

    [[nodiscard]] T& at(std::size_t x, std::size_t y, std::size_t z) noexcept {
        return data_[index(x, y, z)];
    }
    [[nodiscard]] const T& at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
        return data_[index(x, y, z)];
    }

    [[nodiscard]] std::span<T> data() noexcept { return data_; }
    [[nodiscard]] std::span<const T> data() const noexcept { return data_; }

    [[nodiscard]] std::span<const T> slice(std::size_t z) const noexcept {
        return std::span<const T>(data_).subspan(z * shape_.slice_voxels(), shape_.slice_voxels());
    }
    [[nodiscard]] std::span<T> slice(std::size_t z) noexcept {
        return std::span<T>(data_).subspan(z * shape_.slice_voxels(), shape_.slice_voxels());
    }

    /// Same shape, spacing and affine.
    template <typename U>
    [[nodiscard]] bool same_geometry(const Grid<U>& other, double tol = 1e-4) const {
        return shape_ == other.shape() && spacing_close(spacing_, other.spacing(), tol);
    }

    /// Empty grid with this grid's geometry and a different value type.
    template <typename U>
    [[nodiscard]] Grid<U> like(U fill = U{}) const {
        Grid<U> out(shape_, spacing_, fill);
        out.set_affine(affine_);
        return out;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    void validate() const {
        if (shape_.width == 0 || shape_.height == 0 || shape_.depth == 0) {
            throw DataError("grid dimensions must be >= 1, got " + to_string(shape_));
        }
        if (!(spacing_.x > 0.0 && spacing_.y > 0.0 && spacing_.z > 0.0)) {
            throw DataError("voxel spacing must be positive");
        }
    }

    Shape shape_{};
    Spacing spacing_{};
    std::optional<Affine> affine_;
    std::vector<T> data_;
};

using VolumeGrid = Grid<float>;
using MaskGrid = Grid<std::uint8_t>;

/// Throws DataError if any voxel is outside {0, 1}.
void require_binary(const MaskGrid& mask, const std::string& what);

/// Mask with 1 wherever the volume is non-zero.
MaskGrid nonzero_mask(const VolumeGrid& vol);

VolumeGrid to_volume(const MaskGrid& mask);

/// Keep only the listed slices, in the given order.
template <typename T>
Grid<T> take_slices(const Grid<T>& grid, std::span<const std::size_t> slices) {
    if (slices.empty()) {
        throw DataError("cannot build a volume from zero slices");
    }
    Shape shape = grid.shape();
    shape.depth = slices.size();
    std::vector<T> data;
    data.reserve(shape.voxels());
    for (std::size_t z : slices) {
        if (z >= grid.depth()) {
            throw DataError("slice index " + std::to_string(z) + " out of range");
        }
        auto s = grid.slice(z);
        data.insert(data.end(), s.begin(), s.end());
    }
    Grid<T> out(shape, grid.spacing(), std::move(data));
    out.set_affine(grid.affine());
    return out;
}

}  // namespace roiforge
