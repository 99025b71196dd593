#include "roiforge/volume.hpp"

#include <cmath>

namespace roiforge {

std::string to_string(const Shape& shape) {
    return "(" + std::to_string(shape.width) + "," + std::to_string(shape.height) + "," +
           std::to_string(shape.depth) + ")";
}

bool spacing_close(const Spacing& a, const Spacing& b, double tol) {
    return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol && std::abs(a.z - b.z) <= tol;
}

Affine Affine::diagonal(const Spacing& spacing) {
    Affine a;
    a.m[0] = {spacing.x, 0.0, 0.0, 0.0};
    a.m[1] = {0.0, spacing.y, 0.0, 0.0};
    a.m[2] = {0.0, 0.0, spacing.z, 0.0};
    return a;
}

std::array<double, 3> Affine::apply(double i, double j, double k) const noexcept {
    std::array<double, 3> out{};
    for (std::size_t r = 0; r < 3; ++r) {
        out[r] = m[r][0] * i + m[r][1] * j + m[r][2] * k + m[r][3];
    }
    return out;
}

std::optional<AxisCodes> axis_codes(const Affine& affine) {
    static constexpr char kPositive[3] = {'R', 'A', 'S'};
    static constexpr char kNegative[3] = {'L', 'P', 'I'};
    constexpr double kObliqueTol = 1e-4;

    AxisCodes codes{};
    std::array<bool, 3> used{};
    for (std::size_t col = 0; col < 3; ++col) {
        double norm = 0.0;
        std::size_t dominant = 0;
        for (std::size_t row = 0; row < 3; ++row) {
            norm += affine.m[row][col] * affine.m[row][col];
            if (std::abs(affine.m[row][col]) > std::abs(affine.m[dominant][col])) {
                dominant = row;
            }
        }
        norm = std::sqrt(norm);
        if (norm == 0.0 || used[dominant]) {
            return std::nullopt;
        }
        for (std::size_t row = 0; row < 3; ++row) {
            if (row != dominant && std::abs(affine.m[row][col]) > kObliqueTol * norm) {
                return std::nullopt;
            }
        }
        used[dominant] = true;
        codes[col] = affine.m[dominant][col] > 0.0 ? kPositive[dominant] : kNegative[dominant];
    }
    return codes;
}

std::string to_string(const AxisCodes& codes) {
    return std::string(codes.begin(), codes.end());
}

void require_binary(const MaskGrid& mask, const std::string& what) {
    for (auto v : mask.data()) {
        if (v > 1) {
            throw DataError(what + ": mask contains non-binary value " + std::to_string(v));
        }
    }
}

MaskGrid nonzero_mask(const VolumeGrid& vol) {
    auto out = vol.like<std::uint8_t>();
    auto src = vol.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i] != 0.0f ? 1 : 0;
    }
    return out;
}

VolumeGrid to_volume(const MaskGrid& mask) {
    auto out = mask.like<float>();
    auto src = mask.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<float>(src[i]);
    }
    return out;
}

}  // namespace roiforge
