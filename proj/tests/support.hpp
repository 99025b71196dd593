// Test helpers: scratch directories, seeded random generators and
// brute-force reference implementations used as oracles.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "roiforge/cohort_analytics.hpp"
#include "roiforge/seg_metrics.hpp"
#include "roiforge/volume.hpp"

namespace rftest {

using namespace roiforge;

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "roiforge-XXXXXX").string();
        if (::mkdtemp(tmpl.data()) == nullptr) {
            throw std::runtime_error("mkdtemp failed");
        }
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const {
        return path_ / name;
    }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Small seeded generator with the draws the property tests need.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::size_t size(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool chance(double p) { return real(0.0, 1.0) < p; }

    Shape shape(std::size_t max_side) {
        return {size(1, max_side), size(1, max_side), size(1, max_side)};
    }

    MaskGrid mask(const Shape& s, double density, Spacing spacing = {}) {
        MaskGrid m(s, spacing);
        for (auto& v : m.data()) v = chance(density) ? 1 : 0;
        return m;
    }

    VolumeGrid volume(const Shape& s, double lo, double hi, Spacing spacing = {}) {
        VolumeGrid v(s, spacing);
        for (auto& x : v.data()) x = static_cast<float>(real(lo, hi));
        return v;
    }

    /// Union of random axis-aligned boxes; gives masks with a handful of
    /// components of varied size.
    MaskGrid blobs(const Shape& s, std::size_t count, std::size_t max_side,
                   Spacing spacing = {}) {
        MaskGrid m(s, spacing);
        for (std::size_t b = 0; b < count; ++b) {
            const std::size_t x0 = size(0, s.width - 1);
            const std::size_t y0 = size(0, s.height - 1);
            const std::size_t z0 = size(0, s.depth - 1);
            const std::size_t x1 = std::min(s.width, x0 + size(1, max_side));
            const std::size_t y1 = std::min(s.height, y0 + size(1, max_side));
            const std::size_t z1 = std::min(s.depth, z0 + size(1, max_side));
            for (std::size_t z = z0; z < z1; ++z)
                for (std::size_t y = y0; y < y1; ++y)
                    for (std::size_t x = x0; x < x1; ++x) m.at(x, y, z) = 1;
        }
        return m;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

// ---- oracles ----

inline ConfusionCounts brute_confusion(const MaskGrid& pred, const MaskGrid& gt) {
    ConfusionCounts c;
    for (std::size_t z = 0; z < gt.depth(); ++z)
        for (std::size_t y = 0; y < gt.height(); ++y)
            for (std::size_t x = 0; x < gt.width(); ++x) {
                const bool p = pred.at(x, y, z) != 0;
                const bool g = gt.at(x, y, z) != 0;
                if (p && g) ++c.tp;
                else if (p) ++c.fp;
                else if (g) ++c.fn;
                else ++c.tn;
            }
    return c;
}

inline bool neighbours(int dx, int dy, int dz, int connectivity) {
    const int n = std::abs(dx) + std::abs(dy) + std::abs(dz);
    if (n == 0) return false;
    if (connectivity == 6) return n == 1;
    if (connectivity == 18) return n <= 2;
    return true;
}

/// Breadth-first flood fill started from voxels in raster order, so labels
/// are numbered by each component's first voxel like label_components.
inline ComponentLabels flood_fill(const MaskGrid& mask, int connectivity = 26) {
    const auto W = static_cast<long>(mask.width());
    const auto H = static_cast<long>(mask.height());
    const auto D = static_cast<long>(mask.depth());
    ComponentLabels out;
    out.labels.assign(mask.size(), 0);
    for (long z = 0; z < D; ++z)
        for (long y = 0; y < H; ++y)
            for (long x = 0; x < W; ++x) {
                const std::size_t start = mask.index(x, y, z);
                if (!mask.data()[start] || out.labels[start]) continue;
                const std::uint32_t label = ++out.count;
                std::deque<std::array<long, 3>> queue{{x, y, z}};
                out.labels[start] = label;
                while (!queue.empty()) {
                    const auto [cx, cy, cz] = queue.front();
                    queue.pop_front();
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (!neighbours(dx, dy, dz, connectivity)) continue;
                                const long nx = cx + dx, ny = cy + dy, nz = cz + dz;
                                if (nx < 0 || ny < 0 || nz < 0 || nx >= W || ny >= H || nz >= D)
                                    continue;
                                const std::size_t i = mask.index(nx, ny, nz);
                                if (mask.data()[i] && !out.labels[i]) {
                                    out.labels[i] = label;
                                    queue.push_back({nx, ny, nz});
                                }
                            }
                }
            }
    return out;
}

/// Triple-loop overlay accumulation.
inline void brute_overlay(const MaskGrid& region, const MaskGrid& lesion,
                          std::vector<std::uint64_t>& region_acc,
                          std::vector<std::uint64_t>& lesion_acc) {
    for (std::size_t z = 0; z < region.depth(); ++z)
        for (std::size_t y = 0; y < region.height(); ++y)
            for (std::size_t x = 0; x < region.width(); ++x) {
                region_acc[x + region.width() * y] += region.at(x, y, z);
                lesion_acc[x + region.width() * y] += lesion.at(x, y, z);
            }
}

/// Column-by-column extent maximum of a count map.
inline std::size_t brute_h_max_mid(const std::vector<std::uint64_t>& cells, std::size_t width,
                                   std::size_t height) {
    std::size_t best = 0;
    for (std::size_t x = 0; x < width; ++x) {
        std::optional<std::size_t> first, last;
        for (std::size_t y = 0; y < height; ++y) {
            if (cells[x + width * y]) {
                if (!first) first = y;
                last = y;
            }
        }
        if (first) best = std::max(best, *last - *first + 1);
    }
    return best;
}

template <typename T>
std::size_t count_nonzero(const Grid<T>& g) {
    return static_cast<std::size_t>(
        std::count_if(g.data().begin(), g.data().end(), [](T v) { return v != T{}; }));
}

}  // namespace rftest
