#include "roiforge/volume_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>

#include "roiforge/nifti_header.hpp"

namespace fs = std::filesystem;

namespace roiforge {

namespace nifti {

Header make_header(std::int16_t datatype, std::int16_t nx, std::int16_t ny, std::int16_t nz) {
    Header h{};
    h.sizeof_hdr = kHeaderSize;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = nx;
    h.dim[2] = ny;
    h.dim[3] = nz;
    for (int i = 4; i < 8; ++i) {
        h.dim[i] = 1;
    }
    h.datatype = datatype;
    for (int i = 0; i < 8; ++i) {
        h.pixdim[i] = 1.0f;
    }
    h.vox_offset = kSingleFileOffset;
    h.xyzt_units = 2;  // millimetres
    std::memcpy(h.magic, "n+1\0", 4);
    switch (datatype) {
        case kUInt8:
        case kInt8: h.bitpix = 8; break;
        case kInt16:
        case kUInt16: h.bitpix = 16; break;
        case kInt32:
        case kUInt32:
        case kFloat32: h.bitpix = 32; break;
        case kFloat64: h.bitpix = 64; break;
        default: h.bitpix = 0; break;
    }
    return h;
}

}  // namespace nifti

namespace {

using nifti::Header;

struct GzCloser {
    void operator()(gzFile_s* f) const noexcept { gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

bool has_gz_suffix(const fs::path& path) {
    return path.extension() == ".gz";
}

template <typename T>
void swap_bytes(T& value) {
    auto* p = reinterpret_cast<unsigned char*>(&value);
    std::reverse(p, p + sizeof(T));
}

void swap_header(Header& h) {
    swap_bytes(h.sizeof_hdr);
    swap_bytes(h.extents);
    swap_bytes(h.session_error);
    for (auto& d : h.dim) swap_bytes(d);
    swap_bytes(h.intent_p1);
    swap_bytes(h.intent_p2);
    swap_bytes(h.intent_p3);
    swap_bytes(h.intent_code);
    swap_bytes(h.datatype);
    swap_bytes(h.bitpix);
    swap_bytes(h.slice_start);
    for (auto& p : h.pixdim) swap_bytes(p);
    swap_bytes(h.vox_offset);
    swap_bytes(h.scl_slope);
    swap_bytes(h.scl_inter);
    swap_bytes(h.slice_end);
    swap_bytes(h.cal_max);
    swap_bytes(h.cal_min);
    swap_bytes(h.slice_duration);
    swap_bytes(h.toffset);
    swap_bytes(h.glmax);
    swap_bytes(h.glmin);
    swap_bytes(h.qform_code);
    swap_bytes(h.sform_code);
    swap_bytes(h.quatern_b);
    swap_bytes(h.quatern_c);
    swap_bytes(h.quatern_d);
    swap_bytes(h.qoffset_x);
    swap_bytes(h.qoffset_y);
    swap_bytes(h.qoffset_z);
    for (auto& v : h.srow_x) swap_bytes(v);
    for (auto& v : h.srow_y) swap_bytes(v);
    for (auto& v : h.srow_z) swap_bytes(v);
}

void read_exact(gzFile_s* f, void* dst, std::size_t bytes, const fs::path& path) {
    auto* out = static_cast<unsigned char*>(dst);
    constexpr std::size_t kChunk = 1u << 30;
    while (bytes > 0) {
        auto want = static_cast<unsigned>(std::min(bytes, kChunk));
        int got = gzread(f, out, want);
        if (got <= 0) {
            throw DataError(path.string() + ": truncated NIfTI file");
        }
        out += got;
        bytes -= static_cast<std::size_t>(got);
    }
}

std::size_t datatype_bytes(std::int16_t datatype) {
    switch (datatype) {
        case nifti::kUInt8:
        case nifti::kInt8: return 1;
        case nifti::kInt16:
        case nifti::kUInt16: return 2;
        case nifti::kInt32:
        case nifti::kUInt32:
        case nifti::kFloat32: return 4;
        case nifti::kFloat64: return 8;
        default: return 0;
    }
}

template <typename Src>
void convert_buffer(const std::vector<unsigned char>& raw, bool swapped, std::span<float> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        Src v;
        std::memcpy(&v, raw.data() + i * sizeof(Src), sizeof(Src));
        if (swapped) {
            swap_bytes(v);
        }
        out[i] = static_cast<float>(v);
    }
}

double spatial_unit_scale(char xyzt_units) {
    switch (xyzt_units & 0x07) {
        case 1: return 1000.0;  // metres
        case 3: return 0.001;   // micrometres
        default: return 1.0;    // millimetres or unknown
    }
}

Affine affine_from_qform(const Header& h) {
    double b = h.quatern_b;
    double c = h.quatern_c;
    double d = h.quatern_d;
    double a = 1.0 - (b * b + c * c + d * d);
    if (a < 1e-7) {
        a = 1.0 / std::sqrt(b * b + c * c + d * d);
        b *= a;
        c *= a;
        d *= a;
        a = 0.0;
    } else {
        a = std::sqrt(a);
    }
    const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
    const double dx = std::abs(h.pixdim[1]);
    const double dy = std::abs(h.pixdim[2]);
    const double dz = std::abs(h.pixdim[3]) * qfac;

    Affine aff;
    aff.m[0] = {(a * a + b * b - c * c - d * d) * dx, 2.0 * (b * c - a * d) * dy,
                2.0 * (b * d + a * c) * dz, h.qoffset_x};
    aff.m[1] = {2.0 * (b * c + a * d) * dx, (a * a + c * c - b * b - d * d) * dy,
                2.0 * (c * d - a * b) * dz, h.qoffset_y};
    aff.m[2] = {2.0 * (b * d - a * c) * dx, 2.0 * (c * d + a * b) * dy,
                (a * a + d * d - c * c - b * b) * dz, h.qoffset_z};
    return aff;
}

// Fills the qform fields from an orthogonal affine.
void set_qform(Header& h, const Affine& aff) {
    std::array<std::array<double, 3>, 3> r{};
    for (std::size_t col = 0; col < 3; ++col) {
        double norm = 0.0;
        for (std::size_t row = 0; row < 3; ++row) {
            norm += aff.m[row][col] * aff.m[row][col];
        }
        norm = std::sqrt(norm);
        for (std::size_t row = 0; row < 3; ++row) {
            r[row][col] = norm > 0.0 ? aff.m[row][col] / norm : (row == col ? 1.0 : 0.0);
        }
    }
    const double det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                       r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                       r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    double qfac = 1.0;
    if (det < 0.0) {
        qfac = -1.0;
        for (auto& row : r) {
            row[2] = -row[2];
        }
    }

    double a = r[0][0] + r[1][1] + r[2][2] + 1.0;
    double b, c, d;
    if (a > 0.5) {
        a = 0.5 * std::sqrt(a);
        b = 0.25 * (r[2][1] - r[1][2]) / a;
        c = 0.25 * (r[0][2] - r[2][0]) / a;
        d = 0.25 * (r[1][0] - r[0][1]) / a;
    } else {
        const double xd = 1.0 + r[0][0] - (r[1][1] + r[2][2]);
        const double yd = 1.0 + r[1][1] - (r[0][0] + r[2][2]);
        const double zd = 1.0 + r[2][2] - (r[0][0] + r[1][1]);
        if (xd > 1.0) {
            b = 0.5 * std::sqrt(xd);
            c = 0.25 * (r[0][1] + r[1][0]) / b;
            d = 0.25 * (r[0][2] + r[2][0]) / b;
            a = 0.25 * (r[2][1] - r[1][2]) / b;
        } else if (yd > 1.0) {
            c = 0.5 * std::sqrt(yd);
            b = 0.25 * (r[0][1] + r[1][0]) / c;
            d = 0.25 * (r[1][2] + r[2][1]) / c;
            a = 0.25 * (r[0][2] - r[2][0]) / c;
        } else {
            d = 0.5 * std::sqrt(zd);
            b = 0.25 * (r[0][2] + r[2][0]) / d;
            c = 0.25 * (r[1][2] + r[2][1]) / d;
            a = 0.25 * (r[1][0] - r[0][1]) / d;
        }
        if (a < 0.0) {
            b = -b;
            c = -c;
            d = -d;
        }
    }
    h.qform_code = 1;
    h.quatern_b = static_cast<float>(b);
    h.quatern_c = static_cast<float>(c);
    h.quatern_d = static_cast<float>(d);
    h.qoffset_x = static_cast<float>(aff.m[0][3]);
    h.qoffset_y = static_cast<float>(aff.m[1][3]);
    h.qoffset_z = static_cast<float>(aff.m[2][3]);
    h.pixdim[0] = static_cast<float>(qfac);
}

struct RawImage {
    Header header;
    bool swapped = false;
    Shape shape;
    Spacing spacing;
    std::optional<Affine> affine;
    std::vector<float> values;
};

RawImage read_nifti(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw DataError(path.string() + ": file not found");
    }
    GzHandle file(gzopen(path.string().c_str(), "rb"));
    if (!file) {
        throw DataError(path.string() + ": cannot open for reading");
    }

    RawImage img;
    Header& h = img.header;
    read_exact(file.get(), &h, sizeof(Header), path);
    if (h.sizeof_hdr != nifti::kHeaderSize) {
        swap_header(h);
        if (h.sizeof_hdr != nifti::kHeaderSize) {
            throw DataError(path.string() + ": not a NIfTI-1 file");
        }
        img.swapped = true;
    }
    if (std::memcmp(h.magic, "n+1", 4) != 0) {
        if (std::memcmp(h.magic, "ni1", 4) == 0) {
            throw DataError(path.string() + ": two-file (.hdr/.img) NIfTI is not supported");
        }
        throw DataError(path.string() + ": bad NIfTI magic");
    }

    const int ndim = h.dim[0];
    if (ndim < 3 || ndim > 7) {
        throw DataError(path.string() + ": expected 3D volume, header declares " +
                        std::to_string(ndim) + " dimension(s)");
    }
    for (int i = 4; i <= ndim; ++i) {
        if (h.dim[i] > 1) {
            throw DataError(path.string() + ": expected 3D volume, dimension " +
                            std::to_string(i) + " has extent " + std::to_string(h.dim[i]));
        }
    }
    for (int i = 1; i <= 3; ++i) {
        if (h.dim[i] < 1) {
            throw DataError(path.string() + ": non-positive image dimension");
        }
    }

    const std::size_t elem = datatype_bytes(h.datatype);
    if (elem == 0) {
        throw DataError(path.string() + ": unsupported NIfTI datatype " +
                        std::to_string(h.datatype));
    }

    img.shape = Shape{static_cast<std::size_t>(h.dim[1]), static_cast<std::size_t>(h.dim[2]),
                      static_cast<std::size_t>(h.dim[3])};
    const double unit = spatial_unit_scale(h.xyzt_units);
    img.spacing = Spacing{std::abs(h.pixdim[1]) * unit, std::abs(h.pixdim[2]) * unit,
                          std::abs(h.pixdim[3]) * unit};
    if (!(img.spacing.x > 0.0 && img.spacing.y > 0.0 && img.spacing.z > 0.0)) {
        throw DataError(path.string() + ": voxel spacing must be positive");
    }

    if (h.sform_code > 0) {
        Affine aff;
        for (std::size_t c = 0; c < 4; ++c) {
            aff.m[0][c] = h.srow_x[c] * unit;
            aff.m[1][c] = h.srow_y[c] * unit;
            aff.m[2][c] = h.srow_z[c] * unit;
        }
        img.affine = aff;
    } else if (h.qform_code > 0) {
        Affine aff = affine_from_qform(h);
        for (auto& row : aff.m) {
            for (auto& v : row) v *= unit;
        }
        img.affine = aff;
    }

    const auto offset = static_cast<long>(h.vox_offset);
    if (offset < nifti::kHeaderSize) {
        throw DataError(path.string() + ": invalid vox_offset");
    }
    if (gzseek(file.get(), offset, SEEK_SET) != offset) {
        throw DataError(path.string() + ": truncated NIfTI file");
    }

    const std::size_t count = img.shape.voxels();
    std::vector<unsigned char> raw(count * elem);
    read_exact(file.get(), raw.data(), raw.size(), path);

    img.values.resize(count);
    std::span<float> out(img.values);
    switch (h.datatype) {
        case nifti::kUInt8: convert_buffer<std::uint8_t>(raw, img.swapped, out); break;
        case nifti::kInt8: convert_buffer<std::int8_t>(raw, img.swapped, out); break;
        case nifti::kInt16: convert_buffer<std::int16_t>(raw, img.swapped, out); break;
        case nifti::kUInt16: convert_buffer<std::uint16_t>(raw, img.swapped, out); break;
        case nifti::kInt32: convert_buffer<std::int32_t>(raw, img.swapped, out); break;
        case nifti::kUInt32: convert_buffer<std::uint32_t>(raw, img.swapped, out); break;
        case nifti::kFloat32: convert_buffer<float>(raw, img.swapped, out); break;
        case nifti::kFloat64: convert_buffer<double>(raw, img.swapped, out); break;
        default: break;
    }

    const float slope = h.scl_slope;
    const float inter = h.scl_inter;
    if (slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f)) {
        for (auto& v : img.values) {
            v = v * slope + inter;
        }
    }
    return img;
}

template <typename T>
void write_nifti(const Grid<T>& grid, std::int16_t datatype, const fs::path& path) {
    constexpr auto kMaxDim = static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max());
    if (grid.width() > kMaxDim || grid.height() > kMaxDim || grid.depth() > kMaxDim) {
        throw DataError(path.string() + ": dimension exceeds NIfTI-1 limit");
    }
    Header h = nifti::make_header(datatype, static_cast<std::int16_t>(grid.width()),
                                  static_cast<std::int16_t>(grid.height()),
                                  static_cast<std::int16_t>(grid.depth()));
    h.pixdim[1] = static_cast<float>(grid.spacing().x);
    h.pixdim[2] = static_cast<float>(grid.spacing().y);
    h.pixdim[3] = static_cast<float>(grid.spacing().z);
    if (const auto& aff = grid.affine()) {
        set_qform(h, *aff);
        h.sform_code = 1;
        for (std::size_t c = 0; c < 4; ++c) {
            h.srow_x[c] = static_cast<float>(aff->m[0][c]);
            h.srow_y[c] = static_cast<float>(aff->m[1][c]);
            h.srow_z[c] = static_cast<float>(aff->m[2][c]);
        }
    }

    const auto parent = path.parent_path();
    std::error_code ec;
    if (!parent.empty() && !fs::is_directory(parent, ec)) {
        throw DataError(path.string() + ": parent directory does not exist");
    }

    const char extension[4] = {0, 0, 0, 0};
    const auto bytes = std::as_bytes(grid.data());
    if (has_gz_suffix(path)) {
        GzHandle file(gzopen(path.string().c_str(), "wb6"));
        if (!file) {
            throw DataError(path.string() + ": cannot open for writing");
        }
        bool ok = gzwrite(file.get(), &h, sizeof(Header)) == static_cast<int>(sizeof(Header)) &&
                  gzwrite(file.get(), extension, 4) == 4;
        constexpr std::size_t kChunk = 1u << 30;
        for (std::size_t pos = 0; ok && pos < bytes.size(); pos += kChunk) {
            const auto n = static_cast<unsigned>(std::min(kChunk, bytes.size() - pos));
            ok = gzwrite(file.get(), bytes.data() + pos, n) == static_cast<int>(n);
        }
        if (gzclose(file.release()) != Z_OK || !ok) {
            throw DataError(path.string() + ": write failed");
        }
    } else {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError(path.string() + ": cannot open for writing");
        }
        out.write(reinterpret_cast<const char*>(&h), sizeof(Header));
        out.write(extension, 4);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        out.close();
        if (!out) {
            throw DataError(path.string() + ": write failed");
        }
    }
}

}  // namespace

VolumeGrid load_volume(const fs::path& path) {
    RawImage img = read_nifti(path);
    VolumeGrid vol(img.shape, img.spacing, std::move(img.values));
    vol.set_affine(img.affine);
    return vol;
}

MaskGrid load_mask(const fs::path& path) {
    RawImage img = read_nifti(path);
    std::vector<std::uint8_t> bits(img.values.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        const float v = img.values[i];
        if (v == 0.0f) {
            bits[i] = 0;
        } else if (v == 1.0f) {
            bits[i] = 1;
        } else {
            throw DataError(path.string() + ": mask contains non-binary value " +
                            std::to_string(v));
        }
    }
    MaskGrid mask(img.shape, img.spacing, std::move(bits));
    mask.set_affine(img.affine);
    return mask;
}

void save_volume(const VolumeGrid& vol, const fs::path& path) {
    write_nifti(vol, nifti::kFloat32, path);
}

void save_mask(const MaskGrid& mask, const fs::path& path) {
    write_nifti(mask, nifti::kUInt8, path);
}

template <typename T>
Grid<T> canonicalize_ras(const Grid<T>& grid) {
    if (!grid.affine()) {
        throw DataError("cannot reorient: volume has no orientation metadata");
    }
    const Affine& aff = *grid.affine();
    if (!axis_codes(aff)) {
        throw DataError("cannot reorient: oblique orientation (resampling not supported)");
    }

    // For voxel axis i: world axis it maps to and whether it runs backwards.
    std::array<std::size_t, 3> world_of{};
    std::array<bool, 3> flipped{};
    for (std::size_t col = 0; col < 3; ++col) {
        std::size_t dominant = 0;
        for (std::size_t row = 1; row < 3; ++row) {
            if (std::abs(aff.m[row][col]) > std::abs(aff.m[dominant][col])) {
                dominant = row;
            }
        }
        world_of[col] = dominant;
        flipped[col] = aff.m[dominant][col] < 0.0;
    }

    const std::array<std::size_t, 3> old_dims{grid.width(), grid.height(), grid.depth()};
    const std::array<double, 3> old_spacing{grid.spacing().x, grid.spacing().y, grid.spacing().z};
    std::array<std::size_t, 3> new_dims{};
    std::array<double, 3> new_spacing{};
    for (std::size_t i = 0; i < 3; ++i) {
        new_dims[world_of[i]] = old_dims[i];
        new_spacing[world_of[i]] = old_spacing[i];
    }

    Grid<T> out(Shape{new_dims[0], new_dims[1], new_dims[2]},
                Spacing{new_spacing[0], new_spacing[1], new_spacing[2]});

    std::array<std::size_t, 3> src{};
    for (src[2] = 0; src[2] < old_dims[2]; ++src[2]) {
        for (src[1] = 0; src[1] < old_dims[1]; ++src[1]) {
            for (src[0] = 0; src[0] < old_dims[0]; ++src[0]) {
                std::array<std::size_t, 3> dst{};
                for (std::size_t i = 0; i < 3; ++i) {
                    dst[world_of[i]] = flipped[i] ? old_dims[i] - 1 - src[i] : src[i];
                }
                out.at(dst[0], dst[1], dst[2]) = grid.at(src[0], src[1], src[2]);
            }
        }
    }

    // Column for new axis j is the (sign-corrected) old column; the new
    // origin is the world position of the old voxel that lands at index 0.
    std::array<double, 3> corner{};
    for (std::size_t i = 0; i < 3; ++i) {
        corner[i] = flipped[i] ? static_cast<double>(old_dims[i] - 1) : 0.0;
    }
    const auto origin = aff.apply(corner[0], corner[1], corner[2]);
    Affine ras;
    for (std::size_t i = 0; i < 3; ++i) {
        const double sign = flipped[i] ? -1.0 : 1.0;
        for (std::size_t row = 0; row < 3; ++row) {
            ras.m[row][world_of[i]] = sign * aff.m[row][i];
        }
    }
    for (std::size_t row = 0; row < 3; ++row) {
        ras.m[row][3] = origin[row];
    }
    out.set_affine(ras);
    return out;
}

template VolumeGrid canonicalize_ras(const VolumeGrid&);
template MaskGrid canonicalize_ras(const MaskGrid&);

}  // namespace roiforge
