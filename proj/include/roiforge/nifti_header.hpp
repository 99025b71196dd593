#pragma once

#include <cstdint>

namespace roiforge::nifti {

// On-disk NIfTI-1 header. The field layout packs to exactly 348 bytes
// without any pragma.
struct Header {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1;
    float intent_p2;
    float intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max;
    float cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax;
    std::int32_t glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code;
    std::int16_t sform_code;
    float quatern_b;
    float quatern_c;
    float quatern_d;
    float qoffset_x;
    float qoffset_y;
    float qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};

static_assert(sizeof(Header) == 348, "NIfTI-1 header must be 348 bytes");

inline constexpr std::int32_t kHeaderSize = 348;
inline constexpr float kSingleFileOffset = 352.0f;

enum Datatype : std::int16_t {
    kUInt8 = 2,
    kInt16 = 4,
    kInt32 = 8,
    kFloat32 = 16,
    kFloat64 = 64,
    kInt8 = 256,
    kUInt16 = 512,
    kUInt32 = 768,
};

/// Zero-initialised single-file header for a 3D volume.
Header make_header(std::int16_t datatype, std::int16_t nx, std::int16_t ny, std::int16_t nz);

}  // namespace roiforge::nifti
