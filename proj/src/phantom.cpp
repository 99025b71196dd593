#include "roiforge/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "roiforge/parallel.hpp"
#include "roiforge/seeding.hpp"
#include "roiforge/volume_io.hpp"

namespace fs = std::filesystem;

namespace roiforge {

namespace {

constexpr double kTissue = 400.0;
constexpr double kBody = 250.0;
constexpr double kHeart = 500.0;
constexpr double kTissueNoise = 20.0;
constexpr double kAirNoiseLevel = 30.0;
constexpr double kAirNoiseFraction = 0.1;
constexpr double kGlobalEnhancement = 0.05;
constexpr double kPostNoise = 10.0;
constexpr double kHeartEnhancementFactor = 1.5;
constexpr int kLesionPlacementTries = 500;

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double uniform(Rng& rng, const Range<double>& r) {
    return r.lo == r.hi ? r.lo : uniform(rng, r.lo, r.hi);
}

bool lesion_fits(const PatientGeometry& g, const Ellipsoid& lesion) {
    const auto lo = [&](std::size_t axis, std::size_t extent) {
        const double v = std::ceil(lesion.center[axis] - lesion.radii[axis]);
        return static_cast<long>(std::clamp(v, 0.0, static_cast<double>(extent)));
    };
    const auto hi = [&](std::size_t axis, std::size_t extent) {
        const double v = std::floor(lesion.center[axis] + lesion.radii[axis]);
        return static_cast<long>(std::clamp(v, -1.0, static_cast<double>(extent) - 1.0));
    };
    std::size_t voxels = 0;
    for (long z = lo(2, g.shape.depth); z <= hi(2, g.shape.depth); ++z) {
        for (long y = lo(1, g.shape.height); y <= hi(1, g.shape.height); ++y) {
            for (long x = lo(0, g.shape.width); x <= hi(0, g.shape.width); ++x) {
                if (!lesion.contains(static_cast<double>(x), static_cast<double>(y),
                                     static_cast<double>(z))) {
                    continue;
                }
                if (!g.in_breast(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                 static_cast<std::size_t>(z))) {
                    return false;
                }
                ++voxels;
            }
        }
    }
    // Ellipsoid must not poke outside the grid either.
    for (std::size_t axis = 0; axis < 3; ++axis) {
        const std::size_t extent =
            axis == 0 ? g.shape.width : axis == 1 ? g.shape.height : g.shape.depth;
        if (lesion.center[axis] - lesion.radii[axis] < -0.5 ||
            lesion.center[axis] + lesion.radii[axis] > static_cast<double>(extent) - 0.5) {
            return false;
        }
    }
    return voxels > 0;
}

}  // namespace

void PhantomSpec::validate() const {
    if (shape.width < 8 || shape.height < 8 || shape.depth < 8) {
        throw UsageError("phantom dimensions must all be >= 8, got " + to_string(shape));
    }
    if (depth_min != 0 && (depth_min < 8 || depth_min > shape.depth)) {
        throw UsageError("phantom depth_min must lie in [8, depth]");
    }
    if (patients == 0) {
        throw UsageError("phantom cohort needs at least one patient");
    }
    if (!(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0)) {
        throw UsageError("phantom spacing must be positive");
    }
    if (lesions.lo > lesions.hi) {
        throw UsageError("phantom lesion count range is empty");
    }
    if (!(lesion_radius_mm.lo > 0.0) || lesion_radius_mm.lo > lesion_radius_mm.hi) {
        throw UsageError("phantom lesion radius range must be positive and ordered");
    }
    if (!(contrast > 0.0)) {
        throw UsageError("phantom lesion contrast must be positive");
    }
    if (!(chest_row_fraction > 0.0 && chest_row_fraction < 1.0)) {
        throw UsageError("chest_row_fraction must lie in (0, 1)");
    }
}

bool Ellipsoid::contains(double x, double y, double z) const noexcept {
    const double dx = (x - center[0]) / radii[0];
    const double dy = (y - center[1]) / radii[1];
    const double dz = (z - center[2]) / radii[2];
    return dx * dx + dy * dy + dz * dz <= 1.0;
}

bool PatientGeometry::in_breast(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    if (y > chest_row) {
        return false;
    }
    const double depth_from_chest = static_cast<double>(chest_row - y);
    for (const auto& b : breasts) {
        const double dx = (static_cast<double>(x) - b.center_x) / b.half_width;
        const double dy = depth_from_chest / b.depth;
        const double dz = (static_cast<double>(z) - b.center_z) / b.half_slab;
        if (dx * dx + dy * dy + dz * dz <= 1.0) {
            return true;
        }
    }
    return false;
}

std::string phantom_patient_id(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "P%03zu", index + 1);
    return buf;
}

PatientGeometry draw_geometry(const PhantomSpec& spec, std::size_t index) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index)));

    PatientGeometry g;
    g.id = phantom_patient_id(index);
    g.spacing = spec.spacing;
    g.shape = spec.shape;
    if (spec.depth_min != 0 && spec.depth_min < spec.shape.depth) {
        g.shape.depth = std::uniform_int_distribution<std::size_t>(spec.depth_min,
                                                                   spec.shape.depth)(rng);
    }
    const auto W = static_cast<double>(g.shape.width);
    const auto H = static_cast<double>(g.shape.height);
    const auto D = static_cast<double>(g.shape.depth);

    const double chest = spec.chest_row_fraction * (H - 1.0) +
                         uniform(rng, -spec.jitter_px, spec.jitter_px);
    g.chest_row = static_cast<std::size_t>(std::clamp(std::round(chest), 1.0, H - 2.0));

    for (double side : {0.25, 0.75}) {
        BreastShape b;
        b.center_x = side * (W - 1.0) + uniform(rng, -spec.jitter_px, spec.jitter_px);
        b.half_width = std::max(2.0, uniform(rng, spec.breast_half_width_fraction) * W);
        b.depth = std::clamp(uniform(rng, spec.breast_depth_fraction) * H, 2.0,
                             static_cast<double>(g.chest_row));
        b.half_slab = std::max(2.0, uniform(rng, spec.breast_half_slab_fraction) * D);
        b.center_z = (D - 1.0) / 2.0 + uniform(rng, -1.0, 1.0);
        g.breasts.push_back(b);
    }

    const std::size_t n_lesions =
        std::uniform_int_distribution<std::size_t>(spec.lesions.lo, spec.lesions.hi)(rng);
    for (std::size_t k = 0; k < n_lesions; ++k) {
        const double r_mm = uniform(rng, spec.lesion_radius_mm);
        Ellipsoid lesion;
        lesion.radii = {r_mm / spec.spacing.x, r_mm / spec.spacing.y, r_mm / spec.spacing.z};
        bool placed = false;
        for (int attempt = 0; attempt < kLesionPlacementTries && !placed; ++attempt) {
            const BreastShape& b =
                g.breasts[std::uniform_int_distribution<std::size_t>(0, g.breasts.size() - 1)(rng)];
            const double chest_y = static_cast<double>(g.chest_row);
            lesion.center = {uniform(rng, b.center_x - b.half_width, b.center_x + b.half_width),
                             uniform(rng, chest_y - b.depth, chest_y),
                             uniform(rng, b.center_z - b.half_slab, b.center_z + b.half_slab)};
            placed = lesion_fits(g, lesion);
        }
        if (!placed) {
            throw DataError("infeasible phantom geometry: lesion radius " + std::to_string(r_mm) +
                            " mm does not fit inside the breast of " + g.id);
        }
        g.lesions.push_back(lesion);
    }

    if (spec.heart) {
        const double space = H - 1.0 - static_cast<double>(g.chest_row);
        const double ry = std::min(0.12 * H, (space - 1.0) / 2.0);
        if (ry >= 1.0) {
            Ellipsoid heart;
            heart.center = {(W - 1.0) / 2.0, static_cast<double>(g.chest_row) + 1.5 + ry,
                            (D - 1.0) / 2.0};
            heart.radii = {std::max(1.0, 0.15 * W), ry, std::max(1.0, 0.35 * D)};
            g.heart = heart;
        }
    }

    g.anterior_noise = spec.anterior_noise;
    g.contrast = spec.contrast;
    g.noise_seed = derive_seed(spec.seed ^ 0xa5a5a5a5ULL, static_cast<std::uint64_t>(index));
    return g;
}

PatientCase render_patient(const PatientGeometry& g) {
    PatientCase pc;
    pc.id = g.id;
    pc.pre_contrast = VolumeGrid(g.shape, g.spacing);
    pc.first_post_contrast = VolumeGrid(g.shape, g.spacing);
    pc.region_mask = MaskGrid(g.shape, g.spacing);
    pc.lesion_mask = MaskGrid(g.shape, g.spacing);
    const Affine ras = Affine::diagonal(g.spacing);
    pc.pre_contrast.set_affine(ras);
    pc.first_post_contrast.set_affine(ras);
    pc.region_mask.set_affine(ras);
    pc.lesion_mask.set_affine(ras);

    Rng rng(g.noise_seed);
    for (std::size_t z = 0; z < g.shape.depth; ++z) {
        for (std::size_t y = 0; y < g.shape.height; ++y) {
            for (std::size_t x = 0; x < g.shape.width; ++x) {
                const double fx = static_cast<double>(x);
                const double fy = static_cast<double>(y);
                const double fz = static_cast<double>(z);
                double pre = 0.0;
                double enhancement = 0.0;
                if (g.in_breast(x, y, z)) {
                    pc.region_mask.at(x, y, z) = 1;
                    pre = kTissue + uniform(rng, -kTissueNoise, kTissueNoise);
                    enhancement = kGlobalEnhancement * pre + uniform(rng, 0.0, kPostNoise);
                    const bool lesion = std::any_of(
                        g.lesions.begin(), g.lesions.end(),
                        [&](const Ellipsoid& e) { return e.contains(fx, fy, fz); });
                    if (lesion) {
                        pc.lesion_mask.at(x, y, z) = 1;
                        enhancement += g.contrast;
                    }
                } else if (y > g.chest_row) {
                    const bool heart = g.heart && g.heart->contains(fx, fy, fz);
                    pre = (heart ? kHeart : kBody) + uniform(rng, -kTissueNoise, kTissueNoise);
                    enhancement = kGlobalEnhancement * pre + uniform(rng, 0.0, kPostNoise);
                    if (heart) {
                        enhancement += kHeartEnhancementFactor * g.contrast;
                    }
                } else if (g.anterior_noise && uniform(rng, 0.0, 1.0) < kAirNoiseFraction) {
                    pre = uniform(rng, 0.0, kAirNoiseLevel);
                }
                pc.pre_contrast.at(x, y, z) = static_cast<float>(pre);
                pc.first_post_contrast.at(x, y, z) = static_cast<float>(pre + enhancement);
            }
        }
    }
    return pc;
}

std::vector<CaseSource> phantom_sources(const PhantomSpec& spec) {
    spec.validate();
    std::vector<CaseSource> sources;
    for (std::size_t i = 0; i < spec.patients; ++i) {
        sources.push_back({phantom_patient_id(i),
                           [spec, i] { return render_patient(draw_geometry(spec, i)); }});
    }
    return sources;
}

CohortManifest generate_cohort(const PhantomSpec& spec, const fs::path& out_dir,
                               std::size_t jobs) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir, ec)) {
        throw DataError(out_dir.string() + ": cannot create output directory");
    }

    CohortManifest manifest;
    manifest.cohort_id = "phantom-seed" + std::to_string(spec.seed);
    manifest.approach = Approach::Source;
    manifest.seed = spec.seed;
    manifest.base_dir = out_dir;
    manifest.patients.resize(spec.patients);

    parallel_for(spec.patients, jobs, [&](std::size_t i) {
        const PatientCase pc = render_patient(draw_geometry(spec, i));
        ManifestEntry& e = manifest.patients[i];
        e.id = pc.id;
        e.shape = pc.pre_contrast.shape();
        e.spacing = pc.pre_contrast.spacing();
        e.files.pre_contrast = pc.id + "_pc.nii.gz";
        e.files.first_post_contrast = pc.id + "_fpc.nii.gz";
        e.files.region_mask = pc.id + "_brs.nii.gz";
        e.files.lesion_mask = pc.id + "_lesion.nii.gz";
        save_volume(pc.pre_contrast, out_dir / e.files.pre_contrast);
        save_volume(pc.first_post_contrast, out_dir / e.files.first_post_contrast);
        save_mask(pc.region_mask, out_dir / e.files.region_mask);
        save_mask(pc.lesion_mask, out_dir / e.files.lesion_mask);
    });

    write_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

}  // namespace roiforge
