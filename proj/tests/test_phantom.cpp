#include <doctest.h>

#include "roiforge/cohort_prep.hpp"
#include "roiforge/error.hpp"
#include "roiforge/phantom.hpp"
#include "roiforge/volume_io.hpp"
#include "support.hpp"

using namespace roiforge;

namespace {

bool same(const VolumeGrid& a, const VolumeGrid& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

bool same(const MaskGrid& a, const MaskGrid& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST_SUITE("phantom") {
    TEST_CASE("same seed and index give the same patient") {
        PhantomSpec spec;
        const PatientCase a = render_patient(draw_geometry(spec, 3));
        const PatientCase b = render_patient(draw_geometry(spec, 3));
        CHECK(a.id == b.id);
        CHECK(same(a.pre_contrast, b.pre_contrast));
        CHECK(same(a.first_post_contrast, b.first_post_contrast));
        CHECK(same(a.lesion_mask, b.lesion_mask));
        spec.seed = 8;
        const PatientCase c = render_patient(draw_geometry(spec, 3));
        CHECK_FALSE(same(a.pre_contrast, c.pre_contrast));
    }

    TEST_CASE("lesions lie inside the region and enhance by at least the contrast") {
        PhantomSpec spec;
        spec.patients = 6;
        for (std::size_t i = 0; i < spec.patients; ++i) {
            const PatientCase pc = render_patient(draw_geometry(spec, i));
            CAPTURE(i);
            CHECK(rftest::count_nonzero(pc.lesion_mask) > 0);
            const auto lesion = pc.lesion_mask.data();
            const auto region = pc.region_mask.data();
            const auto pre = pc.pre_contrast.data();
            const auto post = pc.first_post_contrast.data();
            bool inside = true, enhanced = true;
            for (std::size_t k = 0; k < lesion.size(); ++k) {
                if (!lesion[k]) continue;
                inside = inside && region[k];
                enhanced = enhanced && post[k] - pre[k] >= spec.contrast;
            }
            CHECK(inside);
            CHECK(enhanced);
        }
    }

    TEST_CASE("the heart sits behind the chest line and enhances strongly") {
        PhantomSpec spec;
        const PatientGeometry g = draw_geometry(spec, 0);
        REQUIRE(g.heart);
        const PatientCase pc = render_patient(g);
        const auto c = g.heart->center;
        const auto x = static_cast<std::size_t>(c[0]);
        const auto y = static_cast<std::size_t>(c[1]);
        const auto z = static_cast<std::size_t>(c[2]);
        CHECK(y > g.chest_row);
        CHECK(pc.region_mask.at(x, y, z) == 0);
        CHECK(pc.first_post_contrast.at(x, y, z) - pc.pre_contrast.at(x, y, z) >=
              1.5 * spec.contrast);

        spec.heart = false;
        CHECK_FALSE(draw_geometry(spec, 0).heart);
    }

    TEST_CASE("zero lesions leave nothing to select") {
        PhantomSpec spec;
        spec.lesions = {0, 0};
        const PatientCase pc = render_patient(draw_geometry(spec, 0));
        CHECK(rftest::count_nonzero(pc.lesion_mask) == 0);
        CHECK(select_lesion_slices(pc.lesion_mask).empty());
    }

    TEST_CASE("region rows end at the chest row") {
        PhantomSpec spec;
        spec.patients = 4;
        for (std::size_t i = 0; i < spec.patients; ++i) {
            const PatientGeometry g = draw_geometry(spec, i);
            const PatientCase pc = render_patient(g);
            const ExtentReport r = scan_extent(pc.region_mask);
            CHECK(r.y_max <= g.chest_row);
            CHECK(r.required_height <= 32);
        }
    }

    TEST_CASE("variable depth draws stay within the configured range") {
        PhantomSpec spec;
        spec.depth_min = 12;
        spec.patients = 10;
        for (std::size_t i = 0; i < spec.patients; ++i) {
            const std::size_t d = draw_geometry(spec, i).shape.depth;
            CHECK(d >= 12);
            CHECK(d <= 20);
        }
    }

    TEST_CASE("invalid specs are usage errors") {
        PhantomSpec spec;
        spec.patients = 0;
        CHECK_THROWS_AS(spec.validate(), UsageError);
        spec = {};
        spec.shape = {4, 64, 20};
        CHECK_THROWS_AS(spec.validate(), UsageError);
        spec = {};
        spec.lesions = {3, 1};
        CHECK_THROWS_AS(spec.validate(), UsageError);
        spec = {};
        spec.contrast = 0.0;
        CHECK_THROWS_AS(phantom_sources(spec), UsageError);
        spec = {};
        spec.lesion_radius_mm = {40.0, 50.0};
        CHECK_THROWS_AS(draw_geometry(spec, 0), DataError);
    }

    TEST_CASE("generated cohort files reload to the rendered volumes") {
        rftest::TempDir dir;
        PhantomSpec spec;
        spec.patients = 2;
        spec.shape = {32, 32, 10};
        const CohortManifest m = generate_cohort(spec, dir.path());
        CHECK(m.approach == Approach::Source);
        CHECK(std::filesystem::exists(dir / "manifest.json"));
        const CohortManifest back = read_manifest(dir / "manifest.json");
        validate_manifest(back);
        REQUIRE(back.patients.size() == 2);
        const PatientCase pc = render_patient(draw_geometry(spec, 1));
        const ManifestEntry& e = back.find(pc.id);
        CHECK(same(load_volume(back.resolve(e.files.first_post_contrast)), pc.first_post_contrast));
        CHECK(same(load_mask(back.resolve(e.files.lesion_mask)), pc.lesion_mask));
        CHECK(load_volume(back.resolve(e.files.pre_contrast)).orientation() == kRas);
    }
}
