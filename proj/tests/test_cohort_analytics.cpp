#include <doctest.h>

#include <mutex>
#include <numeric>

#include "roiforge/cohort_analytics.hpp"
#include "roiforge/cohort_prep.hpp"
#include "roiforge/error.hpp"
#include "roiforge/phantom.hpp"
#include "support.hpp"

using namespace roiforge;
using rftest::Gen;

namespace {

CohortManifest manifest_with(Approach a, Shape s, std::size_t patients = 2) {
    CohortManifest m;
    m.approach = a;
    for (std::size_t i = 0; i < patients; ++i) {
        ManifestEntry e;
        e.id = "p" + std::to_string(i);
        e.shape = s;
        m.patients.push_back(e);
    }
    return m;
}

std::uint64_t sum(const std::vector<std::uint64_t>& v) {
    return std::accumulate(v.begin(), v.end(), std::uint64_t{0});
}

}  // namespace

TEST_SUITE("cohort_analytics") {
    TEST_CASE("a single voxel lands in its own cell") {
        MaskGrid region({32, 32, 1}, {});
        MaskGrid lesion({32, 32, 1}, {});
        region.at(10, 20, 0) = 1;
        lesion.at(10, 20, 0) = 1;
        OverlayMap map;
        map.add(region, lesion);
        CHECK(map.region_at(10, 20) == 1);
        CHECK(map.lesion_at(10, 20) == 1);
        CHECK(sum(map.region) == 1);
        CHECK(map.patients == 1);
        CHECK(map.slices == 1);
    }

    TEST_CASE("two identical slices double the map") {
        Gen gen(2);
        const MaskGrid one = gen.mask({16, 12, 1}, 0.3);
        const MaskGrid two = take_slices(one, std::vector<std::size_t>{0, 0});
        OverlayMap a, b;
        a.add(one, one);
        b.add(two, two);
        for (std::size_t i = 0; i < a.region.size(); ++i) {
            CHECK(b.region[i] == 2 * a.region[i]);
            CHECK(b.lesion[i] == 2 * a.lesion[i]);
        }
    }

    TEST_CASE("phantom cohort overlay equals the triple-loop oracle") {
        PhantomSpec spec;
        spec.patients = 6;
        std::vector<PatientCase> cases;
        for (const auto& s : phantom_sources(spec)) cases.push_back(s.load());
        std::vector<MaskPair> pairs;
        std::vector<std::uint64_t> region(64 * 64, 0), lesion(64 * 64, 0);
        for (const auto& c : cases) {
            pairs.push_back({&c.region_mask, &c.lesion_mask});
            rftest::brute_overlay(c.region_mask, c.lesion_mask, region, lesion);
        }
        const OverlayMap map = overlay_map(pairs);
        CHECK(map.region == region);
        CHECK(map.lesion == lesion);
        CHECK(map.patients == 6);
        CHECK(map.slices == 6 * 20);
        CHECK(midline_profile(map).h_max_mid == rftest::brute_h_max_mid(region, 64, 64));
    }

    TEST_CASE("property: overlay of a combined cohort is the cellwise sum") {
        for (std::uint64_t seed = 1; seed <= 25; ++seed) {
            Gen gen(seed);
            const Shape s{gen.size(1, 20), gen.size(1, 20), 1};
            std::vector<MaskGrid> masks;
            const std::size_t n = gen.size(2, 6);
            for (std::size_t i = 0; i < n; ++i) {
                const Shape pair_shape{s.width, s.height, gen.size(1, 5)};
                masks.push_back(gen.mask(pair_shape, gen.real(0, 0.5)));
                masks.push_back(gen.mask(pair_shape, gen.real(0, 0.5)));
            }
            std::vector<MaskPair> all, first, second;
            for (std::size_t i = 0; i < n; ++i) {
                const MaskPair p{&masks[2 * i], &masks[2 * i + 1]};
                all.push_back(p);
                (i < n / 2 ? first : second).push_back(p);
            }
            OverlayMap merged = overlay_map(first);
            merged.merge(overlay_map(second));
            CHECK(merged == overlay_map(all));

            const auto [hx, hy] = axis_histograms(merged);
            CHECK(sum(hx.counts) == sum(merged.lesion));
            CHECK(sum(hy.counts) == sum(merged.lesion));
        }
    }

    TEST_CASE("histograms of a single cell") {
        OverlayMap map(32, 32);
        map.lesion[10 + 32 * 20] = 3;
        const auto [hx, hy] = axis_histograms(map);
        CHECK(hx.counts[10] == 3);
        CHECK(hy.counts[20] == 3);
        CHECK(sum(hx.counts) == 3);
        CHECK(sum(hy.counts) == 3);
    }

    TEST_CASE("a cohort with lesions in the left breast has more left-half mass") {
        PhantomSpec spec;
        spec.patients = 5;
        spec.lesions = {2, 2};
        std::vector<PatientCase> cases;
        for (std::size_t i = 0; i < spec.patients; ++i) {
            PatientGeometry g = draw_geometry(spec, i);
            // Move every lesion into the breast on the low-x side.
            const BreastShape& left = g.breasts.front();
            for (auto& l : g.lesions) {
                l.center[0] = left.center_x;
                l.center[1] = static_cast<double>(g.chest_row) - left.depth / 2.0;
                l.center[2] = left.center_z;
            }
            cases.push_back(render_patient(g));
        }
        std::vector<MaskPair> pairs;
        for (const auto& c : cases) pairs.push_back({&c.region_mask, &c.lesion_mask});
        const auto [hx, hy] = axis_histograms(overlay_map(pairs));
        const std::uint64_t left = std::accumulate(hx.counts.begin(), hx.counts.begin() + 32,
                                                   std::uint64_t{0});
        const std::uint64_t right = std::accumulate(hx.counts.begin() + 32, hx.counts.end(),
                                                    std::uint64_t{0});
        CHECK(left > 0);
        CHECK(left > right);
    }

    TEST_CASE("midline extent: rows 40..119 in one column gives 80") {
        OverlayMap map(16, 160);
        for (std::size_t y = 40; y <= 119; ++y) map.region[3 + 16 * y] = 1;
        for (std::size_t y = 60; y <= 90; ++y) map.region[7 + 16 * y] = 2;
        map.region[9 + 16 * 10] = 1;
        map.region[9 + 16 * 30] = 1;
        const MidlineProfile p = midline_profile(map);
        CHECK(p.h_max_mid == 80);
        CHECK(p.argmax_column == 3);
        CHECK(p.extent[7] == 31);
        CHECK(p.extent[9] == 21);
        CHECK(p.extent[0] == 0);
        CHECK(p.h_max_mid == rftest::brute_h_max_mid(map.region, 16, 160));
    }

    TEST_CASE("empty map has zero extent") {
        const MidlineProfile p = midline_profile(OverlayMap(8, 8));
        CHECK(p.h_max_mid == 0);
        CHECK_FALSE(p.argmax_column);
        CHECK(midline_profile(OverlayMap{}).h_max_mid == 0);
    }

    TEST_CASE("OV cohort extent never exceeds the crop height") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            PhantomSpec spec;
            spec.patients = 4;
            spec.seed = seed;
            const auto sources = phantom_sources(spec);
            AssemblyParams params;
            params.crop_plan = plan_cohort_crop(sources, 32, ChestSide::HighRows);
            OverlayMap map;
            std::mutex mu;
            assemble_approach(sources, Approach::BrsOv, params, seed, [&](AssembledCase& c) {
                std::lock_guard lock(mu);
                map.add(c.region_mask, c.lesion_mask);
            });
            CHECK(midline_profile(map).h_max_mid <= params.crop_plan->crop_height);
        }
    }

    TEST_CASE("pixel budget of the four dataset shapes") {
        const std::vector<CohortManifest> ms{
            manifest_with(Approach::WvRaw, {352, 352, 150}),
            manifest_with(Approach::BrsWv, {352, 352, 150}),
            manifest_with(Approach::BrsSls, {352, 352, 42}),
            manifest_with(Approach::BrsOv, {352, 192, 42})};
        const auto budget = pixel_budget(ms);
        CHECK(budget[0].voxels_per_patient == 18'585'600);
        CHECK(budget[3].voxels_per_patient == 2'838'528);
        CHECK(*budget[3].voxel_ratio == 8064.0 / 52800.0);
        CHECK(*budget[3].voxel_ratio == doctest::Approx(0.1527).epsilon(1e-3));
        CHECK(*budget[2].slice_ratio == 0.28);
        CHECK(1.0 - *budget[2].slice_ratio == doctest::Approx(0.72));
        CHECK(*budget[1].voxel_ratio == 1.0);
    }

    TEST_CASE("identical manifests have ratio 1; empty manifests are errors") {
        const std::vector<CohortManifest> ms{manifest_with(Approach::BrsSls, {10, 10, 4}),
                                             manifest_with(Approach::BrsSls, {10, 10, 4})};
        for (const auto& b : pixel_budget(ms)) CHECK(*b.voxel_ratio == 1.0);
        const std::vector<CohortManifest> empty{manifest_with(Approach::WvRaw, {1, 1, 1}, 0)};
        CHECK_THROWS_AS(pixel_budget(empty), DataError);
    }

    TEST_CASE("mismatched masks cannot be accumulated") {
        OverlayMap map(8, 8);
        CHECK_THROWS_AS(map.add(MaskGrid({8, 8, 2}, {}), MaskGrid({8, 8, 3}, {})), DataError);
        CHECK_THROWS_AS(map.add(MaskGrid({9, 8, 2}, {}), MaskGrid({9, 8, 2}, {})), DataError);
        CHECK_THROWS_AS(map.merge(OverlayMap(4, 4)), DataError);
    }
}
