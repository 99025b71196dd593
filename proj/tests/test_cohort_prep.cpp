#include <doctest.h>

#include <cstring>
#include <map>
#include <mutex>
#include <set>

#include "roiforge/cohort_prep.hpp"
#include "roiforge/error.hpp"
#include "roiforge/phantom.hpp"
#include "roiforge/seeding.hpp"
#include "roiforge/volume_io.hpp"
#include "support.hpp"

using namespace roiforge;
using rftest::Gen;
using rftest::TempDir;

namespace {

struct Collected {
    std::map<std::string, AssembledCase> cases;
};

CaseSink collect_into(Collected& c) {
    return [&c](AssembledCase& a) {
        static std::mutex mu;
        std::lock_guard lock(mu);
        c.cases.emplace(a.entry.id, a);
    };
}

std::vector<CaseSource> sources_of(std::vector<PatientGeometry> geometries) {
    std::vector<CaseSource> out;
    for (auto& g : geometries) {
        out.push_back({g.id, [g] { return render_patient(g); }});
    }
    return out;
}

// Two patients on a 64x64x20 grid. P1: 6 lesion slices (z = 7..12) and a
// 30-row breast extent in those slices; P2: 4 lesion slices, shallower breast.
std::vector<PatientGeometry> small_cohort() {
    auto make = [](std::string id, std::size_t chest, double depth, Ellipsoid lesion) {
        PatientGeometry g;
        g.id = std::move(id);
        g.shape = {64, 64, 20};
        g.spacing = {1.0, 1.0, 1.0};
        g.chest_row = chest;
        g.breasts = {BreastShape{16, 10, 13, depth, 9}, BreastShape{48, 10, 13, depth, 9}};
        g.lesions = {lesion};
        g.heart = Ellipsoid{{32, 56, 10}, {8, 4, 6}};
        g.noise_seed = derive_seed(99, g.id);
        return g;
    };
    return {make("P1", 45, 29, Ellipsoid{{16, 35, 9.5}, {3, 3, 3}}),
            make("P2", 47, 20, Ellipsoid{{48, 40, 10.5}, {2.5, 2.5, 2}})};
}

bool slice_equal(const VolumeGrid& a, std::size_t za, const VolumeGrid& b, std::size_t zb) {
    const auto sa = a.slice(za);
    const auto sb = b.slice(zb);
    return std::memcmp(sa.data(), sb.data(), sa.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_SUITE("cohort_prep") {
    TEST_CASE("series descriptors map to roles") {
        CHECK(classify_series("t1_pre") == SeriesRole::PreContrast);
        CHECK(classify_series("PC") == SeriesRole::PreContrast);
        CHECK(classify_series("FPC") == SeriesRole::FirstPostContrast);
        CHECK(classify_series("dyn_post1") == SeriesRole::FirstPostContrast);
        CHECK(classify_series("brs_mask") == SeriesRole::RegionMask);
        CHECK(classify_series("lesion") == SeriesRole::LesionMask);
        CHECK(classify_series("lesion_mask") == SeriesRole::LesionMask);
        CHECK(classify_series("sub") == SeriesRole::Unknown);
        CHECK(classify_series("localizer") == SeriesRole::Unknown);
    }

    TEST_CASE("pairing complete and incomplete patients") {
        const std::vector<SeriesCandidate> full{
            {"a/p_pc.nii", "pc"}, {"a/p_fpc.nii", "fpc"}, {"a/p_brs.nii", "brs"},
            {"a/p_lesion.nii", "lesion"}};
        const auto ok = pair_contrast_series("p", full);
        REQUIRE(std::holds_alternative<CaseFiles>(ok));
        CHECK(std::get<CaseFiles>(ok).first_post_contrast == "a/p_fpc.nii");

        const std::vector<SeriesCandidate> no_pc(full.begin() + 1, full.end());
        const auto missing = pair_contrast_series("p", no_pc);
        REQUIRE(std::holds_alternative<Exclusion>(missing));
        CHECK(std::get<Exclusion>(missing).reason == "missing pre-contrast");

        const auto empty = pair_contrast_series("q", {});
        CHECK(std::get<Exclusion>(empty) == Exclusion{"q", "no series"});

        std::vector<SeriesCandidate> two_post = full;
        two_post.push_back({"a/p_post.nii", "post"});
        const auto amb = pair_contrast_series("p", two_post);
        CHECK(std::get<Exclusion>(amb).reason == "ambiguous first post-contrast (2 candidates)");

        const std::vector<SeriesCandidate> images_only(full.begin(), full.begin() + 2);
        CHECK(std::get<Exclusion>(pair_contrast_series("p", images_only)).reason ==
              "missing region mask; missing lesion mask");
    }

    TEST_CASE("discover_cases groups files by patient and loads them") {
        TempDir dir;
        const PatientCase pc = render_patient(small_cohort()[0]);
        save_volume(pc.pre_contrast, dir / "P1_pc.nii.gz");
        save_volume(pc.first_post_contrast, dir / "P1_fpc.nii.gz");
        save_mask(pc.region_mask, dir / "P1_brs.nii.gz");
        save_mask(pc.lesion_mask, dir / "P1_lesion.nii.gz");
        save_volume(pc.first_post_contrast, dir / "P2_fpc.nii.gz");
        rftest::write_file(dir / "notes.txt", "ignored");

        const auto results = discover_cases(dir.path());
        REQUIRE(results.size() == 2);
        const auto& files = std::get<CaseFiles>(results[0]);
        CHECK(files.id == "P1");
        CHECK(std::get<Exclusion>(results[1]).reason ==
              "missing pre-contrast; missing region mask; missing lesion mask");

        const PatientCase loaded = load_case(files);
        CHECK(loaded.pre_contrast.shape() == pc.pre_contrast.shape());
        CHECK(std::equal(loaded.lesion_mask.data().begin(), loaded.lesion_mask.data().end(),
                         pc.lesion_mask.data().begin()));
        CHECK_THROWS_AS(discover_cases(dir / "missing"), DataError);
    }

    TEST_CASE("subtraction clamps negative enhancement to zero") {
        Gen gen(21);
        const VolumeGrid pc = gen.volume({9, 7, 5}, 0.0, 100.0);
        CHECK(rftest::count_nonzero(subtract(pc, pc)) == 0);

        VolumeGrid plus = pc;
        for (auto& v : plus.data()) v += 100.0f;
        const VolumeGrid s = subtract(plus, pc);
        for (float v : s.data()) CHECK(v == doctest::Approx(100.0).epsilon(1e-5));

        const VolumeGrid fpc = gen.volume({9, 7, 5}, 0.0, 100.0);
        const VolumeGrid clamped = subtract(fpc, pc);
        std::size_t differing = 0, negatives = 0;
        for (std::size_t i = 0; i < pc.size(); ++i) {
            const float raw = fpc.data()[i] - pc.data()[i];
            CHECK(clamped.data()[i] >= 0.0f);
            if (raw < 0.0f) ++negatives;
            if (clamped.data()[i] != raw) {
                ++differing;
                CHECK(raw < 0.0f);
            }
        }
        CHECK(differing == negatives);
        CHECK(negatives > 0);
        CHECK_THROWS_AS(subtract(fpc, VolumeGrid({9, 7, 4}, {})), DataError);
    }

    TEST_CASE("region masking: identity, zeroing and idempotence") {
        Gen gen(8);
        const VolumeGrid v = gen.volume({12, 10, 4}, 1.0, 50.0);
        const VolumeGrid all = apply_region_mask(v, MaskGrid(v.shape(), {}, 1));
        CHECK(std::equal(all.data().begin(), all.data().end(), v.data().begin()));
        CHECK(rftest::count_nonzero(apply_region_mask(v, MaskGrid(v.shape(), {}, 0))) == 0);
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            Gen g(seed);
            const MaskGrid m = g.mask(v.shape(), 0.5);
            const VolumeGrid once = apply_region_mask(v, m);
            const VolumeGrid twice = apply_region_mask(once, m);
            CHECK(std::equal(once.data().begin(), once.data().end(), twice.data().begin()));
        }
        CHECK_THROWS_AS(apply_region_mask(v, MaskGrid(v.shape(), {}, 2)), DataError);
    }

    TEST_CASE("phantom heart disappears under the region mask, breast is untouched") {
        PhantomSpec spec;
        const PatientGeometry g = draw_geometry(spec, 0);
        REQUIRE(g.heart);
        const PatientCase pc = render_patient(g);
        const VolumeGrid masked = apply_region_mask(pc.pre_contrast, pc.region_mask);
        std::size_t heart_sites = 0, heart_left = 0, breast_changed = 0;
        for (std::size_t z = 0; z < g.shape.depth; ++z)
            for (std::size_t y = 0; y < g.shape.height; ++y)
                for (std::size_t x = 0; x < g.shape.width; ++x) {
                    if (g.heart->contains(double(x), double(y), double(z))) {
                        ++heart_sites;
                        CHECK(pc.pre_contrast.at(x, y, z) > 0.0f);
                        if (masked.at(x, y, z) != 0.0f) ++heart_left;
                    }
                    if (g.in_breast(x, y, z) && masked.at(x, y, z) != pc.pre_contrast.at(x, y, z))
                        ++breast_changed;
                }
        CHECK(heart_sites > 0);
        CHECK(heart_left == 0);
        CHECK(breast_changed == 0);
    }

    TEST_CASE("min-max normalisation") {
        Gen gen(4);
        VolumeGrid v = gen.volume({5, 5, 5}, -20.0, 300.0);
        normalize_minmax(v);
        const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
        CHECK(*lo == 0.0f);
        CHECK(*hi == 1.0f);
        VolumeGrid flat({3, 3, 3}, {}, 7.0f);
        normalize_minmax(flat);
        CHECK(rftest::count_nonzero(flat) == 0);
    }

    TEST_CASE("lesion slice selection") {
        MaskGrid m({8, 8, 40}, {});
        CHECK(select_lesion_slices(m).empty());
        for (std::size_t z : {10, 11, 12}) m.at(2, 3, z) = 1;
        CHECK(select_lesion_slices(m) == std::vector<std::size_t>{10, 11, 12});
        MaskGrid two({8, 8, 40}, {});
        two.at(1, 1, 5) = 1;
        two.at(6, 6, 30) = 1;
        CHECK(select_lesion_slices(two) == std::vector<std::size_t>{5, 30});
    }

    TEST_CASE("property: selection agrees with per-slice sums and keeps every lesion voxel") {
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            Gen gen(seed);
            const MaskGrid m = gen.blobs(gen.shape(20), gen.size(0, 3), 4);
            std::vector<std::size_t> expected;
            for (std::size_t z = 0; z < m.depth(); ++z) {
                std::size_t sum = 0;
                for (std::size_t y = 0; y < m.height(); ++y)
                    for (std::size_t x = 0; x < m.width(); ++x) sum += m.at(x, y, z);
                if (sum > 0) expected.push_back(z);
            }
            const auto got = select_lesion_slices(m);
            CHECK(got == expected);
            if (!got.empty()) {
                CHECK(rftest::count_nonzero(take_slices(m, std::span(got))) ==
                      rftest::count_nonzero(m));
            }
        }
    }

    TEST_CASE("oversampling plans") {
        const OversampleMap same = plan_oversample(150, 150, 1);
        for (std::size_t i = 0; i < 150; ++i) CHECK(same.source_slices[i] == i);

        const OversampleMap grow = plan_oversample(120, 150, 42);
        REQUIRE(grow.source_slices.size() == 150);
        CHECK(std::is_sorted(grow.source_slices.begin(), grow.source_slices.end()));
        const std::set<std::size_t> distinct(grow.source_slices.begin(), grow.source_slices.end());
        CHECK(distinct.size() == 120);
        CHECK(*distinct.rbegin() == 119);
        CHECK(plan_oversample(120, 150, 42) == grow);

        CHECK_THROWS_AS(plan_oversample(150, 140, 1), DataError);
        CHECK_THROWS_AS(plan_oversample(0, 10, 1), DataError);
    }

    TEST_CASE("property: oversampled slices are copies of source slices") {
        for (std::uint64_t seed = 1; seed <= 30; ++seed) {
            Gen gen(seed);
            const VolumeGrid v = gen.volume({6, 5, gen.size(1, 12)}, 0.0, 1.0);
            const std::size_t target = v.depth() + gen.size(0, 15);
            const auto [out, map] = oversample_depth(v, target, seed);
            REQUIRE(out.depth() == target);
            for (std::size_t z = 0; z < target; ++z) {
                CHECK(slice_equal(out, z, v, map.source_slices[z]));
            }
            // Each source slice appears, in order, as one contiguous run.
            std::size_t expect = 0;
            for (std::size_t z = 0; z < target; ++z) {
                if (map.source_slices[z] != expect) {
                    CHECK(map.source_slices[z] == expect + 1);
                    ++expect;
                }
            }
            CHECK(expect == v.depth() - 1);
        }
    }

    TEST_CASE("64x64x20 cohort: SLS (64,64,6) and OV (64,32,6)") {
        const auto sources = sources_of(small_cohort());
        const CropPlan plan = plan_cohort_crop(sources, 32, ChestSide::HighRows);
        CHECK(plan.required_height == 30);
        CHECK(plan.crop_height == 32);
        CHECK(plan.safe_distance_px == 2);

        AssemblyParams params;
        params.crop_plan = plan;
        const auto wv = assemble_approach(sources, Approach::WvRaw, params, 5, {});
        const auto sls = assemble_approach(sources, Approach::BrsSls, params, 5, {});
        const auto ov = assemble_approach(sources, Approach::BrsOv, params, 5, {});
        for (const auto& e : wv.patients) CHECK(e.shape == Shape{64, 64, 20});
        for (const auto& e : sls.patients) CHECK(e.shape == Shape{64, 64, 6});
        for (const auto& e : ov.patients) CHECK(e.shape == Shape{64, 32, 6});
        CHECK(sls.find("P1").selected_slices == std::vector<std::size_t>{7, 8, 9, 10, 11, 12});
        CHECK(sls.find("P2").selected_slices->size() == 4);
        REQUIRE(ov.crop_plan);
        CHECK(*ov.crop_plan == plan);
        CHECK(ov.find("P1").crop->y_start == 45 + 1 - 32);
    }

    TEST_CASE("OV assembly without a plan is rejected") {
        const auto sources = sources_of(small_cohort());
        CHECK_THROWS_WITH_AS(assemble_approach(sources, Approach::BrsOv, {}, 1, {}),
                             doctest::Contains("crop plan"), DataError);
        CHECK_THROWS_AS(assemble_approach(sources, Approach::Source, {}, 1, {}), UsageError);
    }

    TEST_CASE("lesions on every slice: SLS depth equals WV depth") {
        PatientGeometry g = small_cohort()[0];
        g.shape.depth = 8;
        g.breasts = {BreastShape{32, 3.5, 20, 25, 30}};
        g.lesions = {Ellipsoid{{32, 35, 3.5}, {3, 3, 4.4}}};
        const auto sources = sources_of({g});
        const auto wv = assemble_approach(sources, Approach::BrsWv, {}, 1, {});
        const auto sls = assemble_approach(sources, Approach::BrsSls, {}, 1, {});
        CHECK(sls.patients.front().shape.depth == wv.patients.front().shape.depth);
    }

    TEST_CASE("assembly invariants on a generated cohort") {
        PhantomSpec spec;
        spec.patients = 5;
        spec.depth_min = 14;
        spec.seed = 31;
        const auto sources = phantom_sources(spec);
        AssemblyParams params;
        params.normalize = false;
        params.crop_plan = plan_cohort_crop(sources, 32, ChestSide::HighRows);

        std::map<std::string, PatientCase> originals;
        for (const auto& s : sources) originals.emplace(s.id, s.load());

        for (Approach a : kAllApproaches) {
            Collected got;
            const CohortManifest m = assemble_approach(sources, a, params, 77, collect_into(got));
            CAPTURE(to_string(a));
            REQUIRE(!m.patients.empty());
            const Shape shape = m.patients.front().shape;
            for (const auto& e : m.patients) CHECK(e.shape == shape);

            for (const auto& [id, c] : got.cases) {
                const PatientCase& src = originals.at(id);
                CHECK(std::all_of(c.subtraction.data().begin(), c.subtraction.data().end(),
                                  [](float v) { return v >= 0.0f; }));
                // Every output lesion voxel count equals the source count
                // weighted by how often each source slice was used.
                const auto& map = *c.entry.oversample;
                std::size_t expected = 0;
                const auto slices = c.entry.selected_slices
                                        ? *c.entry.selected_slices
                                        : std::vector<std::size_t>();
                for (std::size_t z : map.source_slices) {
                    const std::size_t src_z = slices.empty() ? z : slices[z];
                    const auto s = src.lesion_mask.slice(src_z);
                    expected += static_cast<std::size_t>(std::count(s.begin(), s.end(), 1));
                }
                CHECK(rftest::count_nonzero(c.lesion_mask) == expected);
                if (a == Approach::WvRaw) {
                    // Unmasked: something outside the region remains.
                    std::size_t outside = 0;
                    for (std::size_t i = 0; i < c.pre_contrast.size(); ++i)
                        if (!c.region_mask.data()[i] && c.pre_contrast.data()[i] != 0.0f) ++outside;
                    CHECK(outside > 0);
                } else {
                    for (std::size_t i = 0; i < c.pre_contrast.size(); ++i) {
                        if (!c.region_mask.data()[i]) {
                            REQUIRE(c.pre_contrast.data()[i] == 0.0f);
                            REQUIRE(c.first_post_contrast.data()[i] == 0.0f);
                        }
                    }
                }
            }
        }
    }

    TEST_CASE("patients without lesions are excluded from lesion-slice sets only") {
        auto geoms = small_cohort();
        geoms[1].lesions.clear();
        const auto sources = sources_of(geoms);
        const auto wv = assemble_approach(sources, Approach::BrsWv, {}, 1, {});
        const auto sls = assemble_approach(sources, Approach::BrsSls, {}, 1, {});
        CHECK(wv.patients.size() == 2);
        CHECK(wv.excluded.empty());
        CHECK(sls.patients.size() == 1);
        REQUIRE(sls.excluded.size() == 1);
        CHECK(sls.excluded.front() == Exclusion{"P2", "no lesion slices"});
    }

    TEST_CASE("inconsistent in-plane shapes are rejected") {
        auto geoms = small_cohort();
        geoms[1].shape.width = 60;
        CHECK_THROWS_AS(assemble_approach(sources_of(geoms), Approach::WvRaw, {}, 1, {}),
                        DataError);
    }

    TEST_CASE("assembly is independent of the worker count") {
        const auto sources = sources_of(small_cohort());
        AssemblyParams one, three;
        three.jobs = 3;
        const auto a = assemble_approach(sources, Approach::BrsWv, one, 9, {});
        const auto b = assemble_approach(sources, Approach::BrsWv, three, 9, {});
        CHECK(manifest_to_json(a) == manifest_to_json(b));
    }

    TEST_CASE("write_case_files produces a valid manifest") {
        TempDir dir;
        const auto sources = sources_of(small_cohort());
        CohortManifest m =
            assemble_approach(sources, Approach::BrsSls, {}, 3, write_case_files(dir.path()));
        m.base_dir = dir.path();
        write_manifest(m, dir / "manifest.json");
        const CohortManifest back = read_manifest(dir / "manifest.json");
        CHECK_NOTHROW(validate_manifest(back));
        const MaskGrid lesion = load_mask(back.resolve(back.find("P1").files.lesion_mask));
        CHECK(lesion.shape() == Shape{64, 64, 6});
        const VolumeGrid sub = load_volume(back.resolve(back.find("P1").files.subtraction));
        const auto [lo, hi] = std::minmax_element(sub.data().begin(), sub.data().end());
        CHECK(*lo == 0.0f);
        CHECK(*hi == 1.0f);
    }
}
