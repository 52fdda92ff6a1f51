#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "thinfilm/detector.hpp"
#include "thinfilm/rbc_counter.hpp"
#include "thinfilm/synthgen.hpp"

using namespace thinfilm;
using detect::DetectorConfig;
using detect::project_gray;

TEST_CASE("project_gray evaluates the purple-highlighting projection") {
    ColorImage img(2, 1);
    img.at(0, 0, 0) = 180;
    img.at(0, 0, 1) = 20;
    img.at(0, 0, 2) = 160;
    img.at(1, 0, 0) = 50;
    img.at(1, 0, 1) = 200;
    img.at(1, 0, 2) = 50;
    const GrayImage g = project_gray(img, 1.0);
    REQUIRE(g.at(0, 0) == Catch::Approx(28800.0 / 401.0).epsilon(1e-5));   // ~71.82
    REQUIRE(g.at(1, 0) == Catch::Approx(2500.0 / 40001.0).epsilon(1e-4));  // suppressed

    ColorImage zero_r(1, 1, 0, 37, 255);
    REQUIRE(project_gray(zero_r, 1.0).at(0, 0) == 0.0f);

    REQUIRE_THROWS(project_gray(img, 0.0));
}

TEST_CASE("project_gray is monotone in R and B, antitone in G") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        const int r = static_cast<int>(rng.uniform_index(250));
        const int g = static_cast<int>(rng.uniform_index(250));
        const int b = static_cast<int>(rng.uniform_index(250));
        ColorImage base(1, 1, r, g, b);
        ColorImage more_r(1, 1, r + 5, g, b);
        ColorImage more_g(1, 1, r, g + 5, b);
        ColorImage more_b(1, 1, r, g, b + 5);
        const double v0 = project_gray(base, 1.0).at(0, 0);
        REQUIRE(project_gray(more_r, 1.0).at(0, 0) >= v0);
        REQUIRE(project_gray(more_b, 1.0).at(0, 0) >= v0);
        REQUIRE(project_gray(more_g, 1.0).at(0, 0) <= v0);
    }
}

TEST_CASE("extract_candidates applies the area gate") {
    Mask m(96, 96);
    // 30-px blob
    for (int y = 10; y < 16; ++y)
        for (int x = 10; x < 15; ++x) m.at(x, y) = 1;
    // second blob, separated
    for (int y = 5; y < 11; ++y)
        for (int x = 40; x < 45; ++x) m.at(x, y) = 1;
    // tiny blob below min_area
    m.at(90, 90) = 1;
    // huge blob above max_area (90x30 = 2700 px)
    for (int y = 30; y < 60; ++y)
        for (int x = 2; x < 92; ++x) m.at(x, y) = 1;

    DetectorConfig cfg;
    const auto cands = detect::extract_candidates(m, cfg);
    REQUIRE(cands.size() == 2);
    REQUIRE(cands[0].area == 30);
    REQUIRE(cands[1].area == 30);

    REQUIRE(detect::extract_candidates(Mask(32, 32), cfg).empty());
}

namespace {

// A stack where one purple dot appears in every slice, sharpest in the
// middle slice.
std::vector<ColorImage> dot_stack(int slices, int sharpest) {
    std::vector<ColorImage> out;
    for (int k = 0; k < slices; ++k) {
        ColorImage img(128, 128, 225, 222, 224);
        for (int y = 60; y < 68; ++y)
            for (int x = 60; x < 68; ++x) {
                img.at(x, y, 0) = 135;
                img.at(x, y, 1) = 55;
                img.at(x, y, 2) = 160;
            }
        const double sigma = 0.5 + 1.2 * std::abs(k - sharpest);
        out.push_back(gaussian_blur(img, sigma));
    }
    return out;
}

}  // namespace

TEST_CASE("dedupe groups the same object across slices and keeps the sharpest") {
    const auto slices = dot_stack(7, 3);
    DetectorConfig cfg;
    const auto objects = detect::detect_stack(slices, cfg);
    REQUIRE(objects.size() == 1);
    REQUIRE(objects[0].best_z == 3);
    REQUIRE(objects[0].cx == Catch::Approx(63.5).margin(2));
    REQUIRE(objects[0].thumbnail_ring.width == 64);
    REQUIRE(objects[0].thumbnail_late.width == 144);
}

TEST_CASE("objects far apart stay distinct; single-slice stack is identity") {
    ColorImage img(160, 96, 228, 224, 226);
    auto stamp = [&](int cx, int cy) {
        for (int y = cy - 3; y <= cy + 3; ++y)
            for (int x = cx - 3; x <= cx + 3; ++x) {
                img.at(x, y, 0) = 135;
                img.at(x, y, 1) = 55;
                img.at(x, y, 2) = 160;
            }
    };
    stamp(40, 48);
    stamp(120, 48);  // 80 px apart = 10x the cluster radius
    DetectorConfig cfg;
    const std::vector<ColorImage> one_slice{img};
    const auto objects = detect::detect_stack(one_slice, cfg);
    REQUIRE(objects.size() == 2);
    for (const auto& o : objects) REQUIRE(o.best_z == 0);
}

TEST_CASE("detector finds at least 95% of synthetic parasites at default config") {
    synth::SynthConfig scfg;
    scfg.width = 1024;
    scfg.height = 768;
    scfg.fovs = 4;
    scfg.blur_sigma_per_slice = {2.5, 1.2, 0.3, 1.2, 2.5};
    scfg.rbc_density = 100;
    scfg.rbc_radius_px = 28;
    scfg.parasitemia_per_ul = 250000;
    scfg.stage_mix = {0.5, 0.2, 0.3};
    scfg.species_mix = {0.4, 0.3, 0.2, 0.1};
    scfg.distractor_rate = 10;
    scfg.clump_fraction = 0.08;
    scfg.rng_seed = 99;
    const auto sample = synth::generate_sample(scfg, 2);
    REQUIRE(sample.annotations.size() > 30);

    DetectorConfig cfg;
    std::size_t matched = 0;
    for (int f = 0; f < scfg.fovs; ++f) {
        const auto objects = detect::detect_stack(sample.fovs[f].slices_memory, cfg, f);
        for (const auto& a : sample.annotations) {
            if (a.fov_index != f) continue;
            for (const auto& o : objects) {
                const double dx = o.cx - a.cx, dy = o.cy - a.cy;
                if (dx * dx + dy * dy <= 100.0) {
                    ++matched;
                    break;
                }
            }
        }
    }
    const double sensitivity = static_cast<double>(matched) / sample.annotations.size();
    REQUIRE(sensitivity >= 0.95);
}

TEST_CASE("well-separated objects produce at most one detection each") {
    // Sparse rings far apart; count detections within the match radius of
    // each annotation.
    synth::SynthConfig scfg;
    scfg.width = 768;
    scfg.height = 576;
    scfg.fovs = 3;
    scfg.blur_sigma_per_slice = {1.2, 0.3, 1.2};
    scfg.rbc_density = 30;
    scfg.rbc_radius_px = 28;
    scfg.parasitemia_per_ul = 300000;
    scfg.stage_mix = {1.0, 0.0, 0.0};
    scfg.distractor_rate = 0;
    scfg.rng_seed = 4;
    const auto sample = synth::generate_sample(scfg);
    DetectorConfig cfg;
    for (int f = 0; f < scfg.fovs; ++f) {
        const auto objects = detect::detect_stack(sample.fovs[f].slices_memory, cfg, f);
        for (const auto& a : sample.annotations) {
            if (a.fov_index != f) continue;
            int nearby = 0;
            for (const auto& o : objects) {
                const double dx = o.cx - a.cx, dy = o.cy - a.cy;
                if (dx * dx + dy * dy <= 100.0) ++nearby;
            }
            REQUIRE(nearby <= 1);
        }
    }
}

TEST_CASE("mark_in_quant_mask uses the census mask") {
    const auto slices = dot_stack(1, 0);
    DetectorConfig cfg;
    auto objects = detect::detect_stack(slices, cfg);
    REQUIRE(objects.size() == 1);
    Mask mask(128, 128);
    detect::mark_in_quant_mask(objects, mask);
    REQUIRE_FALSE(objects[0].in_quant_mask);
    for (int y = 55; y < 75; ++y)
        for (int x = 55; x < 75; ++x) mask.at(x, y) = 1;
    detect::mark_in_quant_mask(objects, mask);
    REQUIRE(objects[0].in_quant_mask);
}
