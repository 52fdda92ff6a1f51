#include <catch2/catch_amalgamated.hpp>

#include "thinfilm/imgproc.hpp"
#include "thinfilm/qc.hpp"
#include "thinfilm/rng.hpp"
#include "thinfilm/synthgen.hpp"

using namespace thinfilm;

namespace {

ColorImage noise_image(int w, int h, double amplitude, std::uint64_t seed) {
    Rng rng(seed);
    ColorImage img(w, h, 128, 128, 128);
    for (auto& v : img.rgb) {
        v = clamp_u8(128.0 + rng.uniform(-amplitude, amplitude));
    }
    return img;
}

ColorImage sharp_synth_fov(std::uint64_t seed) {
    synth::SynthConfig cfg;
    cfg.width = 512;
    cfg.height = 384;
    cfg.fovs = 1;
    cfg.blur_sigma_per_slice = {0.3};
    cfg.rbc_density = 40;
    cfg.rbc_radius_px = 22;
    cfg.distractor_rate = 4;
    cfg.rng_seed = seed;
    return synth::generate_sample(cfg).fovs[0].slices_memory[0];
}

}  // namespace

TEST_CASE("constant image fails stage 1 with low_stddev") {
    const ColorImage flat(64, 64, 90, 90, 90);
    const auto v = qc::qc_stage1(flat, 4.0, 12.0);
    REQUIRE_FALSE(v.accepted);
    REQUIRE(v.reason == qc::Reason::low_stddev);
    REQUIRE(v.gray_stddev == Catch::Approx(0.0));
}

TEST_CASE("white-noise image of amplitude 60 passes stage 1") {
    const ColorImage img = noise_image(128, 128, 60, 5);
    const auto v = qc::qc_stage1(img, 4.0, 12.0);
    REQUIRE(v.accepted);
    REQUIRE(v.reason == qc::Reason::ok);
    REQUIRE(v.gray_stddev > 4.0);
    REQUIRE(v.gradient_dynamic_range > 12.0);
}

TEST_CASE("stage 1 statistics are invariant to a constant brightness shift") {
    const ColorImage img = sharp_synth_fov(31);
    ColorImage shifted = img;
    for (auto& v : shifted.rgb) v = static_cast<std::uint8_t>(std::max(0, v - 40));
    const auto a = qc::qc_stage1(img, 4.0, 12.0);
    const auto b = qc::qc_stage1(shifted, 4.0, 12.0);
    REQUIRE(a.gray_stddev == Catch::Approx(b.gray_stddev).epsilon(0.02));
    REQUIRE(a.gradient_dynamic_range == Catch::Approx(b.gradient_dynamic_range).epsilon(0.05));
}

TEST_CASE("blurring strictly lowers the gradient dynamic range") {
    const ColorImage sharp = sharp_synth_fov(8);
    const ColorImage blurred = gaussian_blur(sharp, 8.0);
    const auto vs = qc::qc_stage1(sharp, 4.0, 12.0);
    const auto vb = qc::qc_stage1(blurred, 4.0, 12.0);
    REQUIRE(vs.accepted);
    REQUIRE(vb.gradient_dynamic_range < vs.gradient_dynamic_range);
}

TEST_CASE("focus features: constant image yields zeros with unit ratios") {
    const ColorImage flat(48, 48, 200, 200, 200);
    const auto f = qc::qc_focus_features(flat);
    REQUIRE(f.size() == 9);
    for (int i = 0; i < 6; ++i) REQUIRE(f[i] == Catch::Approx(0.0));
    for (int i = 6; i < 9; ++i) REQUIRE(f[i] == Catch::Approx(1.0));
}

TEST_CASE("focus ratios are >= 1 on real content and near 1 when pre-blurred") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const ColorImage img = sharp_synth_fov(seed);
        const auto f = qc::qc_focus_features(img);
        REQUIRE(f[6] >= 1.0);
        REQUIRE(f[7] >= 1.0);
        REQUIRE(f[8] >= 1.0);
        REQUIRE(f[6] > 2.0);  // sharp content responds strongly to blurring

        const auto fb = qc::qc_focus_features(gaussian_blur(img, 8.0));
        REQUIRE(fb[6] >= 1.0);
        REQUIRE(fb[6] < 1.2);  // already smooth
        REQUIRE(fb[8] < 1.2);
    }
}

TEST_CASE("trained blur classifier accepts sharp stacks and rejects blurred ones") {
    // Tiny labeled set: focus features of sharp synthetic FoVs vs their
    // heavily blurred copies.
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ColorImage img = sharp_synth_fov(100 + seed);
        rows.push_back(qc::qc_focus_features(img));
        labels.push_back(0);
        rows.push_back(qc::qc_focus_features(gaussian_blur(img, 8.0)));
        labels.push_back(1);
    }
    gbt::TrainParams params;
    params.n_trees = 40;
    params.max_depth = 2;
    params.seed = 3;
    const auto model = gbt::gbt_train(rows, labels, qc::focus_feature_names(), params);

    const ColorImage sharp = sharp_synth_fov(999);
    const auto ok = qc::qc_blur_classify(qc::qc_focus_features(sharp), model);
    REQUIRE(ok.accepted);
    REQUIRE(ok.reason == qc::Reason::ok);

    const auto bad = qc::qc_blur_classify(qc::qc_focus_features(gaussian_blur(sharp, 8.0)), model);
    REQUIRE_FALSE(bad.accepted);
    REQUIRE(bad.reason == qc::Reason::blurry);

    // A score exactly at the threshold rejects.
    const auto tie = qc::qc_blur_classify(qc::qc_focus_features(sharp), model, ok.blur_score);
    REQUIRE_FALSE(tie.accepted);

    gbt::GbtModel untrained;
    REQUIRE_THROWS(qc::qc_blur_classify(qc::qc_focus_features(sharp), untrained));
}

TEST_CASE("qc_stack picks the best-focus slice and judges the whole stack") {
    synth::SynthConfig cfg;
    cfg.width = 384;
    cfg.height = 288;
    cfg.fovs = 1;
    cfg.blur_sigma_per_slice = {4.0, 0.3, 4.0};
    cfg.rbc_density = 25;
    cfg.rbc_radius_px = 22;
    cfg.rng_seed = 77;
    const auto sample = synth::generate_sample(cfg);
    const auto& slices = sample.fovs[0].slices_memory;
    REQUIRE(qc::best_focus_slice(slices) == 1);
    const auto v = qc::qc_stack(slices, {}, nullptr);
    REQUIRE(v.accepted);
    REQUIRE(v.qc_slice == 1);

    // An all-flat stack is rejected outright.
    std::vector<ColorImage> flat(3, ColorImage(64, 64, 130, 130, 130));
    REQUIRE_FALSE(qc::qc_stack(flat, {}, nullptr).accepted);
}
