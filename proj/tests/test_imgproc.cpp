#include <catch2/catch_amalgamated.hpp>

#include "thinfilm/image.hpp"
#include "thinfilm/imgproc.hpp"
#include "thinfilm/rng.hpp"

#include "oracles.hpp"

using namespace thinfilm;

namespace {

GrayImage random_gray_u8(int w, int h, Rng& rng) {
    GrayImage g(w, h);
    for (auto& v : g.v) v = static_cast<float>(rng.uniform_index(256));
    return g;
}

Mask random_mask(int w, int h, double density, Rng& rng) {
    Mask m(w, h);
    for (auto& v : m.v) v = rng.bernoulli(density) ? 1 : 0;
    return m;
}

Mask disk_mask(int w, int h, double cx, double cy, double r) {
    Mask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.at(x, y) = 1;
    return m;
}

}  // namespace

TEST_CASE("connected components match flood-fill oracle on random masks") {
    Rng rng(1234);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 8 + static_cast<int>(rng.uniform_index(56));
        const int h = 8 + static_cast<int>(rng.uniform_index(56));
        const double density = rng.uniform(0.15, 0.7);
        const Mask m = random_mask(w, h, density, rng);

        const Labeling lab = connected_components(m);
        std::vector<int> got(lab.labels.begin(), lab.labels.end());
        const auto expect = oracles::canonical_labels(oracles::flood_fill_components(m));
        REQUIRE(oracles::canonical_labels(got) == expect);

        // Blob areas must add up to the mask population.
        std::int64_t area = 0;
        for (const auto& b : lab.blobs) area += b.area;
        REQUIRE(area == static_cast<std::int64_t>(m.count_nonzero()));
    }
}

TEST_CASE("local threshold equals brute-force windowed computation") {
    Rng rng(99);
    for (int trial = 0; trial < 8; ++trial) {
        const GrayImage g = random_gray_u8(64, 64, rng);
        const int window = 3 + 2 * static_cast<int>(rng.uniform_index(8));
        const double offset = rng.uniform(0.0, 3.0);
        const Mask fast = local_threshold(g, window, offset);
        const Mask brute = oracles::local_threshold_brute(g, window, offset);
        REQUIRE(fast.v == brute.v);
    }
}

TEST_CASE("local threshold basics") {
    GrayImage flat(32, 32, 50.f);
    const Mask none = local_threshold(flat, 7, 1.0);
    REQUIRE(none.count_nonzero() == 0);

    GrayImage dot(33, 33, 10.f);
    dot.at(16, 16) = 200.f;
    const Mask m = local_threshold(dot, 9, 2.0);
    REQUIRE(m.at(16, 16) == 1);
    REQUIRE(m.count_nonzero() == 1);

    REQUIRE_THROWS(local_threshold(flat, 4, 1.0));
}

TEST_CASE("gaussian blur reduces focus scores monotonically") {
    Rng rng(7);
    GrayImage g = random_gray_u8(96, 96, rng);
    double prev_brenner = brenner_score(g);
    double prev_tenengrad = tenengrad_score(g);
    for (double sigma : {0.8, 1.6, 3.2, 6.4}) {
        const GrayImage b = gaussian_blur(g, sigma);
        const double br = brenner_score(b);
        const double te = tenengrad_score(b);
        REQUIRE(br < prev_brenner);
        REQUIRE(te < prev_tenengrad);
        prev_brenner = br;
        prev_tenengrad = te;
    }
}

TEST_CASE("integral image rectangle sums") {
    Rng rng(5);
    const GrayImage g = random_gray_u8(24, 17, rng);
    const IntegralImage ii(g);
    for (int trial = 0; trial < 50; ++trial) {
        int x0 = static_cast<int>(rng.uniform_index(24)), x1 = static_cast<int>(rng.uniform_index(24));
        int y0 = static_cast<int>(rng.uniform_index(17)), y1 = static_cast<int>(rng.uniform_index(17));
        if (x0 > x1) std::swap(x0, x1);
        if (y0 > y1) std::swap(y0, y1);
        double s = 0;
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) s += g.at(x, y);
        REQUIRE(ii.rect_sum(x0, y0, x1, y1) == Catch::Approx(s));
    }
}

TEST_CASE("region geometry on rasterized disks") {
    const Mask disk = disk_mask(81, 81, 40, 40, 30);
    const auto mom = region_moments(disk);
    REQUIRE(mom.elongation == Catch::Approx(1.0).margin(0.02));
    REQUIRE(mom.eccentricity < 0.15);

    const double per = region_perimeter(disk);
    const double area = static_cast<double>(disk.count_nonzero());
    const double roundness = 4.0 * std::numbers::pi * area / (per * per);
    REQUIRE(roundness == Catch::Approx(1.0).margin(0.05));

    REQUIRE(euler_number(disk) == 1);

    // Disk with a hole: euler number 0.
    Mask annulus = disk;
    for (int y = 0; y < annulus.height; ++y)
        for (int x = 0; x < annulus.width; ++x)
            if ((x - 40) * (x - 40) + (y - 40) * (y - 40) <= 10 * 10) annulus.at(x, y) = 0;
    REQUIRE(euler_number(annulus) == 0);
}

TEST_CASE("fill_holes closes interior background") {
    Mask annulus = disk_mask(41, 41, 20, 20, 15);
    for (int y = 0; y < 41; ++y)
        for (int x = 0; x < 41; ++x)
            if ((x - 20) * (x - 20) + (y - 20) * (y - 20) <= 36) annulus.at(x, y) = 0;
    const Mask filled = fill_holes(annulus);
    REQUIRE(filled.at(20, 20) == 1);
    REQUIRE(filled.count_nonzero() == disk_mask(41, 41, 20, 20, 15).count_nonzero());
}

TEST_CASE("dilate_disk grows a point into a disk of the right radius") {
    Mask m(41, 41);
    m.at(20, 20) = 1;
    const Mask d = dilate_disk(m, 6.0);
    REQUIRE(d.at(20, 20) == 1);
    REQUIRE(d.at(26, 20) == 1);
    REQUIRE(d.at(20, 26) == 1);
    REQUIRE(d.at(28, 20) == 0);
    // Diagonal reach within ~chamfer accuracy.
    REQUIRE(d.at(24, 24) == 1);
}

TEST_CASE("two_means separates bimodal luminance") {
    GrayImage g(64, 64, 220.f);
    for (int y = 10; y < 30; ++y)
        for (int x = 10; x < 30; ++x) g.at(x, y) = 80.f;
    const TwoMeans tm = two_means_u8(g);
    REQUIRE_FALSE(tm.degenerate);
    REQUIRE(tm.mean_low == Catch::Approx(80).margin(2));
    REQUIRE(tm.mean_high == Catch::Approx(220).margin(2));
    REQUIRE(tm.threshold > 90);
    REQUIRE(tm.threshold < 210);

    GrayImage flat(16, 16, 33.f);
    REQUIRE(two_means_u8(flat).degenerate);
}
