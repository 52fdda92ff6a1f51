#pragma once
// Deterministic synthetic thin-film FoV generator with exact ground truth.
//
// Renders RBC disks with central pallor on a light background, parasites as
// purple chromatin plus blue cytoplasm (shape depending on stage/species),
// three distractor archetypes, per-channel gamma stain shift and a per-slice
// Gaussian blur schedule for the z-stack. Each FoV is rendered from its own
// derived RNG stream, so FoVs can be generated concurrently without
// affecting the output.

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinfilm/dataset.hpp"
#include "thinfilm/image.hpp"
#include "thinfilm/imgproc.hpp"
#include "thinfilm/parallel.hpp"
#include "thinfilm/rng.hpp"

namespace thinfilm::synth {

constexpr double kRbcsPerUl = 5e6;

struct SynthConfig {
    int width = 2048;
    int height = 1536;
    double px_per_um = kDefaultPixelsPerMicron;
    int fovs = 8;
    std::vector<double> blur_sigma_per_slice = {4.0, 2.5, 1.2, 0.3, 1.2, 2.5, 4.0};

    double rbc_density = 400.0;      // target RBCs per FoV
    double rbc_radius_px = 28.0;
    double clump_fraction = 0.0;     // fraction of RBCs rendered inside clumps
    double parasitemia_per_ul = 0.0;
    std::array<double, 4> species_mix = {1.0, 0.0, 0.0, 0.0};  // Pf, Pv, Po, Pm
    std::array<double, 3> stage_mix = {1.0, 0.0, 0.0};         // ring, transitional, late
    double applique_fraction = 0.12;  // rings rendered at the RBC rim
    double distractor_rate = 12.0;    // expected distractors per FoV
    std::array<double, 3> stain_gamma = {1.0, 1.0, 1.0};       // per-channel gamma
    double noise_amplitude = 2.0;

    std::uint64_t rng_seed = 0;
    std::string patient_id = "p0000";
    std::string slide_id = "s0";

    void validate() const {
        if (width < 32 || height < 32) throw std::invalid_argument("SynthConfig: canvas too small");
        if (blur_sigma_per_slice.empty()) throw std::invalid_argument("SynthConfig: need at least one slice");
        if (rbc_density <= 0) throw std::invalid_argument("SynthConfig: rbc_density must be > 0");
        if (clump_fraction < 0 || clump_fraction > 1) throw std::invalid_argument("SynthConfig: clump_fraction in [0,1]");
        auto near_one = [](double s) { return std::abs(s - 1.0) < 1e-6; };
        double sm = species_mix[0] + species_mix[1] + species_mix[2] + species_mix[3];
        double tm = stage_mix[0] + stage_mix[1] + stage_mix[2];
        if (parasitemia_per_ul > 0 && (!near_one(sm) || !near_one(tm))) {
            throw std::invalid_argument("SynthConfig: species/stage mixes must sum to 1");
        }
        if (parasitemia_per_ul < 0 || parasitemia_per_ul > kRbcsPerUl) {
            throw std::invalid_argument("SynthConfig: parasitemia out of range");
        }
    }
};

inline json config_to_json(const SynthConfig& c) {
    return json{{"width", c.width},
                {"height", c.height},
                {"px_per_um", c.px_per_um},
                {"fovs", c.fovs},
                {"blur_sigma_per_slice", c.blur_sigma_per_slice},
                {"rbc_density", c.rbc_density},
                {"rbc_radius_px", c.rbc_radius_px},
                {"clump_fraction", c.clump_fraction},
                {"parasitemia_per_ul", c.parasitemia_per_ul},
                {"species_mix", c.species_mix},
                {"stage_mix", c.stage_mix},
                {"applique_fraction", c.applique_fraction},
                {"distractor_rate", c.distractor_rate},
                {"stain_gamma", c.stain_gamma},
                {"noise_amplitude", c.noise_amplitude},
                {"rng_seed", c.rng_seed},
                {"patient_id", c.patient_id},
                {"slide_id", c.slide_id}};
}

inline SynthConfig config_from_json(const json& j) {
    SynthConfig c;
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.px_per_um = j.value("px_per_um", c.px_per_um);
    c.fovs = j.value("fovs", c.fovs);
    if (j.contains("blur_sigma_per_slice")) c.blur_sigma_per_slice = j["blur_sigma_per_slice"].get<std::vector<double>>();
    c.rbc_density = j.value("rbc_density", c.rbc_density);
    c.rbc_radius_px = j.value("rbc_radius_px", c.rbc_radius_px);
    c.clump_fraction = j.value("clump_fraction", c.clump_fraction);
    c.parasitemia_per_ul = j.value("parasitemia_per_ul", c.parasitemia_per_ul);
    if (j.contains("species_mix")) c.species_mix = j["species_mix"].get<std::array<double, 4>>();
    if (j.contains("stage_mix")) c.stage_mix = j["stage_mix"].get<std::array<double, 3>>();
    c.applique_fraction = j.value("applique_fraction", c.applique_fraction);
    c.distractor_rate = j.value("distractor_rate", c.distractor_rate);
    if (j.contains("stain_gamma")) c.stain_gamma = j["stain_gamma"].get<std::array<double, 3>>();
    c.noise_amplitude = j.value("noise_amplitude", c.noise_amplitude);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.patient_id = j.value("patient_id", c.patient_id);
    c.slide_id = j.value("slide_id", c.slide_id);
    return c;
}

// ---------------------------------------------------------------------------
// Painting onto float RGB planes

namespace detail {

struct Canvas {
    int w = 0, h = 0;
    std::vector<float> r, g, b;
    Canvas(int width, int height, float r0, float g0, float b0)
        : w(width), h(height),
          r(static_cast<std::size_t>(width) * height, r0),
          g(static_cast<std::size_t>(width) * height, g0),
          b(static_cast<std::size_t>(width) * height, b0) {}
    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * w + x; }
    void blend(int x, int y, float cov, const std::array<float, 3>& c) {
        if (x < 0 || y < 0 || x >= w || y >= h || cov <= 0.f) return;
        const std::size_t i = idx(x, y);
        r[i] += cov * (c[0] - r[i]);
        g[i] += cov * (c[1] - g[i]);
        b[i] += cov * (c[2] - b[i]);
    }
};

inline float soft_cov(double d, double radius) {
    return static_cast<float>(std::clamp((radius + 0.75 - d) / 1.5, 0.0, 1.0));
}

inline void paint_disk(Canvas& cv, double cx, double cy, double radius,
                       const std::array<float, 3>& color, float opacity) {
    const int x0 = std::max(0, static_cast<int>(cx - radius - 2));
    const int x1 = std::min(cv.w - 1, static_cast<int>(cx + radius + 2));
    const int y0 = std::max(0, static_cast<int>(cy - radius - 2));
    const int y1 = std::min(cv.h - 1, static_cast<int>(cy + radius + 2));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double d = std::hypot(x - cx, y - cy);
            cv.blend(x, y, soft_cov(d, radius) * opacity, color);
        }
    }
}

inline void paint_annulus(Canvas& cv, double cx, double cy, double r_mid, double half_width,
                          const std::array<float, 3>& color, float opacity) {
    const double outer = r_mid + half_width + 2;
    const int x0 = std::max(0, static_cast<int>(cx - outer));
    const int x1 = std::min(cv.w - 1, static_cast<int>(cx + outer));
    const int y0 = std::max(0, static_cast<int>(cy - outer));
    const int y1 = std::min(cv.h - 1, static_cast<int>(cy + outer));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double d = std::abs(std::hypot(x - cx, y - cy) - r_mid);
            cv.blend(x, y, soft_cov(d, half_width) * opacity, color);
        }
    }
}

// Irregular blob: disk whose radius is modulated by two angular harmonics.
inline void paint_blob(Canvas& cv, double cx, double cy, double base_r,
                       double a2, double a3, double phi2, double phi3,
                       const std::array<float, 3>& color, float opacity) {
    const double rmax = base_r * (1.0 + std::abs(a2) + std::abs(a3)) + 2;
    const int x0 = std::max(0, static_cast<int>(cx - rmax));
    const int x1 = std::min(cv.w - 1, static_cast<int>(cx + rmax));
    const int y0 = std::max(0, static_cast<int>(cy - rmax));
    const int y1 = std::min(cv.h - 1, static_cast<int>(cy + rmax));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double d = std::hypot(dx, dy);
            const double th = std::atan2(dy, dx);
            const double r = base_r * (1.0 + a2 * std::cos(2 * th + phi2) + a3 * std::cos(3 * th + phi3));
            cv.blend(x, y, soft_cov(d, r) * opacity, color);
        }
    }
}

// Curved capsule along a quadratic Bezier arc; used for crescent gametocytes.
inline void paint_arc_capsule(Canvas& cv, double x0p, double y0p, double x1p, double y1p,
                              double bulge, double thickness,
                              const std::array<float, 3>& color, float opacity) {
    const double mx = 0.5 * (x0p + x1p), my = 0.5 * (y0p + y1p);
    double nx = -(y1p - y0p), ny = x1p - x0p;
    const double nl = std::hypot(nx, ny);
    if (nl > 1e-9) {
        nx /= nl;
        ny /= nl;
    }
    const double cxp = mx + nx * 2 * bulge, cyp = my + ny * 2 * bulge;
    constexpr int kSamples = 25;
    std::array<std::pair<double, double>, kSamples> pts;
    for (int i = 0; i < kSamples; ++i) {
        const double t = static_cast<double>(i) / (kSamples - 1);
        const double u = 1.0 - t;
        pts[i] = {u * u * x0p + 2 * u * t * cxp + t * t * x1p,
                  u * u * y0p + 2 * u * t * cyp + t * t * y1p};
    }
    double bx0 = pts[0].first, bx1 = pts[0].first, by0 = pts[0].second, by1 = pts[0].second;
    for (const auto& p : pts) {
        bx0 = std::min(bx0, p.first);
        bx1 = std::max(bx1, p.first);
        by0 = std::min(by0, p.second);
        by1 = std::max(by1, p.second);
    }
    const double hw = 0.5 * thickness;
    const int px0 = std::max(0, static_cast<int>(bx0 - hw - 2));
    const int px1 = std::min(cv.w - 1, static_cast<int>(bx1 + hw + 2));
    const int py0 = std::max(0, static_cast<int>(by0 - hw - 2));
    const int py1 = std::min(cv.h - 1, static_cast<int>(by1 + hw + 2));
    for (int y = py0; y <= py1; ++y) {
        for (int x = px0; x <= px1; ++x) {
            double dmin = 1e30;
            for (const auto& p : pts) {
                dmin = std::min(dmin, std::hypot(x - p.first, y - p.second));
            }
            cv.blend(x, y, soft_cov(dmin, hw) * opacity, color);
        }
    }
}

struct PlacedRbc {
    double cx = 0.0, cy = 0.0, radius = 0.0;
    bool is_single = true;
    bool touches_border = false;
};

// Stain palette in 8-bit units, before the per-channel gamma shift.
// The RBC body carries enough green that its R*B/G^2 projection stays below
// the background level across the whole stain-gamma range, mirroring how
// Giemsa-stained RBCs (pink/green/gray) are suppressed by that projection.
constexpr std::array<float, 3> kBackground = {232.f, 228.f, 230.f};
constexpr std::array<float, 3> kRbcBody = {205.f, 185.f, 120.f};
constexpr std::array<float, 3> kChromatin = {135.f, 55.f, 160.f};
constexpr std::array<float, 3> kCytoplasm = {95.f, 110.f, 185.f};
constexpr std::array<float, 3> kLateBody = {120.f, 85.f, 175.f};
constexpr std::array<float, 3> kPlatelet = {155.f, 95.f, 175.f};
constexpr std::array<float, 3> kWbcNucleus = {110.f, 50.f, 135.f};
constexpr std::array<float, 3> kSpeck = {125.f, 60.f, 145.f};

}  // namespace detail

struct FovRender {
    std::vector<ColorImage> slices;
    std::vector<GtRbc> rbcs;
    std::vector<GtObject> objects;
    std::vector<Annotation> annotations;
};

// Render one FoV from a derived RNG stream.
inline FovRender render_fov(const SynthConfig& cfg, int fov_index) {
    cfg.validate();
    Rng rng(derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(fov_index)));
    const int w = cfg.width, h = cfg.height;
    detail::Canvas cv(w, h, detail::kBackground[0], detail::kBackground[1], detail::kBackground[2]);
    FovRender out;

    // --- place RBCs -------------------------------------------------------
    std::vector<detail::PlacedRbc> cells;
    const int total_rbcs = std::max(1, static_cast<int>(std::lround(cfg.rbc_density)));
    const int clumped_target = static_cast<int>(std::lround(cfg.clump_fraction * total_rbcs));
    const double base_r = cfg.rbc_radius_px;

    auto far_from_all = [&](double x, double y, double r, double gap) {
        for (const auto& c : cells) {
            const double d = std::hypot(x - c.cx, y - c.cy);
            if (d < r + c.radius + gap) return false;
        }
        return true;
    };
    auto rand_center = [&](double r) {
        const double m = 0.6 * r;
        return std::pair<double, double>{rng.uniform(m, w - 1 - m), rng.uniform(m, h - 1 - m)};
    };

    int clumped_placed = 0;
    while (clumped_placed + 2 < clumped_target) {
        const int k = rng.uniform_int(3, 8);
        detail::PlacedRbc first;
        first.radius = base_r * rng.uniform(0.9, 1.1);
        bool seeded = false;
        for (int attempt = 0; attempt < 40 && !seeded; ++attempt) {
            auto [x, y] = rand_center(first.radius);
            if (far_from_all(x, y, first.radius, 3.0 + 2.6 * base_r)) {  // room for the chain
                first.cx = x;
                first.cy = y;
                seeded = true;
            }
        }
        if (!seeded) break;
        first.is_single = false;
        std::vector<detail::PlacedRbc> chain{first};
        for (int i = 1; i < k; ++i) {
            const auto& prev = chain.back();
            detail::PlacedRbc nxt;
            nxt.radius = base_r * rng.uniform(0.9, 1.1);
            const double ang = rng.uniform(0, 2 * std::numbers::pi);
            const double dist = (prev.radius + nxt.radius) * rng.uniform(0.55, 0.8);
            nxt.cx = std::clamp(prev.cx + dist * std::cos(ang), 0.6 * nxt.radius, w - 1 - 0.6 * nxt.radius);
            nxt.cy = std::clamp(prev.cy + dist * std::sin(ang), 0.6 * nxt.radius, h - 1 - 0.6 * nxt.radius);
            nxt.is_single = false;
            chain.push_back(nxt);
        }
        for (auto& c : chain) cells.push_back(c);
        clumped_placed += k;
    }

    const int singles_target = total_rbcs - clumped_placed;
    for (int i = 0; i < singles_target; ++i) {
        detail::PlacedRbc c;
        c.radius = base_r * rng.uniform(0.9, 1.1);
        for (int attempt = 0; attempt < 40; ++attempt) {
            auto [x, y] = rand_center(c.radius);
            if (far_from_all(x, y, c.radius, 3.0)) {
                c.cx = x;
                c.cy = y;
                c.is_single = true;
                cells.push_back(c);
                break;
            }
        }
    }

    // --- render RBCs -------------------------------------------------------
    for (auto& c : cells) {
        c.touches_border = (c.cx < c.radius || c.cy < c.radius ||
                            c.cx > w - 1 - c.radius || c.cy > h - 1 - c.radius);
        const float jit = static_cast<float>(rng.uniform(-8, 8));
        std::array<float, 3> body = {detail::kRbcBody[0] + jit, detail::kRbcBody[1] + jit,
                                     detail::kRbcBody[2] + jit};
        detail::paint_disk(cv, c.cx, c.cy, c.radius, body, 1.f);
        // Central pallor.
        const double pallor_r = c.radius * rng.uniform(0.35, 0.5);
        const float lift = static_cast<float>(rng.uniform(22, 34));
        std::array<float, 3> pall = {body[0] + lift, body[1] + lift, body[2] + lift};
        detail::paint_disk(cv, c.cx, c.cy, pallor_r, pall, 0.9f);
        GtRbc gt;
        gt.cx = c.cx;
        gt.cy = c.cy;
        gt.is_single = c.is_single;
        gt.touches_border = c.touches_border;
        out.rbcs.push_back(gt);
    }

    // --- parasites ---------------------------------------------------------
    const double p_parasite = cfg.parasitemia_per_ul / kRbcsPerUl;
    const double scale = base_r / 28.0;
    for (const auto& c : cells) {
        if (!rng.bernoulli(p_parasite)) continue;
        const std::size_t sp_idx = rng.categorical({cfg.species_mix[0], cfg.species_mix[1],
                                                    cfg.species_mix[2], cfg.species_mix[3]});
        const auto species = static_cast<Species>(sp_idx);
        const std::size_t st_idx = rng.categorical({cfg.stage_mix[0], cfg.stage_mix[1], cfg.stage_mix[2]});
        const Stage stage = st_idx == 0 ? Stage::ring : (st_idx == 1 ? Stage::transitional : Stage::late);

        double ann_cx = c.cx, ann_cy = c.cy;
        if (stage == Stage::ring) {
            const bool applique = rng.bernoulli(cfg.applique_fraction);
            const double off = applique ? c.radius * rng.uniform(0.8, 0.92)
                                        : c.radius * rng.uniform(0.0, 0.35);
            const double oa = rng.uniform(0, 2 * std::numbers::pi);
            const double px = c.cx + off * std::cos(oa), py = c.cy + off * std::sin(oa);
            const double ring_r = c.radius * rng.uniform(0.3, 0.45);
            detail::paint_annulus(cv, px, py, ring_r, std::max(1.2, 0.06 * c.radius),
                                  detail::kCytoplasm, 0.75f);
            const int ndots = rng.bernoulli(0.55) ? 2 : 1;
            const double th0 = rng.uniform(0, 2 * std::numbers::pi);
            const double dth = rng.uniform(0.6, 1.2);
            double sx = 0, sy = 0;
            std::vector<std::pair<double, double>> dots;
            for (int d = 0; d < ndots; ++d) {
                const double th = th0 + d * dth;
                dots.emplace_back(px + ring_r * std::cos(th), py + ring_r * std::sin(th));
            }
            // Keep the chromatin centroid inside the host cell so the
            // quantitation-mask margin always captures applique forms.
            for (auto& [dx, dy] : dots) {
                sx += dx;
                sy += dy;
            }
            sx /= ndots;
            sy /= ndots;
            const double dc = std::hypot(sx - c.cx, sy - c.cy);
            if (dc > c.radius - 2.0) {
                const double pull = (dc - (c.radius - 2.0)) / dc;
                for (auto& [dx, dy] : dots) {
                    dx -= (sx - c.cx) * pull;
                    dy -= (sy - c.cy) * pull;
                }
                sx -= (sx - c.cx) * pull;
                sy -= (sy - c.cy) * pull;
            }
            for (const auto& [dx, dy] : dots) {
                detail::paint_disk(cv, dx, dy, rng.uniform(4.0, 7.0) * scale, detail::kChromatin, 0.95f);
            }
            ann_cx = sx;
            ann_cy = sy;
        } else if (stage == Stage::transitional) {
            const double off = c.radius * rng.uniform(0.0, 0.3);
            const double oa = rng.uniform(0, 2 * std::numbers::pi);
            const double px = c.cx + off * std::cos(oa), py = c.cy + off * std::sin(oa);
            const double body_r = c.radius * rng.uniform(0.32, 0.42);
            detail::paint_blob(cv, px, py, body_r, rng.uniform(0, 0.2), rng.uniform(0, 0.2),
                               rng.uniform(0, 6.28), rng.uniform(0, 6.28), detail::kCytoplasm, 0.65f);
            double sx = 0, sy = 0;
            for (int d = 0; d < 2; ++d) {
                const double ang = rng.uniform(0, 2 * std::numbers::pi);
                const double rr = rng.uniform(0, 0.5) * body_r;
                const double dx = px + rr * std::cos(ang), dy = py + rr * std::sin(ang);
                detail::paint_disk(cv, dx, dy, rng.uniform(4.0, 7.0) * scale, detail::kChromatin, 0.9f);
                sx += dx;
                sy += dy;
            }
            ann_cx = sx / 2;
            ann_cy = sy / 2;
        } else {
            // Late stage; morphology differs by species.
            const double px = c.cx, py = c.cy;
            switch (species) {
                case Species::Pf: {  // crescent gametocyte
                    const double ang = rng.uniform(0, 2 * std::numbers::pi);
                    const double half_len = c.radius * rng.uniform(0.75, 0.95);
                    const double dxu = std::cos(ang), dyu = std::sin(ang);
                    detail::paint_arc_capsule(cv, px - dxu * half_len, py - dyu * half_len,
                                              px + dxu * half_len, py + dyu * half_len,
                                              c.radius * rng.uniform(0.3, 0.42),
                                              c.radius * rng.uniform(0.26, 0.34), detail::kLateBody, 0.88f);
                    detail::paint_disk(cv, px, py, rng.uniform(4.0, 6.0) * scale, detail::kChromatin, 0.9f);
                    break;
                }
                case Species::Pv: {  // large ameboid trophozoite/gametocyte
                    const double body_r = c.radius * rng.uniform(0.62, 0.78);
                    detail::paint_blob(cv, px, py, body_r, rng.uniform(0.1, 0.25), rng.uniform(0.05, 0.2),
                                       rng.uniform(0, 6.28), rng.uniform(0, 6.28), detail::kLateBody, 0.82f);
                    const int nd = rng.uniform_int(2, 4);
                    for (int d = 0; d < nd; ++d) {
                        const double angd = rng.uniform(0, 2 * std::numbers::pi);
                        const double rr = rng.uniform(0, 0.45) * body_r;
                        detail::paint_disk(cv, px + rr * std::cos(angd), py + rr * std::sin(angd),
                                           rng.uniform(3.5, 6.0) * scale, detail::kChromatin, 0.9f);
                    }
                    break;
                }
                case Species::Po: {  // compact oval trophozoite
                    const double body_r = c.radius * rng.uniform(0.45, 0.58);
                    detail::paint_blob(cv, px, py, body_r, 0.3, 0.05, rng.uniform(0, 6.28),
                                       rng.uniform(0, 6.28), detail::kLateBody, 0.85f);
                    for (int d = 0; d < 2; ++d) {
                        const double angd = rng.uniform(0, 2 * std::numbers::pi);
                        const double rr = rng.uniform(0, 0.4) * body_r;
                        detail::paint_disk(cv, px + rr * std::cos(angd), py + rr * std::sin(angd),
                                           rng.uniform(3.5, 5.5) * scale, detail::kChromatin, 0.9f);
                    }
                    break;
                }
                default: {  // Pm schizont rosette
                    const double body_r = c.radius * rng.uniform(0.4, 0.5);
                    detail::paint_disk(cv, px, py, body_r, detail::kCytoplasm, 0.5f);
                    const int nd = rng.uniform_int(6, 11);
                    const double rosette_r = body_r * rng.uniform(0.5, 0.7);
                    const double th0 = rng.uniform(0, 2 * std::numbers::pi);
                    for (int d = 0; d < nd; ++d) {
                        const double th = th0 + d * 2 * std::numbers::pi / nd;
                        detail::paint_disk(cv, px + rosette_r * std::cos(th), py + rosette_r * std::sin(th),
                                           rng.uniform(3.0, 5.0) * scale, detail::kChromatin, 0.92f);
                    }
                    break;
                }
            }
        }

        GtObject o;
        o.cx = ann_cx;
        o.cy = ann_cy;
        o.stage = stage;
        o.species = species;
        o.is_parasite = true;
        o.in_single_rbc = c.is_single;
        o.host_touches_border = c.touches_border;
        o.fov_index = fov_index;
        out.objects.push_back(o);

        Annotation a;
        a.cx = ann_cx;
        a.cy = ann_cy;
        a.stage = stage;
        a.species = species;
        a.fov_index = fov_index;
        out.annotations.push_back(a);
    }

    // --- distractors --------------------------------------------------------
    const int n_distractors = rng.poisson(cfg.distractor_rate);
    for (int i = 0; i < n_distractors; ++i) {
        const double x = rng.uniform(5, w - 6), y = rng.uniform(5, h - 6);
        const std::size_t kind = rng.categorical({0.45, 0.40, 0.15});
        if (kind == 0) {  // precipitate speck
            detail::paint_blob(cv, x, y, rng.uniform(2.0, 4.0) * scale + 1.0, 0.35, 0.2,
                               rng.uniform(0, 6.28), rng.uniform(0, 6.28), detail::kSpeck, 0.95f);
        } else if (kind == 1) {  // platelet with fuzzy halo
            const double r = rng.uniform(5.0, 9.0) * scale;
            detail::paint_disk(cv, x, y, r * 1.6, detail::kPlatelet, 0.25f);
            detail::paint_disk(cv, x, y, r, detail::kPlatelet, 0.85f);
        } else {  // WBC nucleus lobes
            const int lobes = rng.uniform_int(2, 4);
            double lx = x, ly = y;
            for (int l = 0; l < lobes; ++l) {
                detail::paint_blob(cv, lx, ly, rng.uniform(10.0, 16.0) * scale, 0.2, 0.1,
                                   rng.uniform(0, 6.28), rng.uniform(0, 6.28), detail::kWbcNucleus, 0.95f);
                const double ang = rng.uniform(0, 2 * std::numbers::pi);
                lx += std::cos(ang) * rng.uniform(12.0, 20.0) * scale;
                ly += std::sin(ang) * rng.uniform(12.0, 20.0) * scale;
            }
        }
        GtObject o;
        o.cx = x;
        o.cy = y;
        o.is_parasite = false;
        o.fov_index = fov_index;
        out.objects.push_back(o);
    }

    // --- noise, stain gamma, quantization ----------------------------------
    ColorImage sharp(w, h);
    sharp.px_per_um = cfg.px_per_um;
    std::array<std::vector<float>*, 3> planes = {&cv.r, &cv.g, &cv.b};
    std::array<float, 256> gamma_lut[3];
    for (int ch = 0; ch < 3; ++ch) {
        for (int v = 0; v < 256; ++v) {
            gamma_lut[ch][v] = static_cast<float>(255.0 * std::pow(v / 255.0, cfg.stain_gamma[ch]));
        }
    }
    const double na = cfg.noise_amplitude;
    for (std::size_t i = 0; i < sharp.pixel_count(); ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            float v = (*planes[ch])[i] + static_cast<float>(rng.uniform(-na, na));
            v = std::clamp(v, 0.f, 255.f);
            // Gamma via LUT with linear interpolation between 8-bit knots.
            const int lo = static_cast<int>(v);
            const float frac = v - lo;
            const float gl = gamma_lut[ch][lo];
            const float gh = gamma_lut[ch][std::min(lo + 1, 255)];
            sharp.rgb[i * 3 + ch] = clamp_u8(gl + frac * (gh - gl));
        }
    }

    out.slices.reserve(cfg.blur_sigma_per_slice.size());
    for (double sigma : cfg.blur_sigma_per_slice) {
        out.slices.push_back(gaussian_blur(sharp, sigma));
        out.slices.back().px_per_um = cfg.px_per_um;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sample assembly

inline void finalize_ground_truth(const SynthConfig& cfg, SampleRecord& sample, GroundTruth& gt) {
    std::int64_t countable = 0;
    for (const auto& r : gt.rbcs)
        if (r.is_single && !r.touches_border) ++countable;
    std::int64_t parasites_countable = 0;
    for (const auto& o : gt.objects)
        if (o.is_parasite && o.in_countable_rbc()) ++parasites_countable;
    gt.rbc_count = countable;
    gt.parasitemia_per_ul = countable > 0
        ? kRbcsPerUl * static_cast<double>(parasites_countable) / static_cast<double>(countable)
        : 0.0;
    if (cfg.parasitemia_per_ul > 0) {
        int best = 0;
        for (int i = 1; i < 4; ++i)
            if (cfg.species_mix[i] > cfg.species_mix[best]) best = i;
        gt.species = static_cast<Species>(best);
    }
    sample.ground_truth = gt;
}

// True parasitemia restricted to a stage subset, from the ground-truth lists.
inline double gt_stage_parasitemia(const GroundTruth& gt, Stage stage) {
    if (!gt.rbc_count || *gt.rbc_count == 0) return 0.0;
    std::int64_t n = 0;
    for (const auto& o : gt.objects)
        if (o.is_parasite && o.stage == stage && o.in_countable_rbc()) ++n;
    return kRbcsPerUl * static_cast<double>(n) / static_cast<double>(*gt.rbc_count);
}

// Generate a whole sample in memory. Deterministic in cfg.rng_seed even when
// rendered with several jobs, because every FoV has its own stream.
inline SampleRecord generate_sample(const SynthConfig& cfg, int jobs = 1) {
    cfg.validate();
    SampleRecord sample;
    sample.patient_id = cfg.patient_id;
    sample.slide_id = cfg.slide_id;
    sample.provenance = "synthetic";
    GroundTruth gt;
    std::vector<FovRender> renders(cfg.fovs);
    parallel_for(static_cast<std::size_t>(cfg.fovs), jobs,
                 [&](std::size_t f) { renders[f] = render_fov(cfg, static_cast<int>(f)); });
    for (int f = 0; f < cfg.fovs; ++f) {
        auto& r = renders[f];
        FovStack fov;
        fov.fov_index = f;
        fov.slide_id = cfg.slide_id;
        fov.slices_memory = std::move(r.slices);
        sample.fovs.push_back(std::move(fov));
        for (auto& a : r.annotations) sample.annotations.push_back(a);
        for (auto& o : r.objects) gt.objects.push_back(o);
        for (auto& c : r.rbcs) {
            gt.rbcs.push_back(c);
            gt.rbcs_by_fov[f].push_back(c);
        }
    }
    finalize_ground_truth(cfg, sample, gt);
    return sample;
}

// Generate a sample straight to disk, releasing each FoV after writing.
inline SampleRecord generate_sample_to_dir(const fs::path& root, const SynthConfig& cfg, int jobs = 1) {
    cfg.validate();
    const fs::path dir = root / cfg.patient_id / cfg.slide_id;
    fs::create_directories(dir);

    SampleRecord sample;
    sample.patient_id = cfg.patient_id;
    sample.slide_id = cfg.slide_id;
    sample.provenance = "synthetic";
    sample.root_dir = dir.string();
    GroundTruth gt;
    sample.fovs.resize(cfg.fovs);
    std::vector<FovRender> gt_parts(cfg.fovs);

    parallel_for(static_cast<std::size_t>(cfg.fovs), jobs, [&](std::size_t f) {
        FovRender r = render_fov(cfg, static_cast<int>(f));
        const std::string fov_dir = "fov_" + std::to_string(f);
        fs::create_directories(dir / fov_dir);
        FovStack fov;
        fov.fov_index = static_cast<int>(f);
        fov.slide_id = cfg.slide_id;
        for (std::size_t k = 0; k < r.slices.size(); ++k) {
            const fs::path p = dir / fov_dir / ("z" + std::to_string(k) + ".png");
            write_png(p.string(), r.slices[k]);
            fov.slice_paths.push_back(p.string());
        }
        r.slices.clear();
        sample.fovs[f] = std::move(fov);
        gt_parts[f] = std::move(r);
    });

    for (int f = 0; f < cfg.fovs; ++f) {
        for (auto& a : gt_parts[f].annotations) sample.annotations.push_back(a);
        for (auto& o : gt_parts[f].objects) gt.objects.push_back(o);
        for (auto& c : gt_parts[f].rbcs) {
            gt.rbcs.push_back(c);
            gt.rbcs_by_fov[f].push_back(c);
        }
    }
    finalize_ground_truth(cfg, sample, gt);

    json manifest;
    manifest["schema_version"] = 1;
    manifest["patient_id"] = sample.patient_id;
    manifest["slide_id"] = sample.slide_id;
    manifest["provenance"] = sample.provenance;
    json fovs = json::array();
    for (const auto& fov : sample.fovs) {
        fovs.push_back({{"index", fov.fov_index},
                        {"dir", "fov_" + std::to_string(fov.fov_index)},
                        {"slices", static_cast<int>(fov.slice_count())}});
    }
    manifest["fovs"] = std::move(fovs);
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";

    std::ofstream ann(dir / "annotations.jsonl");
    for (const auto& a : sample.annotations) {
        ann << json{{"cx", a.cx}, {"cy", a.cy}, {"stage", to_string(a.stage)},
                    {"species", to_string(a.species)}, {"fov", a.fov_index}}
                   .dump()
            << "\n";
    }
    std::ofstream(dir / "ground_truth.json") << ground_truth_to_json(*sample.ground_truth).dump() << "\n";
    std::ofstream(dir / "synth_config.json") << config_to_json(cfg).dump(2) << "\n";
    return sample;
}

// ---------------------------------------------------------------------------
// Cohorts

struct CohortGroup {
    int count = 0;
    double parasitemia_lo = 0.0, parasitemia_hi = 0.0;
    Species species = Species::Pf;
    std::array<double, 3> stage_mix = {1.0, 0.0, 0.0};
};

struct CohortConfig {
    SynthConfig base;                        // canvas, fovs, blur schedule, density
    std::vector<CohortGroup> groups;
    std::array<double, 2> clump_range = {0.0, 0.1};
    std::array<double, 2> distractor_range = {8.0, 16.0};
    std::array<double, 2> stain_gamma_range = {0.85, 1.2};
    std::array<double, 2> noise_range = {1.5, 2.5};
};

inline json cohort_to_json(const CohortConfig& c) {
    json groups = json::array();
    for (const auto& g : c.groups) {
        groups.push_back({{"count", g.count},
                          {"parasitemia_lo", g.parasitemia_lo},
                          {"parasitemia_hi", g.parasitemia_hi},
                          {"species", to_string(g.species)},
                          {"stage_mix", g.stage_mix}});
    }
    return json{{"base", config_to_json(c.base)},
                {"groups", std::move(groups)},
                {"clump_range", c.clump_range},
                {"distractor_range", c.distractor_range},
                {"stain_gamma_range", c.stain_gamma_range},
                {"noise_range", c.noise_range}};
}

inline CohortConfig cohort_from_json(const json& j) {
    CohortConfig c;
    if (j.contains("base")) c.base = config_from_json(j["base"]);
    if (j.contains("groups")) {
        for (const auto& jg : j["groups"]) {
            CohortGroup g;
            g.count = jg.at("count").get<int>();
            g.parasitemia_lo = jg.value("parasitemia_lo", 0.0);
            g.parasitemia_hi = jg.value("parasitemia_hi", 0.0);
            g.species = species_from_string(jg.value("species", std::string("Pf")));
            if (jg.contains("stage_mix")) g.stage_mix = jg["stage_mix"].get<std::array<double, 3>>();
            c.groups.push_back(g);
        }
    }
    if (j.contains("clump_range")) c.clump_range = j["clump_range"].get<std::array<double, 2>>();
    if (j.contains("distractor_range")) c.distractor_range = j["distractor_range"].get<std::array<double, 2>>();
    if (j.contains("stain_gamma_range")) c.stain_gamma_range = j["stain_gamma_range"].get<std::array<double, 2>>();
    if (j.contains("noise_range")) c.noise_range = j["noise_range"].get<std::array<double, 2>>();
    return c;
}

// Draw the per-sample configs. Sample i gets seed derive_seed(seed, i); the
// parameter draws use a separate stream so adding fields never shifts seeds.
inline std::vector<SynthConfig> generate_cohort_configs(const CohortConfig& cohort, std::uint64_t seed) {
    std::vector<SynthConfig> configs;
    int sample_index = 0;
    for (const auto& g : cohort.groups) {
        for (int i = 0; i < g.count; ++i, ++sample_index) {
            Rng draw(derive_seed(seed, 1000000ull + static_cast<std::uint64_t>(sample_index)));
            SynthConfig cfg = cohort.base;
            cfg.clump_fraction = draw.uniform(cohort.clump_range[0], cohort.clump_range[1]);
            cfg.distractor_rate = draw.uniform(cohort.distractor_range[0], cohort.distractor_range[1]);
            for (int ch = 0; ch < 3; ++ch) {
                cfg.stain_gamma[ch] = draw.uniform(cohort.stain_gamma_range[0], cohort.stain_gamma_range[1]);
            }
            cfg.noise_amplitude = draw.uniform(cohort.noise_range[0], cohort.noise_range[1]);
            cfg.parasitemia_per_ul = g.parasitemia_lo >= g.parasitemia_hi
                ? g.parasitemia_lo
                : draw.uniform(g.parasitemia_lo, g.parasitemia_hi);
            cfg.species_mix = {0, 0, 0, 0};
            cfg.species_mix[static_cast<int>(g.species)] = 1.0;
            cfg.stage_mix = g.stage_mix;
            cfg.rng_seed = derive_seed(seed, static_cast<std::uint64_t>(sample_index));
            char pid[16];
            std::snprintf(pid, sizeof(pid), "p%04d", sample_index);
            cfg.patient_id = pid;
            cfg.slide_id = "s0";
            configs.push_back(cfg);
        }
    }
    return configs;
}

inline std::vector<SampleRecord> generate_cohort(const CohortConfig& cohort, std::uint64_t seed, int jobs = 1) {
    std::vector<SampleRecord> samples;
    for (const auto& cfg : generate_cohort_configs(cohort, seed)) {
        samples.push_back(generate_sample(cfg, jobs));
    }
    return samples;
}

}  // namespace thinfilm::synth
