#pragma once
// Candidate object detection: the purple-highlighting grayscale projection
// R*B/(G^2+eps), dynamic local thresholding, connected components with an
// area gate, and cross-slice deduplication keeping the best-focus instance.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "thinfilm/image.hpp"
#include "thinfilm/imgproc.hpp"

namespace thinfilm::detect {

struct DetectorConfig {
    double epsilon = 1.0;            // Eq-2 stabilizer, 8-bit units
    int local_window = 31;           // odd
    double threshold_offset = 2.0;   // std devs above the local mean
    std::int64_t min_area = 12;      // px^2
    std::int64_t max_area = 2500;
    double cluster_radius = 8.0;     // cross-slice grouping distance
    int thumbnail_ring = 64;
    int thumbnail_late = 144;
};

struct BranchScores {
    double ring_filter = 0.0;
    double late_filter = 0.0;
    double ring_cnn = -1.0;   // -1 marks "not scored by this branch"
    double late_cnn = -1.0;
};

struct DetectedObject {
    double cx = 0.0, cy = 0.0;
    int fov_index = 0;
    int best_z = 0;
    double brenner = 0.0;
    std::int64_t area = 0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    ColorImage thumbnail_ring;   // 64x64 crop from the best-focus slice
    ColorImage thumbnail_late;   // 144x144 crop
    bool in_quant_mask = false;
    std::vector<double> features;
    bool features_degenerate = false;
    BranchScores scores;
    std::array<double, 13> species_probs{};
    bool has_species = false;
};

// Eq-2 projection: highlights purple (high R and B, low G), suppresses green.
inline GrayImage project_gray(const ColorImage& img, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("project_gray: epsilon must be > 0");
    GrayImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const double r = img.rgb[i * 3];
        const double g = img.rgb[i * 3 + 1];
        const double b = img.rgb[i * 3 + 2];
        out.v[i] = static_cast<float>(r * b / (g * g + epsilon));
    }
    return out;
}

struct Candidate {
    double cx = 0.0, cy = 0.0;
    std::int64_t area = 0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int slice = 0;
};

// Connected components of the thresholded image, gated by area.
inline std::vector<Candidate> extract_candidates(const Mask& mask, const DetectorConfig& cfg) {
    std::vector<Candidate> out;
    const Labeling lab = connected_components(mask);
    for (const auto& b : lab.blobs) {
        if (b.area < cfg.min_area || b.area > cfg.max_area) continue;
        Candidate c;
        c.cx = b.cx;
        c.cy = b.cy;
        c.area = b.area;
        c.x0 = b.x0;
        c.y0 = b.y0;
        c.x1 = b.x1;
        c.y1 = b.y1;
        out.push_back(c);
    }
    return out;
}

// Brenner focus score of the luminance patch around (cx, cy).
inline double patch_brenner(const ColorImage& img, double cx, double cy, int size) {
    const ColorImage patch = crop_centered(img, static_cast<int>(std::lround(cx)),
                                           static_cast<int>(std::lround(cy)), size);
    return brenner_score(luminance(patch));
}

// Greedy single-link clustering of per-slice candidates within the cluster
// radius; each cluster keeps the instance with the highest Brenner score.
// A spatial hash keeps the pairing near-linear.
inline std::vector<DetectedObject> dedupe_across_slices(const std::vector<Candidate>& candidates,
                                                        const std::vector<ColorImage>& slices,
                                                        const DetectorConfig& cfg,
                                                        int fov_index = 0) {
    const std::size_t n = candidates.size();
    std::vector<std::int32_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::int32_t>(i);
    std::function<std::int32_t(std::int32_t)> find = [&](std::int32_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    auto unite = [&](std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    };

    const double cell = std::max(cfg.cluster_radius, 1.0);
    std::unordered_map<std::int64_t, std::vector<std::int32_t>> grid;
    auto key = [&](double x, double y) {
        return (static_cast<std::int64_t>(std::floor(x / cell)) << 21) ^
               static_cast<std::int64_t>(std::floor(y / cell));
    };
    for (std::size_t i = 0; i < n; ++i) {
        grid[key(candidates[i].cx, candidates[i].cy)].push_back(static_cast<std::int32_t>(i));
    }
    const double r2 = cfg.cluster_radius * cfg.cluster_radius;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = candidates[i];
        for (int gy = -1; gy <= 1; ++gy) {
            for (int gx = -1; gx <= 1; ++gx) {
                const auto it = grid.find(key(a.cx + gx * cell, a.cy + gy * cell));
                if (it == grid.end()) continue;
                for (auto jj : it->second) {
                    if (static_cast<std::size_t>(jj) <= i) continue;
                    const auto& b = candidates[jj];
                    const double dx = a.cx - b.cx, dy = a.cy - b.cy;
                    if (dx * dx + dy * dy <= r2) unite(static_cast<std::int32_t>(i), jj);
                }
            }
        }
    }

    // Pick the best-focus member of each cluster.
    std::unordered_map<std::int32_t, std::pair<std::int32_t, double>> winners;  // root -> (idx, brenner)
    std::vector<double> brenner(n);
    for (std::size_t i = 0; i < n; ++i) {
        brenner[i] = patch_brenner(slices[candidates[i].slice], candidates[i].cx, candidates[i].cy,
                                   cfg.thumbnail_ring);
        const auto root = find(static_cast<std::int32_t>(i));
        auto it = winners.find(root);
        if (it == winners.end() || brenner[i] > it->second.second) {
            winners[root] = {static_cast<std::int32_t>(i), brenner[i]};
        }
    }

    std::vector<std::int32_t> picked;
    picked.reserve(winners.size());
    for (const auto& [root, w] : winners) picked.push_back(w.first);
    std::sort(picked.begin(), picked.end());  // deterministic output order

    std::vector<DetectedObject> out;
    out.reserve(picked.size());
    for (auto idx : picked) {
        const auto& c = candidates[idx];
        DetectedObject o;
        o.cx = c.cx;
        o.cy = c.cy;
        o.fov_index = fov_index;
        o.best_z = c.slice;
        o.brenner = brenner[idx];
        o.area = c.area;
        o.x0 = c.x0;
        o.y0 = c.y0;
        o.x1 = c.x1;
        o.y1 = c.y1;
        const int icx = static_cast<int>(std::lround(c.cx));
        const int icy = static_cast<int>(std::lround(c.cy));
        o.thumbnail_ring = crop_centered(slices[c.slice], icx, icy, cfg.thumbnail_ring);
        o.thumbnail_late = crop_centered(slices[c.slice], icx, icy, cfg.thumbnail_late);
        out.push_back(std::move(o));
    }
    return out;
}

// Full per-FoV detection across a z-stack.
inline std::vector<DetectedObject> detect_stack(const std::vector<ColorImage>& slices,
                                                const DetectorConfig& cfg, int fov_index = 0) {
    std::vector<Candidate> all;
    for (std::size_t k = 0; k < slices.size(); ++k) {
        const GrayImage gray = project_gray(slices[k], cfg.epsilon);
        const Mask mask = local_threshold(gray, cfg.local_window, cfg.threshold_offset);
        for (auto c : extract_candidates(mask, cfg)) {
            c.slice = static_cast<int>(k);
            all.push_back(c);
        }
    }
    return dedupe_across_slices(all, slices, cfg, fov_index);
}

// Flag objects whose center lies inside the quantitation mask.
inline void mark_in_quant_mask(std::vector<DetectedObject>& objects, const Mask& mask) {
    for (auto& o : objects) {
        const int x = static_cast<int>(std::lround(o.cx));
        const int y = static_cast<int>(std::lround(o.cy));
        o.in_quant_mask = mask.inside(x, y) && mask.at(x, y) != 0;
    }
}

}  // namespace thinfilm::detect
