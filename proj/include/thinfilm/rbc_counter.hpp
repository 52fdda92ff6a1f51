#pragma once
// RBC counting: two-means foreground clustering, blob size classification
// into singles/doubles/clumps, the quantitation mask (singles and doubles,
// holes filled, dilated by a margin), and the running 20k-singles tally.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "thinfilm/image.hpp"
#include "thinfilm/imgproc.hpp"

namespace thinfilm::rbc {

struct RbcConfig {
    double mask_margin_px = 6.0;      // dilation of the quantitation mask
    double single_low = 0.5;          // single iff area in [low*A, high*A]
    double single_high = 1.5;
    double double_high = 2.5;         // double iff area in (single_high*A, double_high*A]
    std::int64_t min_blob_area = 40;  // speck guard, well below an RBC
};

struct RbcCensus {
    std::int64_t n_single = 0;
    std::int64_t n_double = 0;
    std::int64_t n_clumped_blobs = 0;
    Mask quantitation_mask;
    std::vector<std::int64_t> blob_areas;
    double median_area = 0.0;
    bool degenerate = false;  // single-cluster image, nothing counted

    std::int64_t counted_rbcs() const { return n_single + 2 * n_double; }
};

struct RbcTally {
    std::int64_t cumulative = 0;
    std::int64_t target = 20000;
};

// Foreground blobs by 2-means on luminance (RBCs stain darker than the
// background). Border-touching blobs are discarded to avoid partial cells.
inline std::pair<Mask, std::vector<Blob>> detect_rbc_blobs(const ColorImage& img,
                                                           std::int64_t min_blob_area = 40) {
    const GrayImage gray = luminance(img);
    const TwoMeans tm = two_means_u8(gray);
    Mask fg(img.width, img.height);
    if (tm.degenerate) return {fg, {}};
    for (std::size_t i = 0; i < gray.v.size(); ++i) {
        fg.v[i] = gray.v[i] < tm.threshold ? 1 : 0;
    }
    Labeling lab = connected_components(fg);
    std::vector<Blob> blobs;
    std::vector<char> keep(lab.blobs.size() + 1, 0);
    for (const auto& b : lab.blobs) {
        if (b.touches_border || b.area < min_blob_area) continue;
        keep[b.label] = 1;
        blobs.push_back(b);
    }
    // The returned mask keeps only the retained blobs.
    Mask kept(img.width, img.height);
    for (std::size_t i = 0; i < kept.v.size(); ++i) {
        const auto l = lab.labels[i];
        kept.v[i] = (l && keep[l]) ? 1 : 0;
    }
    return {kept, blobs};
}

// Classify blobs against the per-FoV median area and build the quantitation
// mask from singles and doubles (holes filled, then dilated by the margin so
// applique rings at the cell rim stay inside).
inline RbcCensus classify_blobs(const Mask& blob_mask, const std::vector<Blob>& blobs,
                                const Labeling& labeling, const RbcConfig& cfg = {}) {
    RbcCensus census;
    census.quantitation_mask = Mask(blob_mask.width, blob_mask.height);
    if (blobs.empty()) {
        census.degenerate = true;
        return census;
    }
    for (const auto& b : blobs) census.blob_areas.push_back(b.area);
    std::vector<std::int64_t> sorted = census.blob_areas;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    census.median_area = static_cast<double>(sorted[sorted.size() / 2]);
    const double a = census.median_area;

    std::vector<char> in_mask(labeling.blobs.size() + 1, 0);
    for (const auto& b : blobs) {
        const double area = static_cast<double>(b.area);
        if (area >= cfg.single_low * a && area <= cfg.single_high * a) {
            ++census.n_single;
            in_mask[b.label] = 1;
        } else if (area > cfg.single_high * a && area <= cfg.double_high * a) {
            ++census.n_double;
            in_mask[b.label] = 1;
        } else {
            ++census.n_clumped_blobs;
        }
    }

    Mask selected(blob_mask.width, blob_mask.height);
    for (std::size_t i = 0; i < selected.v.size(); ++i) {
        const auto l = labeling.labels[i];
        selected.v[i] = (l && static_cast<std::size_t>(l) < in_mask.size() && in_mask[l]) ? 1 : 0;
    }
    census.quantitation_mask = dilate_disk(fill_holes(selected), cfg.mask_margin_px);
    return census;
}

// Convenience wrapper for one FoV image.
inline RbcCensus census_fov(const ColorImage& img, const RbcConfig& cfg = {}) {
    const GrayImage gray = luminance(img);
    const TwoMeans tm = two_means_u8(gray);
    RbcCensus census;
    census.quantitation_mask = Mask(img.width, img.height);
    if (tm.degenerate) {
        census.degenerate = true;
        return census;
    }
    Mask fg(img.width, img.height);
    for (std::size_t i = 0; i < gray.v.size(); ++i) fg.v[i] = gray.v[i] < tm.threshold ? 1 : 0;
    Labeling lab = connected_components(fg);
    std::vector<Blob> kept;
    for (const auto& b : lab.blobs) {
        if (!b.touches_border && b.area >= cfg.min_blob_area) kept.push_back(b);
    }
    if (kept.empty()) {
        census.degenerate = true;
        return census;
    }
    return classify_blobs(fg, kept, lab, cfg);
}

// Serialized tally update; doubles count as two RBCs toward the target.
inline std::pair<RbcTally, bool> update_tally(RbcTally tally, const RbcCensus& census) {
    tally.cumulative += census.counted_rbcs();
    return {tally, tally.cumulative >= tally.target};
}

}  // namespace thinfilm::rbc
