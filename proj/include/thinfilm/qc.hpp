#pragma once
// FoV quality control: a two-stage screen that drops empty or blurry fields
// before any downstream processing. Stage 1 thresholds grayscale standard
// deviation and gradient dynamic range; stage 2 classifies focus features
// with a trained GBT model.

#include <cmath>
#include <string>
#include <vector>

#include "thinfilm/gbt.hpp"
#include "thinfilm/image.hpp"
#include "thinfilm/imgproc.hpp"

namespace thinfilm::qc {

enum class Reason { ok, low_stddev, low_gradient_range, blurry };

inline const char* to_string(Reason r) {
    switch (r) {
        case Reason::ok: return "ok";
        case Reason::low_stddev: return "low_stddev";
        case Reason::low_gradient_range: return "low_gradient_range";
        case Reason::blurry: return "blurry";
    }
    return "?";
}

struct QcVerdict {
    bool accepted = false;
    Reason reason = Reason::ok;
    double gray_stddev = 0.0;
    double gradient_dynamic_range = 0.0;   // p99 - p1 of gradient magnitude
    std::vector<double> focus_features;    // filled when stage 2 runs
    double blur_score = 0.0;
    int qc_slice = 0;                      // slice the verdict was computed on
};

struct QcConfig {
    double t_std = 4.0;
    double t_grad = 12.0;
    double reference_blur_sigma = 2.0;  // artificial blur for the feature ratios
    double blur_threshold = 0.5;        // accepted iff model score < threshold
};

// Stage 1: reject when grayscale std dev or gradient dynamic range falls
// below its threshold. Both statistics are invariant to adding a constant
// to every pixel.
inline QcVerdict qc_stage1(const ColorImage& img, double t_std, double t_grad) {
    QcVerdict v;
    const GrayImage gray = luminance(img);
    v.gray_stddev = stddev(gray);
    const GrayImage grad = gradient_magnitude(gray);
    v.gradient_dynamic_range = percentile(grad.v, 99.0) - percentile(grad.v, 1.0);
    if (v.gray_stddev < t_std) {
        v.accepted = false;
        v.reason = Reason::low_stddev;
    } else if (v.gradient_dynamic_range < t_grad) {
        v.accepted = false;
        v.reason = Reason::low_gradient_range;
    } else {
        v.accepted = true;
        v.reason = Reason::ok;
    }
    return v;
}

inline QcVerdict qc_stage1(const ColorImage& img, const QcConfig& cfg = {}) {
    return qc_stage1(img, cfg.t_std, cfg.t_grad);
}

inline const std::vector<std::string>& focus_feature_names() {
    static const std::vector<std::string> names = {
        "brenner", "var_laplacian", "tenengrad",
        "brenner_blurred", "var_laplacian_blurred", "tenengrad_blurred",
        "brenner_ratio", "var_laplacian_ratio", "tenengrad_ratio"};
    return names;
}

// Focus metrics on the image and on an artificially blurred copy, plus the
// original/blurred ratios. Ratios on a dead-flat image are 1 by convention.
inline std::vector<double> qc_focus_features(const ColorImage& img, double reference_sigma = 2.0) {
    const GrayImage gray = luminance(img);
    const GrayImage blurred = gaussian_blur(gray, reference_sigma);
    const double b0 = brenner_score(gray);
    const double v0 = variance_of_laplacian(gray);
    const double t0 = tenengrad_score(gray);
    const double b1 = brenner_score(blurred);
    const double v1 = variance_of_laplacian(blurred);
    const double t1 = tenengrad_score(blurred);
    auto ratio = [](double orig, double blur) { return blur <= 0.0 ? 1.0 : orig / blur; };
    return {b0, v0, t0, b1, v1, t1, ratio(b0, b1), ratio(v0, v1), ratio(t0, t1)};
}

// Stage 2: GBT blur classifier on the focus features. The score is the
// probability of "blurry"; a score exactly at the threshold rejects.
inline QcVerdict qc_blur_classify(const std::vector<double>& features, const gbt::GbtModel& model,
                                  double blur_threshold = 0.5) {
    if (!model.trained()) throw std::runtime_error("qc_blur_classify: untrained model");
    QcVerdict v;
    v.focus_features = features;
    v.blur_score = model.predict_score(features);
    v.accepted = v.blur_score < blur_threshold;
    v.reason = v.accepted ? Reason::ok : Reason::blurry;
    return v;
}

// Index of the slice with the highest Brenner score. QC runs on the
// best-focus slice and accepts or rejects the whole stack.
inline int best_focus_slice(const std::vector<ColorImage>& slices) {
    int best = 0;
    double best_score = -1.0;
    for (std::size_t k = 0; k < slices.size(); ++k) {
        const double s = brenner_score(luminance(slices[k]));
        if (s > best_score) {
            best_score = s;
            best = static_cast<int>(k);
        }
    }
    return best;
}

// Full stack verdict: stage 1 on the best-focus slice, then the blur
// classifier when a model is provided.
inline QcVerdict qc_stack(const std::vector<ColorImage>& slices, const QcConfig& cfg,
                          const gbt::GbtModel* blur_model) {
    const int k = best_focus_slice(slices);
    QcVerdict v = qc_stage1(slices[k], cfg);
    v.qc_slice = k;
    if (!v.accepted) return v;
    if (blur_model != nullptr) {
        QcVerdict v2 = qc_blur_classify(qc_focus_features(slices[k], cfg.reference_blur_sigma),
                                        *blur_model, cfg.blur_threshold);
        v2.gray_stddev = v.gray_stddev;
        v2.gradient_dynamic_range = v.gradient_dynamic_range;
        v2.qc_slice = k;
        return v2;
    }
    return v;
}

}  // namespace thinfilm::qc
