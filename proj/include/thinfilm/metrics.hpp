#pragma once
// Patient-level evaluation: per-sample sensitivity and FP statistics under
// the annotation-relaxation rule, the two quantitation figures of merit,
// ROC/AUC, and the irreducible Poisson counting-error model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "thinfilm/svg.hpp"

namespace thinfilm::metrics {

// ---------------------------------------------------------------------------
// Sample evaluation

struct PredictedPoint {
    double cx = 0.0, cy = 0.0;
    int fov_index = 0;
};

struct AnnotatedPoint {
    double cx = 0.0, cy = 0.0;
    int fov_index = 0;
};

struct SampleForEval {
    std::string sample_id;
    bool is_negative = false;
    std::vector<PredictedPoint> predictions;
    std::vector<AnnotatedPoint> annotations;   // positives of the stage under evaluation
    double examined_volume_ul = 0.0;           // nRbc / 5e6 for the ring branch
};

struct SampleEval {
    std::string sample_id;
    bool is_negative = false;
    std::int64_t tp = 0;
    std::int64_t fp = 0;                       // counted on negative samples only
    std::int64_t annotated = 0;
    std::optional<double> sensitivity;         // undefined for negative samples
    std::optional<double> fp_per_ul;           // defined for negative samples
    double delta_s = 0.0;                      // s - mu(s), filled by compute_foms
    double delta_fp = 0.0;                     // fp_rate - mu(fp), filled by compute_foms
};

// Greedy nearest-neighbor matching within match_radius. Implements the
// annotation-relaxation rule: on positive samples, unmatched predictions are
// ignored rather than counted as FPs; FP rates come from negative samples.
inline SampleEval eval_sample(const SampleForEval& s, double match_radius) {
    SampleEval ev;
    ev.sample_id = s.sample_id;
    ev.is_negative = s.is_negative;
    ev.annotated = static_cast<std::int64_t>(s.annotations.size());

    if (s.is_negative) {
        ev.fp = static_cast<std::int64_t>(s.predictions.size());
        if (s.examined_volume_ul > 0) {
            ev.fp_per_ul = static_cast<double>(ev.fp) / s.examined_volume_ul;
        }
        return ev;
    }

    struct Pair {
        double d2;
        std::size_t pred, ann;
    };
    std::vector<Pair> pairs;
    const double r2 = match_radius * match_radius;
    for (std::size_t p = 0; p < s.predictions.size(); ++p) {
        for (std::size_t a = 0; a < s.annotations.size(); ++a) {
            if (s.predictions[p].fov_index != s.annotations[a].fov_index) continue;
            const double dx = s.predictions[p].cx - s.annotations[a].cx;
            const double dy = s.predictions[p].cy - s.annotations[a].cy;
            const double d2 = dx * dx + dy * dy;
            if (d2 <= r2) pairs.push_back({d2, p, a});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        if (a.pred != b.pred) return a.pred < b.pred;
        return a.ann < b.ann;
    });
    std::vector<char> pred_used(s.predictions.size(), 0), ann_used(s.annotations.size(), 0);
    for (const auto& pr : pairs) {
        if (pred_used[pr.pred] || ann_used[pr.ann]) continue;
        pred_used[pr.pred] = 1;
        ann_used[pr.ann] = 1;
        ++ev.tp;
    }
    if (ev.annotated > 0) {
        ev.sensitivity = static_cast<double>(ev.tp) / static_cast<double>(ev.annotated);
    }
    return ev;
}

inline std::vector<SampleEval> eval_samples(const std::vector<SampleForEval>& samples,
                                            double match_radius) {
    std::vector<SampleEval> evals;
    evals.reserve(samples.size());
    for (const auto& s : samples) evals.push_back(eval_sample(s, match_radius));
    return evals;
}

// ---------------------------------------------------------------------------
// Quantitation figures of merit

struct QuantFoms {
    double mu_s = 0.0;
    double sigma_s = 0.0;    // population std dev
    double mu_fp = 0.0;      // per uL
    double sigma_fp = 0.0;   // per uL, population std dev
    double fom1 = 0.0;       // sigma(s) / mu(s)

    double fom2(double parasitemia) const {
        if (parasitemia <= 0) throw std::invalid_argument("fom2: parasitemia must be > 0");
        return sigma_fp / (mu_s * parasitemia);
    }
};

namespace detail {
inline std::pair<double, double> mean_and_population_sd(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - m) * (x - m);
    var /= static_cast<double>(v.size());
    return {m, std::sqrt(var)};
}
}  // namespace detail

inline QuantFoms compute_foms(std::vector<SampleEval>& evals) {
    std::vector<double> sens, fps;
    for (const auto& e : evals) {
        if (!e.is_negative && e.sensitivity) sens.push_back(*e.sensitivity);
        if (e.is_negative && e.fp_per_ul) fps.push_back(*e.fp_per_ul);
    }
    if (sens.size() < 2 || fps.size() < 2) {
        throw std::runtime_error("compute_foms: need at least 2 positive and 2 negative samples");
    }
    QuantFoms f;
    std::tie(f.mu_s, f.sigma_s) = detail::mean_and_population_sd(sens);
    std::tie(f.mu_fp, f.sigma_fp) = detail::mean_and_population_sd(fps);
    if (f.mu_s <= 0) throw std::runtime_error("compute_foms: mean sensitivity is zero");
    f.fom1 = f.sigma_s / f.mu_s;
    for (auto& e : evals) {
        if (!e.is_negative && e.sensitivity) e.delta_s = *e.sensitivity - f.mu_s;
        if (e.is_negative && e.fp_per_ul) e.delta_fp = *e.fp_per_ul - f.mu_fp;
    }
    return f;
}

// Expected relative quantitation error at parasitemia P: fom1 + fom2(P).
inline double expected_relative_error(const QuantFoms& foms, double parasitemia) {
    if (parasitemia <= 0) throw std::invalid_argument("expected_relative_error: P must be > 0");
    return foms.fom1 + foms.fom2(parasitemia);
}

// ---------------------------------------------------------------------------
// ROC / AUC

struct RocPoint {
    double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

// Threshold-sweep ROC with trapezoidal area. Ties are grouped, which makes
// the area equal to the Mann-Whitney pairwise statistic (wins + half-ties):
// all accumulations are integers or halves, so the equality is exact.
inline RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: size mismatch");
    std::int64_t pos = 0, neg = 0;
    for (int l : labels) (l ? pos : neg) += 1;
    if (pos == 0 || neg == 0) throw std::runtime_error("roc_auc: need both classes");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocResult out;
    out.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::int64_t tp = 0, fp = 0;
    double area2 = 0.0;  // twice the unnormalized area, stays integral
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::int64_t dtp = 0, dfp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] ? dtp : dfp) += 1;
            ++j;
        }
        const std::int64_t tp_prev = tp, fp_prev = fp;
        tp += dtp;
        fp += dfp;
        area2 += static_cast<double>(fp - fp_prev) * static_cast<double>(tp_prev + tp);
        out.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                              static_cast<double>(tp) / static_cast<double>(pos),
                              scores[order[i]]});
        i = j;
    }
    out.auc = 0.5 * area2 / (static_cast<double>(pos) * static_cast<double>(neg));
    return out;
}

inline double roc_auc_value(const std::vector<double>& scores, const std::vector<int>& labels) {
    return roc_auc(scores, labels).auc;
}

// ---------------------------------------------------------------------------
// Irreducible Poisson counting error

enum class Film { thin, thick };

constexpr double kThinRbcsPerUl = 5e6;
constexpr double kThickWbcsPerUl = 8000.0;

inline double event_probability(double parasitemia, Film film) {
    return parasitemia / (film == Film::thin ? kThinRbcsPerUl : kThickWbcsPerUl);
}

// Relative standard error of the binomial count: sqrt((1-p) / (N p)).
inline double poisson_rel_err(double parasitemia, double n_counted, Film film) {
    if (parasitemia <= 0 || n_counted <= 0) {
        throw std::invalid_argument("poisson_rel_err: P and N must be > 0");
    }
    const double p = event_probability(parasitemia, film);
    if (p > 1.0) throw std::invalid_argument("poisson_rel_err: event probability exceeds 1");
    return std::sqrt((1.0 - p) / (n_counted * p));
}

// Probability of seeing at least one parasite in the examined volume.
inline double poisson_detect_prob(double parasitemia, double volume_ul) {
    if (parasitemia < 0) throw std::invalid_argument("poisson_detect_prob: P must be >= 0");
    return 1.0 - std::exp(-parasitemia * volume_ul);
}

struct PoissonCurve {
    Film film = Film::thin;
    double n_counted = 0;
    std::vector<std::pair<double, double>> points;  // (P, rel_err)
};

inline std::vector<double> log_grid(double lo, double hi, int steps) {
    std::vector<double> g;
    g.reserve(steps);
    for (int i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) / (steps - 1);
        g.push_back(lo * std::pow(hi / lo, t));
    }
    return g;
}

// Standard curve families from the counting-statistics analysis: thick-film
// WBC counts of 500/1000/2000 and thin-film RBC counts of 1k/10k/20k.
// Grid points where the per-draw probability would exceed 1 (thick film
// beyond 8000 parasites/uL) fall outside the binomial model and are omitted.
inline std::vector<PoissonCurve> standard_poisson_curves(int grid_steps = 60) {
    std::vector<PoissonCurve> curves;
    for (double n : {500.0, 1000.0, 2000.0}) {
        PoissonCurve c;
        c.film = Film::thick;
        c.n_counted = n;
        for (double p : log_grid(10.0, 16000.0, grid_steps)) {
            if (event_probability(p, Film::thick) > 1.0) continue;
            c.points.emplace_back(p, poisson_rel_err(p, n, Film::thick));
        }
        curves.push_back(std::move(c));
    }
    for (double n : {1000.0, 10000.0, 20000.0}) {
        PoissonCurve c;
        c.film = Film::thin;
        c.n_counted = n;
        for (double p : log_grid(5000.0, 100000.0, grid_steps)) {
            c.points.emplace_back(p, poisson_rel_err(p, n, Film::thin));
        }
        curves.push_back(std::move(c));
    }
    return curves;
}

inline void write_poisson_csv(const std::string& path, const std::vector<PoissonCurve>& curves) {
    std::ofstream out(path);
    out << "film,N,P,rel_err\n";
    for (const auto& c : curves) {
        const char* film = c.film == Film::thin ? "thin" : "thick";
        for (const auto& [p, err] : c.points) {
            out << film << "," << c.n_counted << "," << p << "," << err << "\n";
        }
    }
}

inline void write_poisson_svg(const std::string& path, const std::vector<PoissonCurve>& curves,
                              const std::string& title) {
    static const char* kColors[] = {"#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b"};
    std::vector<svg::Series> series;
    int i = 0;
    for (const auto& c : curves) {
        svg::Series s;
        s.label = std::string(c.film == Film::thin ? "thin N=" : "thick N=") +
                  std::to_string(static_cast<long long>(c.n_counted));
        s.color = kColors[i++ % 6];
        s.points = c.points;
        series.push_back(std::move(s));
    }
    svg::ChartSpec spec;
    spec.title = title;
    spec.x_label = "parasitemia (parasites/uL)";
    spec.y_label = "relative standard error";
    svg::write_loglog_chart(path, spec, series);
}

// Emit the three standard charts (thick, thin, combined) plus the CSV.
inline void emit_poisson_curves(const std::string& out_dir_slash) {
    const auto curves = standard_poisson_curves();
    std::vector<PoissonCurve> thick(curves.begin(), curves.begin() + 3);
    std::vector<PoissonCurve> thin(curves.begin() + 3, curves.end());
    write_poisson_csv(out_dir_slash + "poisson_curves.csv", curves);
    write_poisson_svg(out_dir_slash + "poisson_thick.svg", thick, "Irreducible Poisson error, thick film");
    write_poisson_svg(out_dir_slash + "poisson_thin.svg", thin, "Irreducible Poisson error, thin film");
    write_poisson_svg(out_dir_slash + "poisson_combined.svg", curves, "Irreducible Poisson error, combined");
}

}  // namespace thinfilm::metrics
