#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "thinfilm/metrics.hpp"
#include "thinfilm/rng.hpp"

#include "oracles.hpp"
#include "testutil.hpp"

using namespace thinfilm;
using namespace thinfilm::metrics;

TEST_CASE("negative sample counts all predictions as FPs, sensitivity undefined") {
    SampleForEval s;
    s.sample_id = "neg";
    s.is_negative = true;
    s.predictions = {{10, 10, 0}, {20, 20, 0}, {30, 30, 1}};
    s.examined_volume_ul = 0.004;  // 20k RBCs worth of blood
    const SampleEval ev = eval_sample(s, 10.0);
    REQUIRE(ev.fp == 3);
    REQUIRE_FALSE(ev.sensitivity.has_value());
    REQUIRE(ev.fp_per_ul.value() == Catch::Approx(750.0));
}

TEST_CASE("relaxation rule: unmatched predictions on positive samples are ignored") {
    SampleForEval s;
    s.sample_id = "pos";
    s.is_negative = false;
    for (int i = 0; i < 10; ++i) s.annotations.push_back({100.0 * i, 50.0, 0});
    // 8 predictions on top of annotations, 5 unmatched extras.
    for (int i = 0; i < 8; ++i) s.predictions.push_back({100.0 * i + 2.0, 51.0, 0});
    for (int i = 0; i < 5; ++i) s.predictions.push_back({43.0 + 90.0 * i, 400.0, 0});
    const SampleEval ev = eval_sample(s, 10.0);
    REQUIRE(ev.tp == 8);
    REQUIRE(ev.sensitivity.value() == Catch::Approx(0.8));
    REQUIRE(ev.fp == 0);
}

TEST_CASE("prediction beyond the match radius stays unmatched") {
    SampleForEval s;
    s.annotations = {{100, 100, 0}};
    s.predictions = {{120, 100, 0}};  // 2x the radius away
    const SampleEval ev = eval_sample(s, 10.0);
    REQUIRE(ev.tp == 0);
    REQUIRE(ev.sensitivity.value() == 0.0);

    // A prediction in another FoV never matches.
    s.predictions = {{100, 100, 1}};
    REQUIRE(eval_sample(s, 10.0).tp == 0);
}

TEST_CASE("greedy matching is one-to-one") {
    SampleForEval s;
    s.annotations = {{100, 100, 0}, {104, 100, 0}};
    s.predictions = {{101, 100, 0}, {103, 100, 0}};
    const SampleEval ev = eval_sample(s, 10.0);
    REQUIRE(ev.tp == 2);
}

TEST_CASE("compute_foms on a hand-built fixture") {
    std::vector<SampleEval> evals(4);
    evals[0].sensitivity = 0.8;
    evals[1].sensitivity = 0.9;
    evals[2].is_negative = true;
    evals[2].fp_per_ul = 100.0;
    evals[3].is_negative = true;
    evals[3].fp_per_ul = 300.0;
    const QuantFoms f = compute_foms(evals);
    REQUIRE(f.mu_s == Catch::Approx(0.85));
    REQUIRE(f.sigma_s == Catch::Approx(0.05));  // population std dev
    REQUIRE(f.fom1 == Catch::Approx(0.05 / 0.85));
    REQUIRE(f.mu_fp == Catch::Approx(200.0));
    REQUIRE(f.sigma_fp == Catch::Approx(100.0));
    REQUIRE(evals[0].delta_s == Catch::Approx(-0.05));
    REQUIRE(evals[3].delta_fp == Catch::Approx(100.0));

    std::vector<SampleEval> too_few(evals.begin(), evals.begin() + 2);
    REQUIRE_THROWS(compute_foms(too_few));
}

TEST_CASE("expected relative error reproduces the 23 percent fixture") {
    QuantFoms f;
    f.mu_s = 1.0;
    f.sigma_fp = 6000.0;  // sigma(fp)/mu(s) = 6000
    f.fom1 = 0.13;
    REQUIRE(std::abs(expected_relative_error(f, 60000.0) - 0.23) <= 1e-12);
    REQUIRE(expected_relative_error(f, 6000.0) == Catch::Approx(1.13));
    REQUIRE(expected_relative_error(f, 1e12) == Catch::Approx(0.13).margin(1e-6));
    REQUIRE_THROWS(expected_relative_error(f, 0.0));
}

TEST_CASE("roc_auc: separated scores give AUC 1, shuffled labels give 0.5") {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) {
        scores.push_back(i < 25 ? 0.9 + 0.001 * i : 0.1 + 0.001 * i);
        labels.push_back(i < 25 ? 1 : 0);
    }
    REQUIRE(roc_auc_value(scores, labels) == 1.0);

    Rng rng(4);
    scores.clear();
    labels.clear();
    for (int i = 0; i < 10000; ++i) {
        scores.push_back(rng.uniform());
        labels.push_back(static_cast<int>(rng.uniform_index(2)));
    }
    const double auc = roc_auc_value(scores, labels);
    REQUIRE(auc >= 0.48);
    REQUIRE(auc <= 0.52);

    REQUIRE_THROWS(roc_auc_value({0.1, 0.2}, {1, 1}));
}

TEST_CASE("roc_auc equals the pairwise oracle exactly, including ties") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 50 + static_cast<int>(rng.uniform_index(950));
        std::vector<double> scores;
        std::vector<int> labels;
        bool has0 = false, has1 = false;
        for (int i = 0; i < n; ++i) {
            scores.push_back(static_cast<double>(rng.uniform_index(40)));  // heavy ties
            const int l = static_cast<int>(rng.uniform_index(2));
            labels.push_back(l);
            (l ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        REQUIRE(roc_auc_value(scores, labels) == oracles::pairwise_auc(scores, labels));
    }
}

TEST_CASE("poisson relative error closed form") {
    // thin film, P=80k, N=20k: sqrt(0.984/320)
    REQUIRE(poisson_rel_err(80000, 20000, Film::thin) == Catch::Approx(0.05545).margin(5e-4));
    // the microscopist's disadvantage at N=1000
    REQUIRE(poisson_rel_err(80000, 1000, Film::thin) == Catch::Approx(0.248).margin(2e-3));
    // p -> 1 limit
    REQUIRE(poisson_rel_err(5e6, 1000, Film::thin) == 0.0);
    REQUIRE_THROWS(poisson_rel_err(5e6 + 1, 1000, Film::thin));
    REQUIRE_THROWS(poisson_rel_err(0, 1000, Film::thin));

    // sqrt(N) scaling is exact in floating point.
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const double p = rng.uniform(10, 7900);  // keep the event probability below 1
        const double n = std::floor(rng.uniform(100, 5000));
        REQUIRE(poisson_rel_err(p, 4 * n, Film::thick) == poisson_rel_err(p, n, Film::thick) / 2.0);
    }
}

TEST_CASE("poisson detection probability") {
    REQUIRE(poisson_detect_prob(50, 0.1) == Catch::Approx(1.0 - std::exp(-5.0)));
    REQUIRE(poisson_detect_prob(50, 0.1) == Catch::Approx(0.99326).margin(1e-4));
    REQUIRE(poisson_detect_prob(0, 10) == 0.0);
    REQUIRE(poisson_detect_prob(50, 1e9) == Catch::Approx(1.0));
}

namespace {
// Exact binomial sampler via geometric waiting times; O(Np) per draw.
std::int64_t binomial_draw(Rng& rng, std::int64_t n, double p) {
    if (p <= 0) return 0;
    const double log1mp = std::log1p(-p);
    std::int64_t count = -1, pos = 0;
    while (pos <= n) {
        double u = rng.uniform();
        if (u <= 0) u = 1e-300;
        pos += static_cast<std::int64_t>(std::floor(std::log(u) / log1mp)) + 1;
        ++count;
    }
    return count;
}
}  // namespace

TEST_CASE("closed form agrees with a quick Monte-Carlo binomial check") {
    Rng rng(2026);
    const struct {
        double parasitemia;
        double n;
        Film film;
    } points[] = {{80000, 20000, Film::thin}, {20000, 10000, Film::thin}, {4000, 1000, Film::thick}};
    for (const auto& pt : points) {
        const double p = event_probability(pt.parasitemia, pt.film);
        const int trials = 20000;
        std::vector<double> draws(trials);
        for (int t = 0; t < trials; ++t) {
            draws[t] = static_cast<double>(binomial_draw(rng, static_cast<std::int64_t>(pt.n), p));
        }
        double mean = 0;
        for (double d : draws) mean += d;
        mean /= trials;
        double var = 0;
        for (double d : draws) var += (d - mean) * (d - mean);
        var /= trials;
        const double mc = std::sqrt(var) / mean;
        const double closed = poisson_rel_err(pt.parasitemia, pt.n, pt.film);
        // Delta-method standard error of the MC estimate with binomial kurtosis.
        const double np = pt.n * p;
        const double kurt = (1.0 - 6.0 * p * (1.0 - p)) / (np * (1.0 - p));
        const double se = closed * std::sqrt((kurt + 2.0) / (4.0 * trials) + closed * closed / trials);
        REQUIRE(std::abs(mc - closed) <= 4.0 * se);
    }
}

TEST_CASE("emitted poisson curves have the right families and shapes") {
    testutil::TempDir tmp("poisson");
    const std::string dir = tmp.path().string() + "/";
    emit_poisson_curves(dir);

    std::ifstream csv(dir + "poisson_curves.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    REQUIRE(header == "film,N,P,rel_err");

    struct Row {
        std::string film;
        double n, p, err;
    };
    std::vector<Row> rows;
    std::string line;
    while (std::getline(csv, line)) {
        std::stringstream ss(line);
        Row r;
        std::string tok;
        std::getline(ss, r.film, ',');
        std::getline(ss, tok, ',');
        r.n = std::stod(tok);
        std::getline(ss, tok, ',');
        r.p = std::stod(tok);
        std::getline(ss, tok, ',');
        r.err = std::stod(tok);
        rows.push_back(r);
    }
    // Thick curves stop where the per-draw probability would exceed 1.
    REQUIRE(rows.size() > 5u * 60u);
    REQUIRE(rows.size() < 6u * 60u);
    for (const auto& r : rows) {
        if (r.film == "thick") REQUIRE(r.p <= 8000.0);
    }

    // Monotone decreasing in P within each curve; sqrt(N) ordering across curves.
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].film == rows[i - 1].film && rows[i].n == rows[i - 1].n) {
            REQUIRE(rows[i].err < rows[i - 1].err);
        }
    }
    const double e500 = poisson_rel_err(1000, 500, Film::thick);
    const double e2000 = poisson_rel_err(1000, 2000, Film::thick);
    REQUIRE(e500 / e2000 == Catch::Approx(2.0));

    for (const char* f : {"poisson_thick.svg", "poisson_thin.svg", "poisson_combined.svg"}) {
        std::ifstream svg_file(dir + f);
        REQUIRE(svg_file.good());
        std::stringstream buf;
        buf << svg_file.rdbuf();
        REQUIRE(buf.str().find("<svg") != std::string::npos);
        REQUIRE(buf.str().find("polyline") != std::string::npos);
    }
}
