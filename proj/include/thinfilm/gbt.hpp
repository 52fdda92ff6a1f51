#pragma once
// Gradient-boosted regression trees, written from scratch: histogram split
// search on quantile bins, Newton leaf values, logistic loss for two classes
// and one-tree-per-class softmax for K classes. Models serialize to
// versioned JSON carrying their feature names; prediction refuses feature
// vectors whose names do not match.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinfilm/metrics.hpp"
#include "thinfilm/rng.hpp"

namespace thinfilm::gbt {

using json = nlohmann::json;

struct TrainParams {
    int n_trees = 200;       // boosting rounds
    int max_depth = 3;
    double shrinkage = 0.1;
    double subsample = 0.8;
    int class_count = 2;
    int min_leaf = 2;
    int max_bins = 64;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;         // -1 marks a leaf
    double threshold = 0.0;   // left if x[feature] <= threshold
    double value = 0.0;
    int left = -1, right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const std::vector<double>& x) const {
        int i = 0;
        while (nodes[i].feature >= 0) {
            i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        }
        return nodes[i].value;
    }
};

struct GbtModel {
    int class_count = 0;               // 0 = untrained
    double shrinkage = 0.1;
    std::vector<double> base_scores;   // log-odds prior (1 entry) or log priors (K)
    std::vector<std::vector<Tree>> rounds;  // rounds[r][k]; k dim is 1 for binary
    std::vector<std::string> feature_names;
    double train_auc = 0.0;            // binary only; multiclass stores accuracy
    double train_metric = 0.0;

    bool trained() const { return class_count >= 2; }

    void check_input(const std::vector<double>& x) const {
        if (!trained()) throw std::runtime_error("gbt: model not trained");
        if (x.size() != feature_names.size()) {
            throw std::invalid_argument("gbt: feature length mismatch");
        }
    }

    // Binary probability of class 1.
    double predict_score(const std::vector<double>& x) const {
        check_input(x);
        if (class_count != 2) throw std::runtime_error("gbt: predict_score needs a binary model");
        double f = base_scores[0];
        for (const auto& r : rounds) f += shrinkage * r[0].predict(x);
        return 1.0 / (1.0 + std::exp(-f));
    }

    std::vector<double> predict_proba(const std::vector<double>& x) const {
        check_input(x);
        if (class_count == 2) {
            const double p = predict_score(x);
            return {1.0 - p, p};
        }
        std::vector<double> f = base_scores;
        for (const auto& r : rounds) {
            for (int k = 0; k < class_count; ++k) f[k] += shrinkage * r[k].predict(x);
        }
        double mx = *std::max_element(f.begin(), f.end());
        double sum = 0;
        for (auto& v : f) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (auto& v : f) v /= sum;
        return f;
    }
};

// ---------------------------------------------------------------------------
// Training

namespace detail {

// Quantile bin edges per feature; edges are actual sample values so that
// split thresholds map through monotone feature transforms.
inline std::vector<std::vector<double>> quantile_edges(const std::vector<std::vector<double>>& rows,
                                                       int max_bins) {
    const std::size_t d = rows.empty() ? 0 : rows[0].size();
    std::vector<std::vector<double>> edges(d);
    std::vector<double> col(rows.size());
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][j];
        std::sort(col.begin(), col.end());
        col.erase(std::unique(col.begin(), col.end()), col.end());
        auto& e = edges[j];
        if (col.size() <= static_cast<std::size_t>(max_bins)) {
            e.assign(col.begin(), col.end());
        } else {
            for (int b = 1; b <= max_bins; ++b) {
                const std::size_t idx = col.size() * b / (max_bins + 1);
                e.push_back(col[std::min(idx, col.size() - 1)]);
            }
            e.erase(std::unique(e.begin(), e.end()), e.end());
        }
        if (!e.empty()) e.pop_back();  // last edge separates nothing
    }
    return edges;
}

inline std::vector<std::uint16_t> bin_rows(const std::vector<std::vector<double>>& rows,
                                           const std::vector<std::vector<double>>& edges) {
    const std::size_t n = rows.size(), d = edges.size();
    std::vector<std::uint16_t> binned(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const auto& e = edges[j];
            // bin = count of edges strictly below the value; x <= e[b] goes left of edge b
            const auto it = std::lower_bound(e.begin(), e.end(), rows[i][j]);
            binned[i * d + j] = static_cast<std::uint16_t>(it - e.begin());
        }
    }
    return binned;
}

struct SplitResult {
    int feature = -1;
    int bin = -1;
    double gain = 0.0;
};

constexpr double kLambda = 1e-6;
constexpr double kMaxLeaf = 10.0;

struct TreeBuilder {
    const std::vector<std::uint16_t>& binned;
    const std::vector<std::vector<double>>& edges;
    const std::vector<double>& grad;
    const std::vector<double>& hess;
    std::size_t dims;
    int max_depth;
    int min_leaf;
    double leaf_scale;

    Tree tree;

    int build(std::vector<std::uint32_t>& items, int depth) {
        double g = 0, h = 0;
        for (auto i : items) {
            g += grad[i];
            h += hess[i];
        }
        const auto make_leaf = [&]() {
            TreeNode leaf;
            leaf.value = std::clamp(leaf_scale * g / (h + kLambda), -kMaxLeaf, kMaxLeaf);
            tree.nodes.push_back(leaf);
            return static_cast<int>(tree.nodes.size() - 1);
        };
        if (depth >= max_depth || items.size() < static_cast<std::size_t>(2 * min_leaf)) {
            return make_leaf();
        }

        SplitResult best;
        const double parent_score = g * g / (h + kLambda);
        std::vector<double> hg, hh;
        std::vector<std::uint32_t> hc;
        for (std::size_t j = 0; j < dims; ++j) {
            const auto& e = edges[j];
            if (e.empty()) continue;
            const std::size_t nb = e.size() + 1;
            hg.assign(nb, 0.0);
            hh.assign(nb, 0.0);
            hc.assign(nb, 0);
            for (auto i : items) {
                const std::uint16_t b = binned[static_cast<std::size_t>(i) * dims + j];
                hg[b] += grad[i];
                hh[b] += hess[i];
                hc[b] += 1;
            }
            double gl = 0, hl = 0;
            std::uint32_t cl = 0;
            for (std::size_t b = 0; b + 1 < nb; ++b) {
                gl += hg[b];
                hl += hh[b];
                cl += hc[b];
                const std::uint32_t cr = static_cast<std::uint32_t>(items.size()) - cl;
                if (cl < static_cast<std::uint32_t>(min_leaf) || cr < static_cast<std::uint32_t>(min_leaf)) continue;
                const double gr = g - gl, hr = h - hl;
                const double gain = gl * gl / (hl + kLambda) + gr * gr / (hr + kLambda) - parent_score;
                if (gain > best.gain + 1e-12) {
                    best.gain = gain;
                    best.feature = static_cast<int>(j);
                    best.bin = static_cast<int>(b);
                }
            }
        }
        if (best.feature < 0) return make_leaf();

        std::vector<std::uint32_t> left_items, right_items;
        for (auto i : items) {
            const std::uint16_t b = binned[static_cast<std::size_t>(i) * dims + best.feature];
            (b <= static_cast<std::uint16_t>(best.bin) ? left_items : right_items).push_back(i);
        }
        items.clear();
        items.shrink_to_fit();

        TreeNode node;
        node.feature = best.feature;
        node.threshold = edges[best.feature][best.bin];
        tree.nodes.push_back(node);
        const int self = static_cast<int>(tree.nodes.size() - 1);
        tree.nodes[self].left = build(left_items, depth + 1);
        tree.nodes[self].right = build(right_items, depth + 1);
        return self;
    }
};

}  // namespace detail

// Train a GBT classifier. labels are 0..K-1; for class_count == 2 the model
// boosts the log-odds of class 1 with logistic loss, otherwise one tree per
// class and softmax loss. Deterministic for a fixed seed.
inline GbtModel gbt_train(const std::vector<std::vector<double>>& rows,
                          const std::vector<int>& labels,
                          const std::vector<std::string>& feature_names,
                          const TrainParams& params) {
    if (rows.size() != labels.size()) throw std::invalid_argument("gbt_train: rows/labels size mismatch");
    if (rows.empty()) throw std::invalid_argument("gbt_train: empty training set");
    const std::size_t n = rows.size(), d = rows[0].size();
    if (feature_names.size() != d) throw std::invalid_argument("gbt_train: feature name count mismatch");
    for (const auto& r : rows) {
        if (r.size() != d) throw std::invalid_argument("gbt_train: ragged rows");
        for (double v : r)
            if (!std::isfinite(v)) throw std::invalid_argument("gbt_train: non-finite feature");
    }
    const int K = params.class_count;
    std::vector<std::int64_t> class_n(K, 0);
    for (int l : labels) {
        if (l < 0 || l >= K) throw std::invalid_argument("gbt_train: label out of range");
        ++class_n[l];
    }
    int present = 0;
    for (auto c : class_n) present += (c > 0);
    if (present < 2) throw std::invalid_argument("gbt_train: need at least two classes present");

    GbtModel model;
    model.class_count = K;
    model.shrinkage = params.shrinkage;
    model.feature_names = feature_names;

    const auto edges = detail::quantile_edges(rows, params.max_bins);
    const auto binned = detail::bin_rows(rows, edges);
    Rng rng(params.seed);

    const bool binary = (K == 2);
    const int trees_per_round = binary ? 1 : K;
    const double prior_floor = 0.5 / static_cast<double>(n);

    if (binary) {
        const double p1 = std::clamp(static_cast<double>(class_n[1]) / static_cast<double>(n),
                                     prior_floor, 1.0 - prior_floor);
        model.base_scores = {std::log(p1 / (1.0 - p1))};
    } else {
        model.base_scores.resize(K);
        for (int k = 0; k < K; ++k) {
            model.base_scores[k] = std::log(std::max(static_cast<double>(class_n[k]) / static_cast<double>(n),
                                                     prior_floor));
        }
    }

    // Raw scores per item (and per class for multiclass).
    std::vector<double> scores(n * trees_per_round);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < trees_per_round; ++k) scores[i * trees_per_round + k] = model.base_scores[binary ? 0 : k];
    }

    std::vector<double> grad(n), hess(n), proba(binary ? 0 : static_cast<std::size_t>(K));
    std::vector<std::uint32_t> all_items(n);
    std::iota(all_items.begin(), all_items.end(), 0u);

    for (int round = 0; round < params.n_trees; ++round) {
        // Subsample without replacement.
        std::vector<std::uint32_t> sample = all_items;
        if (params.subsample < 1.0) {
            rng.shuffle(sample);
            sample.resize(std::max<std::size_t>(static_cast<std::size_t>(params.subsample * n), 2));
            std::sort(sample.begin(), sample.end());
        }

        std::vector<Tree> round_trees;
        if (binary) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = 1.0 / (1.0 + std::exp(-scores[i]));
                grad[i] = static_cast<double>(labels[i]) - p;
                hess[i] = std::max(p * (1.0 - p), 1e-9);
            }
            detail::TreeBuilder builder{binned, edges, grad, hess, d, params.max_depth, params.min_leaf, 1.0, {}};
            std::vector<std::uint32_t> items = sample;
            builder.build(items, 0);
            for (std::size_t i = 0; i < n; ++i) scores[i] += params.shrinkage * builder.tree.predict(rows[i]);
            round_trees.push_back(std::move(builder.tree));
        } else {
            // Softmax probabilities for the whole set, then one tree per class.
            std::vector<double> probs(n * K);
            for (std::size_t i = 0; i < n; ++i) {
                double mx = -1e300;
                for (int k = 0; k < K; ++k) mx = std::max(mx, scores[i * K + k]);
                double sum = 0;
                for (int k = 0; k < K; ++k) {
                    probs[i * K + k] = std::exp(scores[i * K + k] - mx);
                    sum += probs[i * K + k];
                }
                for (int k = 0; k < K; ++k) probs[i * K + k] /= sum;
            }
            const double leaf_scale = static_cast<double>(K - 1) / static_cast<double>(K);
            for (int k = 0; k < K; ++k) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double p = probs[i * K + k];
                    grad[i] = (labels[i] == k ? 1.0 : 0.0) - p;
                    hess[i] = std::max(p * (1.0 - p), 1e-9);
                }
                detail::TreeBuilder builder{binned, edges, grad, hess, d, params.max_depth, params.min_leaf,
                                            leaf_scale, {}};
                std::vector<std::uint32_t> items = sample;
                builder.build(items, 0);
                for (std::size_t i = 0; i < n; ++i) {
                    scores[i * K + k] += params.shrinkage * builder.tree.predict(rows[i]);
                }
                round_trees.push_back(std::move(builder.tree));
            }
        }
        model.rounds.push_back(std::move(round_trees));
    }

    // Training metric: AUC for binary, accuracy for multiclass.
    if (binary) {
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = 1.0 / (1.0 + std::exp(-scores[i]));
        model.train_auc = metrics::roc_auc_value(s, labels);
        model.train_metric = model.train_auc;
    } else {
        std::int64_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            int arg = 0;
            for (int k = 1; k < K; ++k)
                if (scores[i * K + k] > scores[i * K + arg]) arg = k;
            correct += (arg == labels[i]);
        }
        model.train_metric = static_cast<double>(correct) / static_cast<double>(n);
    }
    return model;
}

inline double gbt_predict_score(const GbtModel& m, const std::vector<double>& x) {
    return m.predict_score(x);
}

inline std::vector<double> gbt_predict_proba(const GbtModel& m, const std::vector<double>& x) {
    return m.predict_proba(x);
}

// ---------------------------------------------------------------------------
// Serialization (versioned JSON)

inline json tree_to_json(const Tree& t) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
        nodes.push_back({n.feature, n.threshold, n.value, n.left, n.right});
    }
    return nodes;
}

inline Tree tree_from_json(const json& j) {
    Tree t;
    for (const auto& n : j) {
        TreeNode node;
        node.feature = n[0].get<int>();
        node.threshold = n[1].get<double>();
        node.value = n[2].get<double>();
        node.left = n[3].get<int>();
        node.right = n[4].get<int>();
        t.nodes.push_back(node);
    }
    return t;
}

inline json model_to_json(const GbtModel& m) {
    json rounds = json::array();
    for (const auto& r : m.rounds) {
        json per_class = json::array();
        for (const auto& t : r) per_class.push_back(tree_to_json(t));
        rounds.push_back(std::move(per_class));
    }
    return json{{"format", "thinfilm-gbt"},
                {"schema_version", 1},
                {"class_count", m.class_count},
                {"shrinkage", m.shrinkage},
                {"base_scores", m.base_scores},
                {"feature_names", m.feature_names},
                {"train_metric", m.train_metric},
                {"train_auc", m.train_auc},
                {"rounds", std::move(rounds)}};
}

inline GbtModel model_from_json(const json& j) {
    if (j.value("format", std::string()) != "thinfilm-gbt") {
        throw std::runtime_error("gbt: not a model file");
    }
    GbtModel m;
    m.class_count = j.at("class_count").get<int>();
    m.shrinkage = j.at("shrinkage").get<double>();
    m.base_scores = j.at("base_scores").get<std::vector<double>>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.train_metric = j.value("train_metric", 0.0);
    m.train_auc = j.value("train_auc", 0.0);
    for (const auto& r : j.at("rounds")) {
        std::vector<Tree> per_class;
        for (const auto& t : r) per_class.push_back(tree_from_json(t));
        m.rounds.push_back(std::move(per_class));
    }
    return m;
}

inline void save_model(const std::string& path, const GbtModel& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("gbt: cannot write " + path);
    out << model_to_json(m).dump() << "\n";
}

inline GbtModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("gbt: cannot read " + path);
    return model_from_json(json::parse(in));
}

// Prediction guarded by feature-name agreement with the model.
inline std::vector<double> gbt_predict_named(const GbtModel& m,
                                             const std::vector<std::string>& names,
                                             const std::vector<double>& x) {
    if (names != m.feature_names) throw std::runtime_error("gbt: feature-name mismatch");
    return m.predict_proba(x);
}

}  // namespace thinfilm::gbt
