#include "pathmon/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "pathmon/error.hpp"

namespace pathmon {
namespace {

// Unbiased-enough index in [0, n) that does not depend on the standard
// library's distribution implementation.
std::size_t bounded(std::mt19937_64& rng, std::size_t n) {
    return std::size_t((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

std::uint64_t tree_seed(std::uint64_t seed, std::uint64_t tree) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(tree), std::uint32_t(tree >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (std::uint64_t(out[0]) << 32) | out[1];
}

struct Split {
    int feature = -1;
    double threshold = 0;
    double impurity = 0;
};

}  // namespace

double gini(double positive, double total) {
    if (total <= 0) return 0.0;
    const double p = positive / total;
    return 2.0 * p * (1.0 - p);
}

double DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int i = 0;
    while (!nodes[std::size_t(i)].is_leaf()) {
        const auto& n = nodes[std::size_t(i)];
        i = row[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[std::size_t(i)].value;
}

Eigen::VectorXd RandomForestModel::predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    if (x.cols() != width) {
        throw Error("width_mismatch", "feature width " + std::to_string(x.cols()) + " does not match model width " +
                                          std::to_string(width));
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    if (trees.empty()) return out;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double s = 0;
        for (const auto& t : trees) s += t.predict(x.row(r));
        out[r] = s / double(trees.size());
    }
    return out;
}

DecisionTree grow_tree(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                       std::vector<Eigen::Index> samples, const ForestHyper& hyper, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto width = std::size_t(x.cols());
    std::size_t mtry = hyper.features_per_split > 0 ? std::size_t(hyper.features_per_split)
                                                    : std::size_t(std::floor(std::sqrt(double(width))));
    mtry = std::clamp<std::size_t>(mtry, 1, std::max<std::size_t>(width, 1));
    const std::size_t min_leaf = std::size_t(std::max(1, hyper.min_samples_leaf));

    DecisionTree tree;
    struct Pending {
        int node;
        std::size_t begin;
        std::size_t end;
        int depth;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, 0, samples.size(), 0});

    std::vector<std::size_t> features(width);
    std::vector<std::pair<double, double>> column;  // (value, label)

    while (!stack.empty()) {
        const auto job = stack.back();
        stack.pop_back();
        const std::size_t n = job.end - job.begin;
        double pos = 0;
        for (std::size_t i = job.begin; i < job.end; ++i) pos += y[samples[i]];
        TreeNode& node = tree.nodes[std::size_t(job.node)];
        node.value = n ? pos / double(n) : 0.0;

        const double parent = gini(pos, double(n));
        if (parent == 0.0 || n < 2 * min_leaf || (hyper.max_depth > 0 && job.depth >= hyper.max_depth) || width == 0) {
            continue;
        }

        std::iota(features.begin(), features.end(), std::size_t{0});
        Split best;
        best.impurity = parent;
        for (std::size_t f = 0; f < mtry; ++f) {
            std::swap(features[f], features[f + bounded(rng, width - f)]);
            const auto feature = Eigen::Index(features[f]);

            column.clear();
            for (std::size_t i = job.begin; i < job.end; ++i) column.emplace_back(x(samples[i], feature), y[samples[i]]);
            std::sort(column.begin(), column.end());

            double left_pos = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_pos += column[i].second;
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (column[i].first == column[i + 1].first || nl < min_leaf || nr < min_leaf) continue;
                const double impurity =
                    (double(nl) * gini(left_pos, double(nl)) + double(nr) * gini(pos - left_pos, double(nr))) / double(n);
                if (impurity < best.impurity - 1e-12) {
                    double threshold = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
                    if (!(threshold < column[i + 1].first)) threshold = column[i].first;
                    best = {int(feature), threshold, impurity};
                }
            }
        }
        if (best.feature < 0) continue;

        auto mid = std::stable_partition(samples.begin() + std::ptrdiff_t(job.begin), samples.begin() + std::ptrdiff_t(job.end),
                                         [&](Eigen::Index s) { return x(s, best.feature) <= best.threshold; });
        const auto split = std::size_t(mid - samples.begin());

        const int left = int(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& parent_node = tree.nodes[std::size_t(job.node)];
        parent_node.feature = best.feature;
        parent_node.threshold = best.threshold;
        parent_node.left = left;
        parent_node.right = left + 1;
        stack.push_back({left + 1, split, job.end, job.depth + 1});
        stack.push_back({left, job.begin, split, job.depth + 1});
    }
    return tree;
}

RandomForestModel train_rf(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                           const ForestHyper& hyper) {
    if (x.rows() == 0 || x.rows() != y.size()) throw Error("empty_training_set", "no training rows");
    if (!x.allFinite() || !y.allFinite()) throw Error("non_finite", "training data contains non-finite values");
    const auto positives = (y.array() > 0.5).count();
    if (positives == 0 || positives == y.size()) throw Error("single_class", "training data contains a single class");
    if (hyper.n_trees <= 0) throw Error("bad_config", "n_trees must be positive");

    RandomForestModel model;
    model.hyper = hyper;
    model.width = x.cols();
    model.trees.resize(std::size_t(hyper.n_trees));

    const auto n = std::size_t(x.rows());
    auto build = [&](std::size_t t) {
        const auto seed = tree_seed(hyper.seed, t);
        std::mt19937_64 rng(seed);
        std::vector<Eigen::Index> samples(n);
        if (hyper.bootstrap) {
            for (auto& s : samples) s = Eigen::Index(bounded(rng, n));
        } else {
            std::iota(samples.begin(), samples.end(), Eigen::Index{0});
        }
        model.trees[t] = grow_tree(x, y, std::move(samples), hyper, rng());
    };

    unsigned threads = hyper.threads > 0 ? unsigned(hyper.threads) : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, unsigned(hyper.n_trees));
    if (threads <= 1) {
        for (std::size_t t = 0; t < model.trees.size(); ++t) build(t);
        return model;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t t = next++; t < model.trees.size(); t = next++) build(t);
        });
    }
    pool.clear();
    return model;
}

}  // namespace pathmon
