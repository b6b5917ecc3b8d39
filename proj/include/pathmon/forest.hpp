#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace pathmon {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // rows with x[feature] <= threshold go left
    int left = -1;
    int right = -1;
    double value = 0.0;  // positive fraction of the node's training samples

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestHyper {
    int n_trees = 100;
    int max_depth = 12;  // 0: unlimited
    int min_samples_leaf = 5;
    int features_per_split = 0;  // 0: floor(sqrt(width)), at least 1
    std::uint64_t seed = 42;
    bool bootstrap = true;
    int threads = 0;  // 0: hardware concurrency

    friend bool operator==(const ForestHyper&, const ForestHyper&) = default;
};

struct RandomForestModel {
    ForestHyper hyper;
    Eigen::Index width = 0;
    std::vector<DecisionTree> trees;

    // Mean leaf value over trees.
    Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

// Gini impurity of a node holding `positive` out of `total` (weighted) samples.
double gini(double positive, double total);

// Every tree draws from its own generator seeded by (seed, tree index), so the
// forest does not depend on how trees are scheduled across threads.
RandomForestModel train_rf(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                           const ForestHyper& hyper = {});

// Trains a single tree on the given sample indices (duplicates allowed).
DecisionTree grow_tree(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                       std::vector<Eigen::Index> samples, const ForestHyper& hyper, std::uint64_t tree_seed);

}  // namespace pathmon
