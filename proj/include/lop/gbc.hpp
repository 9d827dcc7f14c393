#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lop/matrix.hpp"

namespace lop::gbc {

// One node of a shallow regression tree, stored as an array-backed binary
// tree. Leaves carry the fitted residual value.
struct TreeNode {
    bool is_leaf = true;
    std::size_t feature_index = 0;
    double split_value = 0.0;  // go left when x <= split_value
    double leaf_value = 0.0;
    int left = -1;
    int right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    double predict(const Matrix& x, std::size_t row) const;
};

struct GbcConfig {
    int n_trees = 200;
    int max_depth = 2;
    double shrinkage = 0.1;  // must be in (0, 1]
    int min_leaf = 1;
};

struct GbcModel {
    std::vector<Tree> trees;
    double shrinkage = 0.1;
    double base_score = 0.0;  // log-odds of the base rate
    std::size_t n_features = 0;

    // raw additive score before the sigmoid
    double score(const Matrix& x, std::size_t row) const;
};

// Stagewise fit of trees to the logistic-loss residual y - p, exact greedy
// splits on sorted feature values. Ties break on lowest feature index, then
// lowest split value. Throws on single-class input or invalid config.
GbcModel gbc_fit(const Matrix& x, const std::vector<int>& labels, const GbcConfig& config,
                 std::vector<double>* loss_per_round = nullptr);

std::vector<double> gbc_predict_proba(const GbcModel& model, const Matrix& x);

std::string gbc_to_json(const GbcModel& model);
GbcModel gbc_from_json(const std::string& text);

}  // namespace lop::gbc
