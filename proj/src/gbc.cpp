#include "lop/gbc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lop::gbc {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct SplitSearch {
    const Matrix& x;
    const std::vector<double>& residual;
    const std::vector<std::vector<std::size_t>>& sorted_order;  // per feature
    std::vector<char> in_node;
    int min_leaf;

    struct Best {
        bool found = false;
        std::size_t feature = 0;
        double split = 0.0;
        double score = -1.0;  // left_sum^2/left_n + right_sum^2/right_n
    };

    Best find(const std::vector<std::size_t>& rows) const {
        Best best;
        double total_sum = 0.0;
        for (std::size_t r : rows) total_sum += residual[r];
        const double n = static_cast<double>(rows.size());
        const double base = total_sum * total_sum / n;

        for (std::size_t f = 0; f < x.cols; ++f) {
            double left_sum = 0.0;
            long left_n = 0;
            double prev_value = 0.0;
            bool have_prev = false;
            for (std::size_t r : sorted_order[f]) {
                if (!in_node[r]) continue;
                const double value = x(r, f);
                if (have_prev && value > prev_value && left_n >= min_leaf &&
                    static_cast<long>(rows.size()) - left_n >= min_leaf) {
                    const double right_sum = total_sum - left_sum;
                    const double right_n = n - static_cast<double>(left_n);
                    const double score = left_sum * left_sum / static_cast<double>(left_n) +
                                         right_sum * right_sum / right_n;
                    // strictly-better keeps the lowest feature index and
                    // lowest split value on ties
                    if (score > best.score + 1e-12 && score > base + 1e-12) {
                        best.found = true;
                        best.feature = f;
                        best.split = 0.5 * (prev_value + value);
                        best.score = score;
                    }
                }
                left_sum += residual[r];
                left_n += 1;
                prev_value = value;
                have_prev = true;
            }
        }
        return best;
    }
};

int build_node(Tree& tree, SplitSearch& search, const std::vector<std::size_t>& rows, int depth,
               int max_depth) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double sum = 0.0;
    for (std::size_t r : rows) sum += search.residual[r];
    tree.nodes[idx].leaf_value = sum / static_cast<double>(rows.size());
    if (depth >= max_depth || rows.size() < 2) return idx;

    for (std::size_t r : rows) search.in_node[r] = 1;
    const SplitSearch::Best best = search.find(rows);
    for (std::size_t r : rows) search.in_node[r] = 0;
    if (!best.found) return idx;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows)
        (search.x(r, best.feature) <= best.split ? left : right).push_back(r);
    if (left.empty() || right.empty()) return idx;

    tree.nodes[idx].is_leaf = false;
    tree.nodes[idx].feature_index = best.feature;
    tree.nodes[idx].split_value = best.split;
    const int l = build_node(tree, search, left, depth + 1, max_depth);
    const int r = build_node(tree, search, right, depth + 1, max_depth);
    tree.nodes[idx].left = l;
    tree.nodes[idx].right = r;
    return idx;
}

}  // namespace

double Tree::predict(const Matrix& x, std::size_t row) const {
    int idx = 0;
    while (!nodes[idx].is_leaf)
        idx = x(row, nodes[idx].feature_index) <= nodes[idx].split_value ? nodes[idx].left
                                                                        : nodes[idx].right;
    return nodes[idx].leaf_value;
}

double GbcModel::score(const Matrix& x, std::size_t row) const {
    double s = base_score;
    for (const Tree& t : trees) s += shrinkage * t.predict(x, row);
    return s;
}

GbcModel gbc_fit(const Matrix& x, const std::vector<int>& labels, const GbcConfig& config,
                 std::vector<double>* loss_per_round) {
    if (x.rows != labels.size()) throw std::invalid_argument("gbc_fit: label count mismatch");
    if (config.shrinkage <= 0.0 || config.shrinkage > 1.0)
        throw std::invalid_argument("gbc_fit: shrinkage must be in (0,1]");
    if (config.n_trees < 0 || config.max_depth < 1)
        throw std::invalid_argument("gbc_fit: bad tree configuration");
    long pos = 0;
    for (int y : labels) pos += y;
    if (pos == 0 || pos == static_cast<long>(labels.size()))
        throw std::invalid_argument("gbc_fit: single-class input");

    GbcModel model;
    model.shrinkage = config.shrinkage;
    model.n_features = x.cols;
    const double p0 = static_cast<double>(pos) / static_cast<double>(labels.size());
    model.base_score = std::log(p0 / (1.0 - p0));

    std::vector<std::vector<std::size_t>> sorted_order(x.cols);
    for (std::size_t f = 0; f < x.cols; ++f) {
        sorted_order[f].resize(x.rows);
        std::iota(sorted_order[f].begin(), sorted_order[f].end(), 0);
        std::stable_sort(sorted_order[f].begin(), sorted_order[f].end(),
                         [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    }

    std::vector<double> score(x.rows, model.base_score);
    std::vector<double> residual(x.rows);
    std::vector<std::size_t> all(x.rows);
    std::iota(all.begin(), all.end(), 0);

    auto logistic_loss = [&]() {
        double loss = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i)
            loss += std::log1p(std::exp(score[i])) - labels[i] * score[i];
        return loss;
    };

    if (loss_per_round) loss_per_round->push_back(logistic_loss());
    for (int round = 0; round < config.n_trees; ++round) {
        for (std::size_t i = 0; i < x.rows; ++i) residual[i] = labels[i] - sigmoid(score[i]);
        Tree tree;
        SplitSearch search{x, residual, sorted_order, std::vector<char>(x.rows, 0), config.min_leaf};
        build_node(tree, search, all, 0, config.max_depth);
        for (std::size_t i = 0; i < x.rows; ++i) score[i] += config.shrinkage * tree.predict(x, i);
        model.trees.push_back(std::move(tree));
        if (loss_per_round) loss_per_round->push_back(logistic_loss());
    }
    return model;
}

std::vector<double> gbc_predict_proba(const GbcModel& model, const Matrix& x) {
    if (x.cols != model.n_features) throw std::invalid_argument("gbc_predict: feature count mismatch");
    std::vector<double> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = sigmoid(model.score(x, i));
    return out;
}

std::string gbc_to_json(const GbcModel& model) {
    nlohmann::json j;
    j["shrinkage"] = model.shrinkage;
    j["base_score"] = model.base_score;
    j["n_features"] = model.n_features;
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& n : t.nodes) {
            nodes.push_back({{"leaf", n.is_leaf},
                             {"feature_index", n.feature_index},
                             {"split", n.split_value},
                             {"value", n.leaf_value},
                             {"left", n.left},
                             {"right", n.right}});
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j.dump();
}

GbcModel gbc_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    GbcModel model;
    model.shrinkage = j.at("shrinkage").get<double>();
    model.base_score = j.at("base_score").get<double>();
    model.n_features = j.at("n_features").get<std::size_t>();
    for (const auto& jt : j.at("trees")) {
        Tree t;
        for (const auto& jn : jt) {
            TreeNode n;
            n.is_leaf = jn.at("leaf").get<bool>();
            n.feature_index = jn.at("feature_index").get<std::size_t>();
            n.split_value = jn.at("split").get<double>();
            n.leaf_value = jn.at("value").get<double>();
            n.left = jn.at("left").get<int>();
            n.right = jn.at("right").get<int>();
            t.nodes.push_back(n);
        }
        model.trees.push_back(std::move(t));
    }
    return model;
}

}  // namespace lop::gbc
