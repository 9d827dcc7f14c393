#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lop/gbc.hpp"

using namespace lop;
using namespace lop::gbc;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Matrix x(rows, cols);
    for (double& v : x.v) v = g(rng);
    return x;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("config validation") {
    Matrix x(4, 1);
    const std::vector<int> labels = {0, 1, 0, 1};
    GbcConfig config;
    SUBCASE("shrinkage outside (0,1] is rejected") {
        config.shrinkage = 0.0;
        CHECK_THROWS(gbc_fit(x, labels, config));
        config.shrinkage = 1.5;
        CHECK_THROWS(gbc_fit(x, labels, config));
    }
    SUBCASE("single-class labels are rejected") {
        CHECK_THROWS(gbc_fit(x, {1, 1, 1, 1}, config));
    }
}

TEST_CASE("constant features fall back to the base rate") {
    Matrix x(10, 3, 2.5);
    std::vector<int> labels(10, 0);
    for (int i = 0; i < 3; ++i) labels[i] = 1;
    GbcConfig config;
    config.n_trees = 25;
    const GbcModel model = gbc_fit(x, labels, config);
    CHECK(model.base_score == doctest::Approx(std::log(0.3 / 0.7)));
    const auto probs = gbc_predict_proba(model, x);
    for (double p : probs) CHECK(p == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("zero trees predict the prior") {
    GbcModel model;
    model.base_score = std::log(0.8 / 0.2);
    model.n_features = 2;
    const auto probs = gbc_predict_proba(model, Matrix(3, 2));
    for (double p : probs) CHECK(p == doctest::Approx(0.8));
}

TEST_CASE("single stump separates a separable problem") {
    const std::size_t n = 40;
    Matrix x = random_matrix(n, 3, 8);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = i % 2;
        x(i, 1) = labels[i] ? 2.0 + 0.2 * x(i, 1) : -2.0 + 0.2 * x(i, 1);
    }
    GbcConfig config;
    config.n_trees = 1;
    config.max_depth = 1;
    config.shrinkage = 1.0;
    const GbcModel model = gbc_fit(x, labels, config);
    REQUIRE(model.trees.size() == 1);
    CHECK(!model.trees[0].nodes[0].is_leaf);
    CHECK(model.trees[0].nodes[0].feature_index == 1);
    const auto probs = gbc_predict_proba(model, x);
    for (std::size_t i = 0; i < n; ++i)
        CHECK((probs[i] >= 0.5 ? 1 : 0) == labels[i]);
}

TEST_CASE("splits are invariant to monotone feature transforms") {
    const std::size_t n = 60;
    Matrix x = random_matrix(n, 2, 30);
    std::vector<int> labels(n);
    std::mt19937_64 rng(31);
    for (std::size_t i = 0; i < n; ++i)
        labels[i] = (x(i, 0) + 0.3 * x(i, 1) + 0.2 * std::normal_distribution<double>()(rng)) > 0.0;
    GbcConfig config;
    config.n_trees = 30;
    const GbcModel base = gbc_fit(x, labels, config);
    const auto pb = gbc_predict_proba(base, x);

    // strictly increasing reshaping of each feature keeps the split order
    Matrix warped = x;
    for (std::size_t i = 0; i < n; ++i) {
        warped(i, 0) = std::exp(x(i, 0));
        warped(i, 1) = std::atan(x(i, 1)) * 100.0;
    }
    const GbcModel reshaped = gbc_fit(warped, labels, config);
    const auto pw = gbc_predict_proba(reshaped, warped);
    for (std::size_t i = 0; i < n; ++i) CHECK(pb[i] == doctest::Approx(pw[i]).epsilon(1e-9));
}

TEST_CASE("logistic loss never increases over rounds") {
    const std::size_t n = 120;
    Matrix x = random_matrix(n, 5, 14);
    std::vector<int> labels(n);
    std::mt19937_64 rng(15);
    for (std::size_t i = 0; i < n; ++i)
        labels[i] = sigmoid(1.5 * x(i, 0) - x(i, 2)) > std::uniform_real_distribution<double>()(rng);
    GbcConfig config;  // 200 trees, depth 2, shrinkage 0.1
    std::vector<double> loss;
    const GbcModel model = gbc_fit(x, labels, config, &loss);
    REQUIRE(loss.size() == 201);  // prior, then one entry per round
    for (std::size_t r = 1; r < loss.size(); ++r) CHECK(loss[r] <= loss[r - 1] + 1e-12);
    CHECK(loss.back() < loss.front());
    CHECK(static_cast<int>(model.trees.size()) == config.n_trees);
}

TEST_CASE("json round trip") {
    const std::size_t n = 50;
    Matrix x = random_matrix(n, 4, 77);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = x(i, 3) > 0.2;
    GbcConfig config;
    config.n_trees = 40;
    const GbcModel model = gbc_fit(x, labels, config);
    const GbcModel round = gbc_from_json(gbc_to_json(model));
    CHECK(round.base_score == model.base_score);
    CHECK(round.shrinkage == model.shrinkage);
    CHECK(round.n_features == model.n_features);
    REQUIRE(round.trees.size() == model.trees.size());
    const auto pa = gbc_predict_proba(model, x);
    const auto pb = gbc_predict_proba(round, x);
    for (std::size_t i = 0; i < n; ++i) CHECK(pa[i] == pb[i]);
}
