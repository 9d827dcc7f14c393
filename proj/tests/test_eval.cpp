#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "lop/eval.hpp"

using namespace lop;
using namespace lop::eval;

namespace {

// Quadratic pairwise AUC: P(score_pos > score_neg) + 0.5 P(tie).
double auc_pairwise(const std::vector<double>& probs, const std::vector<int>& labels) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < probs.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (probs[i] > probs[j]) wins += 1.0;
            else if (probs[i] == probs[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

features::FeatureMatrix toy_feature_matrix(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    features::FeatureMatrix fm;
    fm.segment_count = 2;
    fm.features_per_segment = 4;
    fm.x = Matrix(n, 8);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        fm.labels.push_back(label);
        fm.learner_ids.push_back("u" + std::to_string(i));
        for (std::size_t j = 0; j < 8; ++j) fm.x(i, j) = g(rng);
        fm.x(i, 0) += label ? 1.2 : -1.2;
        fm.x(i, 3) += label ? 0.8 : -0.8;
    }
    fm.x_norm = fm.x;
    for (int s = 1; s <= 2; ++s)
        for (const char* f : {"time", "views", "annotations", "engagement"})
            fm.feature_names.push_back("seg" + std::to_string(s) + "_" + f);
    return fm;
}

models::TextArtifacts toy_text() {
    models::TextArtifacts text;
    text.segment_vecs = {{1.0, 0.2, 0.0}, {0.1, 1.0, 0.3}};
    text.quiz_sum_vec = {2.0, 1.0, 0.2};
    return text;
}

}  // namespace

TEST_CASE("stratified kfold") {
    SUBCASE("balanced twenty into five folds") {
        std::vector<int> labels(20);
        for (std::size_t i = 0; i < 20; ++i) labels[i] = static_cast<int>(i % 2);
        const FoldSplit split = stratified_kfold(labels, 5, 1);
        REQUIRE(split.folds.size() == 5);
        for (const auto& fold : split.folds) {
            CHECK(fold.size() == 4);
            int pos = 0;
            for (std::size_t i : fold) pos += labels[i];
            CHECK(pos == 2);
        }
    }
    SUBCASE("eleven positives and nine negatives spread evenly") {
        std::vector<int> labels(20, 0);
        for (int i = 0; i < 11; ++i) labels[i] = 1;
        const FoldSplit split = stratified_kfold(labels, 5, 9);
        for (const auto& fold : split.folds) {
            int pos = 0;
            for (std::size_t i : fold) pos += labels[i];
            CHECK(pos >= 2);
            CHECK(pos <= 3);
        }
    }
    SUBCASE("folds partition the index range") {
        std::vector<int> labels(37);
        std::mt19937_64 rng(4);
        int ones = 0;
        for (auto& l : labels) ones += (l = rng() % 2);
        REQUIRE(ones >= 5);
        REQUIRE(37 - ones >= 5);
        const FoldSplit split = stratified_kfold(labels, 5, 2);
        std::set<std::size_t> seen;
        for (const auto& fold : split.folds)
            for (std::size_t i : fold) CHECK(seen.insert(i).second);
        CHECK(seen.size() == 37);
    }
    SUBCASE("a class smaller than k is rejected") {
        std::vector<int> labels(20, 1);
        labels[0] = labels[1] = 0;
        CHECK_THROWS(stratified_kfold(labels, 5, 0));
    }
    SUBCASE("deterministic per seed") {
        std::vector<int> labels(30);
        for (std::size_t i = 0; i < 30; ++i) labels[i] = static_cast<int>(i % 2);
        CHECK(stratified_kfold(labels, 5, 3).folds == stratified_kfold(labels, 5, 3).folds);
        CHECK(stratified_kfold(labels, 5, 3).folds != stratified_kfold(labels, 5, 4).folds);
    }
}

TEST_CASE("oversample minority") {
    std::vector<int> labels(100, 1);
    for (int i = 0; i < 10; ++i) labels[i] = 0;
    std::vector<std::size_t> train(100);
    for (std::size_t i = 0; i < 100; ++i) train[i] = i;

    SUBCASE("classes come out balanced") {
        const auto resampled = oversample_minority(train, labels, 5);
        int pos = 0, neg = 0;
        for (std::size_t i : resampled) (labels[i] ? pos : neg) += 1;
        CHECK(pos == 90);
        CHECK(neg == 90);
        // only original indices are duplicated
        for (std::size_t i : resampled) CHECK(i < 100);
    }
    SUBCASE("already balanced input is unchanged") {
        std::vector<int> even(10);
        for (std::size_t i = 0; i < 10; ++i) even[i] = static_cast<int>(i % 2);
        std::vector<std::size_t> idx(10);
        for (std::size_t i = 0; i < 10; ++i) idx[i] = i;
        CHECK(oversample_minority(idx, even, 3) == idx);
    }
    SUBCASE("deterministic per seed") {
        CHECK(oversample_minority(train, labels, 7) == oversample_minority(train, labels, 7));
    }
}

TEST_CASE("accuracy") {
    CHECK(accuracy({0.9, 0.2, 0.7, 0.4}, {1, 0, 1, 0}) == 1.0);
    CHECK(accuracy({0.9, 0.2, 0.3, 0.4}, {1, 0, 1, 0}) == 0.75);
    // a tie at the threshold predicts pass
    CHECK(accuracy({0.5}, {1}) == 1.0);
    CHECK(accuracy({0.5}, {0}) == 0.0);
    // an all-pass predictor scores the prevalence
    const std::vector<int> labels = {1, 1, 1, 0, 1, 0, 1, 1, 0, 1};
    CHECK(accuracy(std::vector<double>(10, 1.0), labels) == doctest::Approx(0.7));
}

TEST_CASE("auc") {
    SUBCASE("hand examples") {
        CHECK(auc_roc({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0}) == doctest::Approx(1.0));
        CHECK(auc_roc({0.2, 0.3, 0.8, 0.9}, {1, 1, 0, 0}) == doctest::Approx(0.0));
        CHECK(auc_roc({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}) == doctest::Approx(0.5));
        CHECK(auc_roc({0.9, 0.5, 0.5, 0.1}, {1, 1, 0, 0}) == doctest::Approx(0.875));
    }
    SUBCASE("single-class input throws") {
        CHECK_THROWS(auc_roc({0.1, 0.9}, {1, 1}));
    }
    SUBCASE("matches the pairwise definition with heavy ties") {
        std::mt19937_64 rng(12);
        for (int trial = 0; trial < 60; ++trial) {
            std::vector<double> probs(80);
            std::vector<int> labels(80);
            bool both = false;
            for (std::size_t i = 0; i < 80; ++i) {
                // quantized scores force ties across and within classes
                probs[i] = static_cast<double>(rng() % 12) / 11.0;
                labels[i] = static_cast<int>(rng() % 2);
            }
            labels[0] = 0;
            labels[1] = 1;
            (void)both;
            CHECK(auc_roc(probs, labels) ==
                  doctest::Approx(auc_pairwise(probs, labels)).epsilon(1e-12));
        }
    }
    SUBCASE("invariant under strictly monotone score transforms") {
        std::mt19937_64 rng(13);
        std::vector<double> probs(50);
        std::vector<int> labels(50);
        for (std::size_t i = 0; i < 50; ++i) {
            probs[i] = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
            labels[i] = static_cast<int>(i % 2);
        }
        std::vector<double> squashed(50);
        for (std::size_t i = 0; i < 50; ++i) squashed[i] = std::log(probs[i] / (1 - probs[i]));
        CHECK(auc_roc(probs, labels) == doctest::Approx(auc_roc(squashed, labels)).epsilon(1e-12));
    }
}

TEST_CASE("run experiment") {
    const auto fm = toy_feature_matrix(60, 5);
    const auto text = toy_text();
    ExperimentConfig config;
    config.k = 5;
    config.seed = 11;
    config.train.epochs = 40;
    config.train.batch_size = 16;
    config.train.seed = 11;
    config.train.record_trace = false;
    config.gbc.n_trees = 30;

    SUBCASE("all four models produce complete reports") {
        const EvalReport report =
            run_experiment(fm, text, {"bnn", "esn", "tbn", "gbc"}, config);
        REQUIRE(report.models.size() == 4);
        for (const auto& mr : report.models) {
            REQUIRE(mr.folds.size() == 5);
            for (const auto& fold : mr.folds) {
                CHECK(fold.auc >= 0.0);
                CHECK(fold.auc <= 1.0);
                CHECK(fold.ce_sum >= fold.ce_mean);
                CHECK(fold.ce_mean > 0.0);
            }
            double mean_acc = 0.0;
            for (const auto& fold : mr.folds) mean_acc += fold.accuracy;
            CHECK(mr.mean.accuracy == doctest::Approx(mean_acc / 5.0));
        }
    }
    SUBCASE("repeat runs are identical") {
        const std::vector<std::string> names = {"bnn", "gbc"};
        const EvalReport a = run_experiment(fm, text, names, config);
        const EvalReport b = run_experiment(fm, text, names, config);
        CHECK(report_to_json(a) == report_to_json(b));
        CHECK(report_to_csv(a) == report_to_csv(b));
    }
    SUBCASE("a single-model list runs standalone") {
        const EvalReport report = run_experiment(fm, text, {"tbn"}, config);
        REQUIRE(report.models.size() == 1);
        CHECK(report.models[0].model == "tbn");
    }
    SUBCASE("csv has one line per model and fold plus the header") {
        const EvalReport report = run_experiment(fm, text, {"bnn"}, config);
        const std::string csv = report_to_csv(report);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 5);
        CHECK(csv.rfind("model,fold,accuracy,auc,ce_sum,ce_mean", 0) == 0);
    }
}
