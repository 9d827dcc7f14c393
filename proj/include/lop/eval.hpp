#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lop/features.hpp"
#include "lop/gbc.hpp"
#include "lop/models.hpp"

namespace lop::eval {

struct FoldSplit {
    std::vector<std::vector<std::size_t>> folds;
    std::uint64_t seed = 0;
};

// Within-class shuffled round-robin assignment; every class must have at
// least K members.
FoldSplit stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed);

// Duplicates minority indices (with replacement) until the classes balance.
std::vector<std::size_t> oversample_minority(const std::vector<std::size_t>& train_indices,
                                             const std::vector<int>& labels, std::uint64_t seed);

// Ties at the threshold predict pass.
double accuracy(const std::vector<double>& probs, const std::vector<int>& labels,
                double threshold = 0.5);

// Trapezoidal ROC area; equals P(score_pos > score_neg) + 0.5 P(tie).
// Throws when only one class is present.
double auc_roc(const std::vector<double>& probs, const std::vector<int>& labels);

struct FoldMetrics {
    double accuracy = 0.0;
    double auc = 0.0;
    double ce_sum = 0.0;
    double ce_mean = 0.0;
};

struct ModelReport {
    std::string model;
    std::vector<FoldMetrics> folds;
    FoldMetrics mean;
    FoldMetrics stddev;
    std::vector<std::vector<models::EpochTrace>> traces;  // per fold
};

struct EvalReport {
    std::vector<ModelReport> models;
    int k = 5;
    std::uint64_t seed = 0;
    bool resampled = false;
    bool class_weighted = false;
};

struct ExperimentConfig {
    models::TrainConfig train;
    int k = 5;
    std::uint64_t seed = 42;
    bool resample = false;
    bool inverse_class_weights = false;
    double esn_threshold_override = -2.0;  // < -1 means use the median
    gbc::GbcConfig gbc;
};

// Per fold: fit normalization (and optional resampling) on the training
// rows only, train every requested model, score the held-out fold.
// model_names from {"bnn","esn","tbn","gbc"}.
EvalReport run_experiment(const features::FeatureMatrix& fm, const models::TextArtifacts& text,
                          const std::vector<std::string>& model_names,
                          const ExperimentConfig& config);

// The per-fold pipeline (normalize on train rows, optional resampling,
// train) followed by a parameter snapshot. Nothing outside `train_idx` may
// influence the result; the leakage test holds run_experiment to that.
std::string fit_fold_snapshot(const features::FeatureMatrix& fm, const models::TextArtifacts& text,
                              const std::string& model_name, const ExperimentConfig& config,
                              const std::vector<std::size_t>& train_idx, int fold,
                              std::size_t model_index);

struct SegmentStatsRow {
    int segment_id = 0;
    double mean_engagement = 0.0;
    double mean_views = 0.0;
    double mean_time = 0.0;
    double expected_time = 0.0;
};

std::vector<SegmentStatsRow> segment_stats_report(const ingest::Dataset& d,
                                                  const features::FeatureParams& params);

std::string report_to_csv(const EvalReport& report);
std::string report_to_json(const EvalReport& report);
std::string traces_to_csv(const ModelReport& mr);
std::string segment_stats_to_csv(const std::vector<SegmentStatsRow>& rows);

}  // namespace lop::eval
