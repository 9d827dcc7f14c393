#include "lop/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lop::eval {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

struct FoldFit {
    std::vector<double> test_probs;
    std::vector<models::EpochTrace> trace;
    std::string snapshot;
};

// Single code path for fitting one model on one fold: normalization and
// resampling see the training rows only.
FoldFit fit_and_score(const features::FeatureMatrix& fm, const models::TextArtifacts& text,
                      const std::string& name, const ExperimentConfig& config,
                      const std::vector<std::size_t>& train_idx,
                      const std::vector<std::size_t>& test_idx, int fold, std::size_t model_index,
                      bool want_snapshot) {
    std::vector<double> mean, stddev;
    features::fit_normalization(fm.x, train_idx, mean, stddev);

    std::vector<std::size_t> fit_rows = train_idx;
    if (config.resample)
        fit_rows = oversample_minority(train_idx, fm.labels, mix(config.seed ^ (0xA5A5ULL + fold)));

    models::TrainConfig train_cfg = config.train;
    if (config.inverse_class_weights) {
        double pos = 0.0;
        for (std::size_t r : fit_rows) pos += fm.labels[r];
        const double n = static_cast<double>(fit_rows.size());
        train_cfg.class_weights = {n / (2.0 * (n - pos)), n / (2.0 * pos)};
    }

    auto normalize_rows = [&](const std::vector<std::size_t>& rows) {
        Matrix out(rows.size(), fm.x.cols);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < fm.x.cols; ++j)
                out(i, j) = stddev[j] > 0.0 ? (fm.x(rows[i], j) - mean[j]) / stddev[j] : 0.0;
        return out;
    };
    const Matrix x_train = normalize_rows(fit_rows);
    std::vector<int> y_train(fit_rows.size());
    for (std::size_t i = 0; i < fit_rows.size(); ++i) y_train[i] = fm.labels[fit_rows[i]];

    FoldFit result;
    if (name == "gbc") {
        gbc::GbcModel model = gbc::gbc_fit(x_train, y_train, config.gbc);
        if (!test_idx.empty())
            result.test_probs = gbc::gbc_predict_proba(model, normalize_rows(test_idx));
        if (want_snapshot) result.snapshot = gbc::gbc_to_json(model);
        return result;
    }
    models::ModelKind kind;
    if (name == "bnn") kind = models::ModelKind::BNN;
    else if (name == "esn") kind = models::ModelKind::ESN;
    else if (name == "tbn") kind = models::ModelKind::TBN;
    else throw std::invalid_argument("run_experiment: unknown model '" + name + "'");
    models::TrainConfig cfg = train_cfg;
    cfg.seed = mix(config.seed ^ mix(0x1000ULL * (model_index + 1) + 0x100ULL * fold));
    std::optional<double> thr;
    if (config.esn_threshold_override >= -1.0) thr = config.esn_threshold_override;
    models::FeatureLayout layout{fm.segment_count, fm.features_per_segment};
    auto model = models::build_model(kind, layout, text, cfg, thr);
    result.trace = models::train(*model, x_train, y_train, cfg);
    if (!test_idx.empty()) result.test_probs = model->predict_proba(normalize_rows(test_idx));
    if (want_snapshot) result.snapshot = models::save_model(*model);
    return result;
}

}  // namespace

FoldSplit stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_kfold: K must be >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    if (static_cast<int>(pos.size()) < k || static_cast<int>(neg.size()) < k)
        throw std::invalid_argument("stratified_kfold: a class has fewer members than K");

    FoldSplit split;
    split.seed = seed;
    split.folds.assign(k, {});
    std::mt19937_64 rng(seed);
    for (std::vector<std::size_t>* cls : {&pos, &neg}) {
        std::shuffle(cls->begin(), cls->end(), rng);
        for (std::size_t i = 0; i < cls->size(); ++i)
            split.folds[i % static_cast<std::size_t>(k)].push_back((*cls)[i]);
    }
    for (auto& fold : split.folds) std::sort(fold.begin(), fold.end());
    return split;
}

std::vector<std::size_t> oversample_minority(const std::vector<std::size_t>& train_indices,
                                             const std::vector<int>& labels, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t idx : train_indices) (labels[idx] == 1 ? pos : neg).push_back(idx);
    if (pos.empty() || neg.empty())
        throw std::invalid_argument("oversample_minority: single-class fold");
    std::vector<std::size_t> out = train_indices;
    std::vector<std::size_t>& minority = pos.size() < neg.size() ? pos : neg;
    const std::size_t target = std::max(pos.size(), neg.size());
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, minority.size() - 1);
    for (std::size_t i = minority.size(); i < target; ++i) out.push_back(minority[pick(rng)]);
    return out;
}

double accuracy(const std::vector<double>& probs, const std::vector<int>& labels, double threshold) {
    if (probs.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (probs.empty()) throw std::invalid_argument("accuracy: empty input");
    long correct = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const int pred = probs[i] >= threshold ? 1 : 0;  // ties predict pass
        correct += pred == labels[i];
    }
    return static_cast<double>(correct) / static_cast<double>(probs.size());
}

double auc_roc(const std::vector<double>& probs, const std::vector<int>& labels) {
    if (probs.size() != labels.size()) throw std::invalid_argument("auc_roc: length mismatch");
    double p = 0.0, n = 0.0;
    for (int y : labels) (y == 1 ? p : n) += 1.0;
    if (p == 0.0 || n == 0.0) throw std::invalid_argument("auc_roc: single-class input");

    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

    // sweep thresholds over tied-score groups and accumulate trapezoids
    double area = 0.0, tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double score = probs[order[i]];
        double dtp = 0.0, dfp = 0.0;
        while (i < order.size() && probs[order[i]] == score) {
            (labels[order[i]] == 1 ? dtp : dfp) += 1.0;
            ++i;
        }
        area += dfp * (tp + 0.5 * dtp);
        tp += dtp;
        fp += dfp;
    }
    return area / (p * n);
}

EvalReport run_experiment(const features::FeatureMatrix& fm, const models::TextArtifacts& text,
                          const std::vector<std::string>& model_names,
                          const ExperimentConfig& config) {
    EvalReport report;
    report.k = config.k;
    report.seed = config.seed;
    report.resampled = config.resample;
    report.class_weighted = config.inverse_class_weights;

    const FoldSplit split = stratified_kfold(fm.labels, config.k, config.seed);

    for (const std::string& name : model_names) {
        ModelReport mr;
        mr.model = name;
        report.models.push_back(mr);
    }

    for (int fold = 0; fold < config.k; ++fold) {
        const std::vector<std::size_t>& test_idx = split.folds[fold];
        std::vector<std::size_t> train_idx;
        for (int f = 0; f < config.k; ++f)
            if (f != fold)
                train_idx.insert(train_idx.end(), split.folds[f].begin(), split.folds[f].end());

        std::vector<int> y_test(test_idx.size());
        for (std::size_t i = 0; i < test_idx.size(); ++i) y_test[i] = fm.labels[test_idx[i]];

        for (std::size_t mi = 0; mi < model_names.size(); ++mi) {
            const std::string& name = model_names[mi];
            ModelReport& mr = report.models[mi];
            FoldFit fit = fit_and_score(fm, text, name, config, train_idx, test_idx, fold, mi,
                                        /*want_snapshot=*/false);
            std::vector<double>& probs = fit.test_probs;
            FoldMetrics metrics;
            metrics.accuracy = accuracy(probs, y_test);
            metrics.auc = auc_roc(probs, y_test);
            Matrix p2(probs.size(), 2);
            for (std::size_t i = 0; i < probs.size(); ++i) {
                p2(i, 0) = 1.0 - probs[i];
                p2(i, 1) = probs[i];
            }
            metrics.ce_sum = nnet::cross_entropy_sum(p2, y_test, {});
            metrics.ce_mean = metrics.ce_sum / static_cast<double>(y_test.size());
            mr.folds.push_back(metrics);
            mr.traces.push_back(std::move(fit.trace));
        }
    }

    for (ModelReport& mr : report.models) {
        const double n = static_cast<double>(mr.folds.size());
        auto agg = [&](auto get) {
            double sum = 0.0;
            for (const FoldMetrics& f : mr.folds) sum += get(f);
            const double mu = sum / n;
            double ss = 0.0;
            for (const FoldMetrics& f : mr.folds) ss += (get(f) - mu) * (get(f) - mu);
            const double sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
            return std::make_pair(mu, sd);
        };
        std::tie(mr.mean.accuracy, mr.stddev.accuracy) =
            agg([](const FoldMetrics& f) { return f.accuracy; });
        std::tie(mr.mean.auc, mr.stddev.auc) = agg([](const FoldMetrics& f) { return f.auc; });
        std::tie(mr.mean.ce_sum, mr.stddev.ce_sum) =
            agg([](const FoldMetrics& f) { return f.ce_sum; });
        std::tie(mr.mean.ce_mean, mr.stddev.ce_mean) =
            agg([](const FoldMetrics& f) { return f.ce_mean; });
    }
    return report;
}

std::string fit_fold_snapshot(const features::FeatureMatrix& fm, const models::TextArtifacts& text,
                              const std::string& model_name, const ExperimentConfig& config,
                              const std::vector<std::size_t>& train_idx, int fold,
                              std::size_t model_index) {
    return fit_and_score(fm, text, model_name, config, train_idx, {}, fold, model_index,
                         /*want_snapshot=*/true)
        .snapshot;
}

std::vector<SegmentStatsRow> segment_stats_report(const ingest::Dataset& d,
                                                  const features::FeatureParams& params) {
    std::vector<std::string> order;
    const auto behavior = features::extract_behavior(d, order);
    const auto stats = features::compute_segment_stats(behavior, d.segment_count);
    std::vector<SegmentStatsRow> rows(d.segment_count);
    const double n = behavior.empty() ? 1.0 : static_cast<double>(behavior.size());
    for (int s = 0; s < d.segment_count; ++s) {
        SegmentStatsRow& row = rows[s];
        row.segment_id = s + 1;
        row.expected_time = stats[s].t_bar;
        for (const auto& learner : behavior) {
            const features::BehaviorFeatures& f = learner[s];
            row.mean_time += f.t;
            row.mean_views += f.v;
            row.mean_engagement +=
                features::compute_engagement(f.t, f.n, stats[s], params.engagement);
        }
        row.mean_time /= n;
        row.mean_views /= n;
        row.mean_engagement /= n;
    }
    return rows;
}

std::string report_to_csv(const EvalReport& report) {
    std::string out = "model,fold,accuracy,auc,ce_sum,ce_mean\n";
    for (const ModelReport& mr : report.models) {
        for (std::size_t f = 0; f < mr.folds.size(); ++f) {
            const FoldMetrics& m = mr.folds[f];
            out += mr.model + "," + std::to_string(f + 1) + "," + fmt(m.accuracy) + "," +
                   fmt(m.auc) + "," + fmt(m.ce_sum) + "," + fmt(m.ce_mean) + "\n";
        }
    }
    return out;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["k"] = report.k;
    j["seed"] = report.seed;
    j["resampled"] = report.resampled;
    j["class_weighted"] = report.class_weighted;
    nlohmann::json table = nlohmann::json::array();
    for (const ModelReport& mr : report.models) {
        nlohmann::json row;
        row["model"] = mr.model;
        row["accuracy_mean"] = mr.mean.accuracy;
        row["accuracy_std"] = mr.stddev.accuracy;
        row["auc_mean"] = mr.mean.auc;
        row["auc_std"] = mr.stddev.auc;
        row["cross_entropy_sum_mean"] = mr.mean.ce_sum;
        row["cross_entropy_mean_mean"] = mr.mean.ce_mean;
        table.push_back(std::move(row));
    }
    j["table"] = std::move(table);
    return j.dump(2);
}

std::string traces_to_csv(const ModelReport& mr) {
    std::string out = "fold,epoch,loss,accuracy,auc\n";
    for (std::size_t f = 0; f < mr.traces.size(); ++f) {
        for (const models::EpochTrace& t : mr.traces[f]) {
            out += std::to_string(f + 1) + "," + std::to_string(t.epoch) + "," + fmt(t.loss) + "," +
                   fmt(t.accuracy) + "," + fmt(t.auc) + "\n";
        }
    }
    return out;
}

std::string segment_stats_to_csv(const std::vector<SegmentStatsRow>& rows) {
    std::string out = "segment_id,mean_engagement,mean_views,mean_time_spent,expected_time_spent\n";
    for (const SegmentStatsRow& r : rows) {
        out += std::to_string(r.segment_id) + "," + fmt(r.mean_engagement) + "," +
               fmt(r.mean_views) + "," + fmt(r.mean_time) + "," + fmt(r.expected_time) + "\n";
    }
    return out;
}

}  // namespace lop::eval
