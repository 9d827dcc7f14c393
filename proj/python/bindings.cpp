#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "lop/eval.hpp"
#include "lop/features.hpp"
#include "lop/ingest.hpp"
#include "lop/models.hpp"
#include "lop/synth.hpp"
#include "lop/textpipe.hpp"

namespace py = pybind11;
using namespace lop;

namespace {

std::vector<ingest::ClickEvent> events_from_tuples(
    const std::vector<std::pair<std::string, std::int64_t>>& raw) {
    std::vector<ingest::ClickEvent> events;
    for (const auto& [kind, ts] : raw) {
        ingest::ClickEvent ev;
        if (!ingest::parse_kind(kind, ev.kind))
            throw std::invalid_argument("unknown event kind: " + kind);
        ev.timestamp_ms = ts;
        events.push_back(ev);
    }
    return events;
}

struct LoadedExperiment {
    features::FeatureMatrix fm;
    models::TextArtifacts text;
};

LoadedExperiment load_experiment(const std::string& clickstream, const std::string& course,
                                 const std::string& outcomes, const std::string& embeddings,
                                 const std::string& stopwords) {
    ingest::ParseReport report;
    const ingest::Dataset dataset = ingest::load_dataset(
        clickstream, ingest::ClickFormat::CSV, course, outcomes, report);
    if (!report.ok()) {
        std::string msg = "parse failed:";
        for (const auto& e : report.errors)
            msg += "\n  line " + std::to_string(e.line) + ": " + e.message;
        throw std::invalid_argument(msg);
    }
    LoadedExperiment out;
    out.fm = features::assemble_feature_matrix(dataset, {});
    if (!embeddings.empty()) {
        textpipe::PreprocessOptions opts;
        opts.stopwords = stopwords.empty() ? textpipe::default_stopwords()
                                           : textpipe::load_stopwords(stopwords);
        ingest::ParseReport emb_report;
        const auto table = textpipe::load_embeddings(embeddings, emb_report);
        if (!emb_report.ok()) throw std::invalid_argument("bad embedding file");
        std::vector<textpipe::TextEmbedding> quiz_vecs;
        for (const auto& seg : dataset.segments)
            out.text.segment_vecs.push_back(
                textpipe::embed_text(textpipe::preprocess(seg.raw_text, opts), table).vec);
        for (const auto& q : dataset.quiz)
            quiz_vecs.push_back(textpipe::embed_text(textpipe::preprocess(q.raw_text, opts), table));
        out.text.quiz_sum_vec = textpipe::quiz_sum(quiz_vecs);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Learner-outcome prediction core (clickstream features, text pipeline, models)";

    m.def(
        "time_spent",
        [](const std::vector<std::pair<std::string, std::int64_t>>& events) {
            return features::compute_time_spent(events_from_tuples(events));
        },
        py::arg("events"),
        "Net seconds on a segment from (kind, timestamp_ms) tuples sorted by time.");

    m.def(
        "view_count",
        [](const std::vector<std::pair<std::string, std::int64_t>>& events) {
            return features::compute_view_count(events_from_tuples(events));
        },
        py::arg("events"), "Completed enter->exit visits.");

    m.def(
        "engagement",
        [](double t, double n, double t_bar, double n_bar, double gamma, double alpha_t,
           double alpha_b) {
            features::SegmentStats stats{t_bar, n_bar};
            features::EngagementParams params{gamma, alpha_t, alpha_b};
            return features::compute_engagement(t, n, stats, params);
        },
        py::arg("t"), py::arg("n"), py::arg("t_bar"), py::arg("n_bar"), py::arg("gamma") = 1.0,
        py::arg("alpha_t") = 1.0, py::arg("alpha_b") = 1.0,
        "Segment engagement in [0, 1] from time and annotation counts.");

    m.def(
        "preprocess",
        [](const std::string& text, bool use_stopwords) {
            textpipe::PreprocessOptions opts;
            if (use_stopwords) opts.stopwords = textpipe::default_stopwords();
            return textpipe::preprocess(text, opts);
        },
        py::arg("text"), py::arg("use_stopwords") = true,
        "Lowercase, number-to-words, lemmatized tokens with stopwords removed.");

    m.def("lemmatize", [](const std::string& w) { return textpipe::lemmatize(w); }, py::arg("word"));
    m.def("number_to_words", &textpipe::number_to_words, py::arg("n"));
    m.def("cosine_similarity", &textpipe::cosine_similarity, py::arg("a"), py::arg("b"));

    m.def("auc", &eval::auc_roc, py::arg("scores"), py::arg("labels"),
          "Trapezoidal ROC AUC with tie handling.");
    m.def(
        "accuracy",
        [](const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
            return eval::accuracy(scores, labels, threshold);
        },
        py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5,
        "Fraction correct; a score at the threshold predicts pass.");

    m.def(
        "stratified_kfold",
        [](const std::vector<int>& labels, int k, std::uint64_t seed) {
            return eval::stratified_kfold(labels, k, seed).folds;
        },
        py::arg("labels"), py::arg("k") = 5, py::arg("seed") = 0,
        "Index folds with per-fold positive rates matching the global rate.");

    m.def(
        "generate_synth",
        [](const std::string& out_dir, int learners, int segments, int questions,
           double pass_rate, std::uint64_t seed) {
            synth::SynthConfig cfg;
            cfg.learners = learners;
            cfg.segments = segments;
            cfg.questions = questions;
            cfg.pass_rate_target = pass_rate;
            cfg.seed = seed;
            cfg.validate();
            return synth::write_files(synth::generate(cfg), out_dir);
        },
        py::arg("out_dir"), py::arg("learners") = 3000, py::arg("segments") = 35,
        py::arg("questions") = 10, py::arg("pass_rate") = 0.9, py::arg("seed") = 42,
        "Write a synthetic dataset and return the file paths.");

    m.def(
        "run_experiment",
        [](const std::string& clickstream, const std::string& course, const std::string& outcomes,
           const std::string& embeddings, const std::string& stopwords,
           const std::vector<std::string>& models, long epochs, std::uint64_t seed,
           double dropout_rate) {
            const LoadedExperiment loaded =
                load_experiment(clickstream, course, outcomes, embeddings, stopwords);
            eval::ExperimentConfig config;
            config.seed = seed;
            config.train.seed = seed;
            config.train.epochs = epochs;
            config.train.dropout_rate = dropout_rate;
            config.train.record_trace = false;
            const eval::EvalReport report =
                eval::run_experiment(loaded.fm, loaded.text, models, config);
            return eval::report_to_json(report);
        },
        py::arg("clickstream"), py::arg("course"), py::arg("outcomes"), py::arg("embeddings") = "",
        py::arg("stopwords") = "", py::arg("models") = std::vector<std::string>{"bnn"},
        py::arg("epochs") = 300, py::arg("seed") = 42, py::arg("dropout_rate") = 0.2,
        "Stratified K-fold evaluation; returns the report as a JSON string.");
}
