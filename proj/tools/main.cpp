#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lop/eval.hpp"
#include "lop/features.hpp"
#include "lop/ingest.hpp"
#include "lop/models.hpp"
#include "lop/synth.hpp"
#include "lop/textpipe.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;
constexpr int kExitTraining = 4;

struct CliError {
    int code;
    std::string message;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw CliError{kExitIo, "cannot open config file: " + path};
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw CliError{kExitValidation, "config is not valid JSON: " + path};
    return j;
}

template <typename T>
T get_or(const json& j, const std::string& section, const std::string& key, T fallback) {
    if (j.contains(section) && j[section].contains(key)) return j[section][key].get<T>();
    return fallback;
}

std::uint64_t resolve_seed(const json& config, std::optional<std::uint64_t> flag_seed) {
    if (flag_seed) return *flag_seed;
    if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
    throw CliError{kExitValidation, "a seed is required: pass --seed or set \"seed\" in the config"};
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CliError{kExitIo, "cannot write " + path};
    f << content;
}

lop::synth::SynthConfig synth_config_from(const json& config, std::uint64_t seed) {
    lop::synth::SynthConfig sc;
    sc.learners = get_or(config, "synth", "learners", sc.learners);
    sc.segments = get_or(config, "synth", "segments", sc.segments);
    sc.questions = get_or(config, "synth", "questions", sc.questions);
    sc.relevant_segments =
        get_or(config, "synth", "relevant_segments", std::vector<int>{});
    sc.pass_rate_target = get_or(config, "synth", "pass_rate_target", sc.pass_rate_target);
    sc.skill_noise = get_or(config, "synth", "skill_noise", sc.skill_noise);
    sc.embedding_dim = get_or(config, "synth", "embedding_dim", sc.embedding_dim);
    sc.words_per_segment = get_or(config, "synth", "words_per_segment", sc.words_per_segment);
    sc.shared_words = get_or(config, "synth", "shared_words", sc.shared_words);
    sc.seed = seed;
    return sc;
}

void print_table(const json& report) {
    std::printf("%-6s %-10s %-10s %-12s %-12s\n", "model", "accuracy", "auc", "ce_sum", "ce_mean");
    for (const auto& row : report.at("table")) {
        std::printf("%-6s %.3f±%.3f %.3f±%.3f %-12.4g %-12.4g\n",
                    row.at("model").get<std::string>().c_str(),
                    row.at("accuracy_mean").get<double>(), row.at("accuracy_std").get<double>(),
                    row.at("auc_mean").get<double>(), row.at("auc_std").get<double>(),
                    row.at("cross_entropy_sum_mean").get<double>(),
                    row.at("cross_entropy_mean_mean").get<double>());
    }
}

int cmd_synth(const json& config, std::uint64_t seed, const std::string& out_dir) {
    lop::synth::SynthConfig sc = synth_config_from(config, seed);
    try {
        sc.validate();
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid synth config: " << e.what() << "\n";
        return kExitIo;
    }
    const auto output = lop::synth::generate(sc);
    const auto files = lop::synth::write_files(output, out_dir);
    for (const std::string& f : files) std::cout << "wrote " << f << "\n";
    std::cout << lop::synth::planted_check(output, sc).summary();
    return 0;
}

int cmd_run(const json& config, std::uint64_t seed, const std::string& out_dir) {
    const std::string clicks = get_or<std::string>(config, "paths", "clickstream", "");
    const std::string course = get_or<std::string>(config, "paths", "course_text", "");
    const std::string outcomes = get_or<std::string>(config, "paths", "outcomes", "");
    const std::string embeddings = get_or<std::string>(config, "paths", "embeddings", "");
    const std::string stopwords = get_or<std::string>(config, "paths", "stopwords", "");
    const std::string format = get_or<std::string>(config, "paths", "format", "csv");
    if (clicks.empty() || course.empty() || outcomes.empty())
        throw CliError{kExitValidation,
                       "config must name paths.clickstream, paths.course_text and paths.outcomes"};

    const auto models = config.contains("models")
                            ? config["models"].get<std::vector<std::string>>()
                            : std::vector<std::string>{"bnn", "esn", "tbn", "gbc"};
    const bool needs_text =
        std::any_of(models.begin(), models.end(),
                    [](const std::string& m) { return m == "esn" || m == "tbn"; });
    if (needs_text && embeddings.empty())
        throw CliError{kExitValidation, "esn/tbn selected but paths.embeddings is not set"};
    if (needs_text && !fs::exists(embeddings))
        throw CliError{kExitValidation, "embedding file does not exist: " + embeddings};

    lop::ingest::ParseReport parse_report;
    const auto click_format =
        format == "jsonl" ? lop::ingest::ClickFormat::JSONL : lop::ingest::ClickFormat::CSV;
    lop::ingest::Dataset dataset =
        lop::ingest::load_dataset(clicks, click_format, course, outcomes, parse_report);
    for (const auto& e : parse_report.errors)
        std::cerr << "parse error (line " << e.line << "): " << e.message << "\n";
    if (!parse_report.ok()) return kExitValidation;

    const auto validation = lop::ingest::validate_dataset(dataset, true);
    std::cerr << "dataset: " << dataset.events.size() << " events, "
              << dataset.outcomes.size() << " outcomes, S=" << dataset.segment_count
              << ", Q=" << dataset.question_count << ", " << validation.warnings.size()
              << " validation warning(s)\n";

    lop::features::FeatureParams fparams;
    fparams.engagement.gamma = get_or(config, "features", "gamma", 1.0);
    fparams.engagement.alpha_t = get_or(config, "features", "alpha_t", 1.0);
    fparams.engagement.alpha_b = get_or(config, "features", "alpha_b", 1.0);
    fparams.include_expected_time = get_or(config, "features", "include_expected_time", false);
    const auto fm = lop::features::assemble_feature_matrix(dataset, fparams);
    for (const std::string& id : fm.excluded_learners)
        std::cerr << "excluded (no outcome): " << id << "\n";

    lop::models::TextArtifacts text;
    if (needs_text) {
        lop::textpipe::PreprocessOptions opts;
        opts.stopwords = stopwords.empty() ? lop::textpipe::default_stopwords()
                                           : lop::textpipe::load_stopwords(stopwords);
        lop::ingest::ParseReport emb_report;
        const auto table = lop::textpipe::load_embeddings(embeddings, emb_report);
        for (const auto& e : emb_report.errors)
            std::cerr << "embedding error (line " << e.line << "): " << e.message << "\n";
        if (!emb_report.ok()) return kExitValidation;
        std::vector<lop::textpipe::TextEmbedding> quiz_vecs;
        for (const auto& seg : dataset.segments)
            text.segment_vecs.push_back(
                lop::textpipe::embed_text(lop::textpipe::preprocess(seg.raw_text, opts), table).vec);
        for (const auto& q : dataset.quiz)
            quiz_vecs.push_back(
                lop::textpipe::embed_text(lop::textpipe::preprocess(q.raw_text, opts), table));
        text.quiz_sum_vec = lop::textpipe::quiz_sum(quiz_vecs);
    }

    lop::eval::ExperimentConfig ec;
    ec.seed = seed;
    ec.k = get_or(config, "eval", "k", 5);
    ec.resample = get_or(config, "eval", "resample", false);
    ec.inverse_class_weights = get_or(config, "eval", "class_weights", false);
    ec.esn_threshold_override = get_or(config, "eval", "esn_threshold", -2.0);
    ec.train.lr = get_or(config, "train", "lr", 0.005);
    ec.train.batch_size = get_or<std::size_t>(config, "train", "batch_size", 50);
    ec.train.epochs = get_or<long>(config, "train", "epochs", 2000);
    ec.train.hidden_dim = get_or<std::size_t>(config, "train", "hidden_dim", 8);
    ec.train.dropout_rate = get_or(config, "train", "dropout_rate", 0.2);
    ec.train.init_stddev = get_or(config, "train", "init_stddev", 0.1);
    ec.gbc.n_trees = get_or(config, "gbc", "n_trees", 200);
    ec.gbc.max_depth = get_or(config, "gbc", "max_depth", 2);
    ec.gbc.shrinkage = get_or(config, "gbc", "shrinkage", 0.1);

    lop::eval::EvalReport report;
    try {
        report = lop::eval::run_experiment(fm, text, models, ec);
    } catch (const std::exception& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return kExitTraining;
    }

    fs::create_directories(out_dir);
    write_text((fs::path(out_dir) / "report.csv").string(), lop::eval::report_to_csv(report));
    const std::string report_json = lop::eval::report_to_json(report);
    write_text((fs::path(out_dir) / "report.json").string(), report_json);
    for (const auto& mr : report.models)
        if (!mr.traces.empty() && !mr.traces.front().empty())
            write_text((fs::path(out_dir) / ("trace_" + mr.model + ".csv")).string(),
                       lop::eval::traces_to_csv(mr));
    write_text((fs::path(out_dir) / "segment_stats.csv").string(),
               lop::eval::segment_stats_to_csv(lop::eval::segment_stats_report(dataset, fparams)));
    write_text((fs::path(out_dir) / "features.csv").string(),
               lop::features::feature_matrix_to_csv(fm, false));

    print_table(json::parse(report_json));
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    using namespace lop::models;
    const int S = 4, F = 4;
    FeatureLayout layout{S, F};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    TextArtifacts text;
    const std::size_t dim = 6;
    text.quiz_sum_vec.resize(dim);
    for (double& x : text.quiz_sum_vec) x = gauss(rng);
    for (int s = 0; s < S; ++s) {
        std::vector<double> v(dim);
        for (double& x : v) x = gauss(rng);
        text.segment_vecs.push_back(v);
    }

    lop::Matrix x(6, layout.dims());
    for (double& v : x.v) v = gauss(rng);
    std::vector<int> labels = {0, 1, 1, 0, 1, 0};

    TrainConfig cfg;
    cfg.seed = seed;
    cfg.hidden_dim = 5;
    cfg.dropout_rate = 0.0;

    bool ok = true;
    for (ModelKind kind : {ModelKind::BNN, ModelKind::ESN, ModelKind::TBN}) {
        auto model = build_model(kind, layout, text, cfg, kind == ModelKind::ESN
                                                             ? std::optional<double>(-1.0)
                                                             : std::nullopt);
        const double err = lop::nnet::gradient_check(
            make_gradcheckable(*model, x, labels, {1.0, 2.0}));
        std::printf("%s  max relative gradient error: %.3g  %s\n", model_name(kind), err,
                    err < 1e-4 ? "ok" : "FAIL");
        ok = ok && err < 1e-4;
    }
    return ok ? 0 : 1;
}

int cmd_report(const std::string& out_dir) {
    const std::string path = (fs::path(out_dir) / "report.json").string();
    std::ifstream in(path);
    if (!in) throw CliError{kExitIo, "cannot open " + path + " (run `lop run` first)"};
    json report = json::parse(in, nullptr, false);
    if (report.is_discarded()) throw CliError{kExitValidation, "malformed report: " + path};
    print_table(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"learner outcome prediction pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed_flag;
    app.add_option("--config", config_path, "JSON config file")->capture_default_str();
    app.add_option("--seed", seed_flag, "run seed (overrides the config)");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* synth = app.add_subcommand("synth", "generate a synthetic course dataset");
    auto* run = app.add_subcommand("run", "ingest, featurize, train and evaluate");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of all architectures");
    auto* report = app.add_subcommand("report", "print the table from an existing report.json");

    CLI11_PARSE(app, argc, argv);

    try {
        const json config = load_config(config_path);
        if (synth->parsed()) return cmd_synth(config, resolve_seed(config, seed_flag), out_dir);
        if (run->parsed()) return cmd_run(config, resolve_seed(config, seed_flag), out_dir);
        if (gradcheck->parsed()) return cmd_gradcheck(seed_flag.value_or(42));
        if (report->parsed()) return cmd_report(out_dir);
    } catch (const CliError& e) {
        std::cerr << e.message << "\n";
        return e.code;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    }
    return 0;
}
