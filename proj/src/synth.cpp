#include "lop/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "lop/features.hpp"

namespace lop::synth {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Pronounceable lemma-stable token: CV syllables ending in a vowel, so no
// suffix rule of the lemmatizer ever fires on it.
std::string make_word(std::mt19937_64& rng) {
    static const char consonants[] = "bdfgklmnprtvz";
    static const char vowels[] = "aeiou";
    std::uniform_int_distribution<int> c(0, 12), v(0, 4), len(3, 4);
    std::string w;
    const int syllables = len(rng);
    for (int i = 0; i < syllables; ++i) {
        w += consonants[c(rng)];
        w += vowels[v(rng)];
    }
    return w;
}

std::vector<double> random_unit(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    double norm = 0.0;
    for (double& x : v) {
        x = n(rng);
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

// Probability that Binomial(q, p)/q >= 0.8.
double pass_probability(double p, int q) {
    const int need = static_cast<int>(std::ceil(0.8 * q - 1e-9));
    double prob = 0.0;
    for (int k = need; k <= q; ++k) {
        double term = 1.0;
        for (int i = 0; i < k; ++i) term *= (q - i) / static_cast<double>(i + 1);
        term *= std::pow(p, k) * std::pow(1.0 - p, q - k);
        prob += term;
    }
    return std::min(1.0, prob);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

}  // namespace

std::vector<int> SynthConfig::effective_relevant() const {
    if (!relevant_segments.empty()) return relevant_segments;
    std::vector<int> r;
    for (int s = 1; s <= std::min(8, segments); ++s) r.push_back(s);
    return r;
}

void SynthConfig::validate() const {
    if (learners < 1) throw std::invalid_argument("synth: learners must be >= 1");
    if (segments < 1) throw std::invalid_argument("synth: segments must be >= 1");
    if (questions < 1) throw std::invalid_argument("synth: questions must be >= 1");
    if (pass_rate_target <= 0.0 || pass_rate_target >= 1.0)
        throw std::invalid_argument("synth: pass_rate_target must be in (0,1)");
    if (skill_noise < 0.0) throw std::invalid_argument("synth: skill_noise must be >= 0");
    if (embedding_dim < 2) throw std::invalid_argument("synth: embedding_dim must be >= 2");
    const auto r = effective_relevant();
    if (r.empty()) throw std::invalid_argument("synth: relevant segment set is empty");
    for (int s : r)
        if (s < 1 || s > segments)
            throw std::invalid_argument("synth: relevant segment " + std::to_string(s) +
                                        " outside 1.." + std::to_string(segments));
}

SynthOutput generate(const SynthConfig& config) {
    config.validate();
    SynthOutput out;
    out.relevant_segments = config.effective_relevant();
    const int S = config.segments;
    const int Q = config.questions;
    const std::set<int> relevant(out.relevant_segments.begin(), out.relevant_segments.end());

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // --- vocabulary and embeddings ---
    const auto stop = textpipe::default_stopwords();
    std::unordered_set<std::string> used;
    auto fresh_word = [&]() {
        for (;;) {
            std::string w = make_word(rng);
            if (stop.count(w) || !used.insert(w).second) continue;
            return w;
        }
    };

    std::vector<std::vector<std::string>> segment_pool(S);
    std::vector<std::string> shared_pool;
    out.embeddings.dim = static_cast<std::size_t>(config.embedding_dim);
    for (int s = 0; s < S; ++s) {
        const std::vector<double> base = random_unit(rng, config.embedding_dim);
        for (int w = 0; w < config.words_per_segment; ++w) {
            const std::string word = fresh_word();
            std::vector<double> vec(base.size());
            for (std::size_t j = 0; j < vec.size(); ++j) vec[j] = base[j] + 0.35 * gauss(rng);
            segment_pool[s].push_back(word);
            out.embeddings.entries[word] = std::move(vec);
            out.embeddings.order.push_back(word);
        }
    }
    for (int w = 0; w < config.shared_words; ++w) {
        const std::string word = fresh_word();
        shared_pool.push_back(word);
        out.embeddings.entries[word] = random_unit(rng, config.embedding_dim);
        out.embeddings.order.push_back(word);
    }

    // --- course and quiz text ---
    for (int s = 0; s < S; ++s) {
        std::string text;
        for (int rep = 0; rep < 2; ++rep)
            for (const std::string& w : segment_pool[s]) text += w + " ";
        std::uniform_int_distribution<std::size_t> shared_pick(0, shared_pool.size() - 1);
        for (int w = 0; w < 4; ++w) text += shared_pool[shared_pick(rng)] + " ";
        if (!text.empty()) text.pop_back();
        out.dataset.segments.push_back({s + 1, text});
    }
    for (int q = 0; q < Q; ++q) {
        std::string text;
        std::uniform_int_distribution<std::size_t> rel_pick(0, out.relevant_segments.size() - 1);
        std::uniform_int_distribution<std::size_t> shared_pick(0, shared_pool.size() - 1);
        const int tokens = 10;
        for (int t = 0; t < tokens; ++t) {
            if (unif(rng) < 0.8) {  // >= 70% from the relevant pools
                const int seg = out.relevant_segments[rel_pick(rng)] - 1;
                std::uniform_int_distribution<std::size_t> word_pick(0, segment_pool[seg].size() - 1);
                text += segment_pool[seg][word_pick(rng)] + " ";
            } else {
                text += shared_pool[shared_pick(rng)] + " ";
            }
        }
        if (!text.empty()) text.pop_back();
        out.dataset.quiz.push_back({q + 1, text});
    }
    out.dataset.segment_count = S;
    out.dataset.question_count = Q;

    // --- learner behavior ---
    struct LearnerDraw {
        std::string id;
        double behavior_signal = 0.0;  // skill expressed through activity on R
    };
    std::vector<LearnerDraw> learners(config.learners);
    std::int64_t base_ts = 0;
    for (int u = 0; u < config.learners; ++u) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "u%05d", u + 1);
        learners[u].id = idbuf;
        const double skill = gauss(rng);
        const double nuisance = gauss(rng);
        // Beyond this point extra dwell time marks a struggling learner, so
        // the answer odds bend back down (tent shape). Linear models can only
        // track the average slope of this.
        const double knee = 0.67, fold_slope = 1.02;
        std::int64_t cursor = base_ts + static_cast<std::int64_t>(u) * 10'000'000LL;

        double signal_sum = 0.0;
        for (int s = 1; s <= S; ++s) {
            const bool rel = relevant.count(s) > 0;
            const double z = rel ? 0.9 * skill + 0.25 * gauss(rng) : 0.8 * nuisance + 0.4 * gauss(rng);
            if (rel) signal_sum += z <= knee ? z : knee - fold_slope * (z - knee);
            const double seconds = std::max(5.0, 60.0 + 25.0 * z);
            const int views = 1 + (unif(rng) < (rel ? sigmoid(z) * 0.4 : 0.2) ? 1 : 0);
            const double lambda = 0.4 * (rel ? std::exp(0.3 * z) : 1.0);
            std::poisson_distribution<int> notes(lambda);
            int annotations = notes(rng);

            for (int view = 0; view < views; ++view) {
                const std::int64_t dur =
                    std::max<std::int64_t>(1000, static_cast<std::int64_t>(
                        seconds * 1000.0 / views));
                out.dataset.events.push_back(
                    {learners[u].id, s, ingest::EventKind::Enter, cursor});
                if (view == 0)
                    for (int a = 0; a < annotations; ++a)
                        out.dataset.events.push_back({learners[u].id, s, ingest::EventKind::Annotate,
                                                      cursor + 1 + a});
                std::int64_t exit_ts = cursor + dur;
                if (unif(rng) < 0.25 && dur > 4000 && annotations < dur / 3 - 2) {
                    // off-task pause nested inside the visit; exit pushed so
                    // net time stays at `dur`
                    const std::int64_t off = dur / 4;
                    const std::int64_t bg = cursor + dur / 3;
                    out.dataset.events.push_back(
                        {learners[u].id, s, ingest::EventKind::Background, bg});
                    out.dataset.events.push_back(
                        {learners[u].id, s, ingest::EventKind::Foreground, bg + off});
                    exit_ts += off;
                }
                out.dataset.events.push_back({learners[u].id, s, ingest::EventKind::Exit, exit_ts});
                cursor = exit_ts + 500;
            }
        }
        learners[u].behavior_signal = signal_sum / static_cast<double>(out.relevant_segments.size());
    }

    // --- outcomes: calibrate the answer-odds offset to the pass-rate target ---
    std::vector<double> noise(config.learners);
    for (double& x : noise) x = config.skill_noise * gauss(rng);
    const double slope = 5.0;
    auto expected_pass_rate = [&](double offset) {
        double total = 0.0;
        for (int u = 0; u < config.learners; ++u) {
            const double p = sigmoid(slope * learners[u].behavior_signal + noise[u] + offset);
            total += pass_probability(p, Q);
        }
        return total / static_cast<double>(config.learners);
    };
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (expected_pass_rate(mid) < config.pass_rate_target ? lo : hi) = mid;
    }
    const double offset = 0.5 * (lo + hi);

    for (int u = 0; u < config.learners; ++u) {
        const double p = sigmoid(slope * learners[u].behavior_signal + noise[u] + offset);
        int correct = 0;
        for (int q = 0; q < Q; ++q) correct += unif(rng) < p ? 1 : 0;
        const double score = static_cast<double>(correct) / static_cast<double>(Q);
        out.dataset.outcomes.push_back({learners[u].id, score});
    }
    return out;
}

PlantedCheck planted_check(const SynthOutput& out, const SynthConfig& config) {
    PlantedCheck check;
    const std::set<int> relevant(out.relevant_segments.begin(), out.relevant_segments.end());

    textpipe::PreprocessOptions opts;
    opts.stopwords = textpipe::default_stopwords();
    std::vector<textpipe::TextEmbedding> seg_vecs, quiz_vecs;
    for (const auto& seg : out.dataset.segments)
        seg_vecs.push_back(textpipe::embed_text(textpipe::preprocess(seg.raw_text, opts),
                                                out.embeddings));
    for (const auto& q : out.dataset.quiz)
        quiz_vecs.push_back(textpipe::embed_text(textpipe::preprocess(q.raw_text, opts),
                                                 out.embeddings));
    const std::vector<double> qsum = textpipe::quiz_sum(quiz_vecs);

    double rel_sum = 0.0, other_sum = 0.0;
    long rel_n = 0, other_n = 0;
    for (std::size_t s = 0; s < seg_vecs.size(); ++s) {
        const double sim = textpipe::cosine_similarity(seg_vecs[s].vec, qsum);
        if (relevant.count(static_cast<int>(s) + 1)) {
            rel_sum += sim;
            ++rel_n;
        } else {
            other_sum += sim;
            ++other_n;
        }
    }
    check.relevant_similarity_mean = rel_n > 0 ? rel_sum / rel_n : 0.0;
    check.gap_applicable = other_n > 0;
    check.other_similarity_mean = other_n > 0 ? other_sum / other_n : 0.0;
    check.similarity_gap =
        check.gap_applicable ? check.relevant_similarity_mean - check.other_similarity_mean : 0.0;

    // engagement/label correlation
    features::FeatureParams fparams;
    const features::FeatureMatrix fm = features::assemble_feature_matrix(out.dataset, fparams);
    std::vector<double> labels(fm.labels.begin(), fm.labels.end());
    std::vector<double> rel_eng(fm.x.rows, 0.0), other_eng(fm.x.rows, 0.0);
    const int F = fm.features_per_segment;
    for (std::size_t u = 0; u < fm.x.rows; ++u) {
        long rn = 0, on = 0;
        for (int s = 0; s < fm.segment_count; ++s) {
            const double e = fm.x(u, static_cast<std::size_t>(s) * F + 3);
            if (relevant.count(s + 1)) {
                rel_eng[u] += e;
                ++rn;
            } else {
                other_eng[u] += e;
                ++on;
            }
        }
        if (rn > 0) rel_eng[u] /= rn;
        if (on > 0) other_eng[u] /= on;
    }
    check.relevant_engagement_corr = pearson(rel_eng, labels);
    check.other_engagement_corr = pearson(other_eng, labels);

    std::vector<double> shuffled = labels;
    std::mt19937_64 rng(config.seed ^ 0xC0FFEEULL);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    check.shuffled_corr = pearson(rel_eng, shuffled);

    double passes = 0.0;
    for (double y : labels) passes += y;
    check.pass_rate = labels.empty() ? 0.0 : passes / static_cast<double>(labels.size());
    return check;
}

std::string PlantedCheck::summary() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "planted check:\n"
                  "  pass rate                 %.4f\n"
                  "  similarity (relevant)     %.4f\n"
                  "  similarity (other)        %s\n"
                  "  similarity gap            %s\n"
                  "  engagement corr (rel)     %.4f\n"
                  "  engagement corr (other)   %.4f\n"
                  "  engagement corr (control) %.4f\n",
                  pass_rate, relevant_similarity_mean,
                  gap_applicable ? std::to_string(other_similarity_mean).c_str() : "n/a",
                  gap_applicable ? std::to_string(similarity_gap).c_str() : "n/a",
                  relevant_engagement_corr, other_engagement_corr, shuffled_corr);
    return buf;
}

std::vector<std::string> write_files(const SynthOutput& out, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& content) {
        const std::string path = (fs::path(dir) / name).string();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path);
        f << content;
        return path;
    };
    std::string stopword_text;
    {
        std::vector<std::string> words(textpipe::default_stopwords().begin(),
                                       textpipe::default_stopwords().end());
        std::sort(words.begin(), words.end());
        stopword_text = "# default aggressive english stopword list\n";
        for (const std::string& w : words) stopword_text += w + "\n";
    }
    return {
        write("clickstream.csv", ingest::clickstream_to_csv(out.dataset.events)),
        write("course.txt", ingest::course_text_to_string(out.dataset.segments, out.dataset.quiz)),
        write("outcomes.csv", ingest::outcomes_to_csv(out.dataset.outcomes)),
        write("stopwords.txt", stopword_text),
        write("embeddings.txt", textpipe::serialize_embeddings(out.embeddings)),
    };
}

}  // namespace lop::synth
