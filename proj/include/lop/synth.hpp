#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lop/ingest.hpp"
#include "lop/textpipe.hpp"

namespace lop::synth {

struct SynthConfig {
    int learners = 3000;
    int segments = 35;
    int questions = 10;
    std::vector<int> relevant_segments;  // empty = first 8 (1-based ids)
    int words_per_segment = 12;
    int shared_words = 40;
    int embedding_dim = 16;
    double skill_noise = 0.2;        // learner-level noise on answer odds
    double pass_rate_target = 0.9;   // in (0,1)
    std::uint64_t seed = 42;

    std::vector<int> effective_relevant() const;
    void validate() const;  // throws std::invalid_argument
};

struct SynthOutput {
    ingest::Dataset dataset;
    textpipe::EmbeddingTable embeddings;
    std::vector<int> relevant_segments;
};

// Deterministic per seed. Quiz text draws mostly from the relevant
// segments' vocabulary; learner behavior on those segments tracks a latent
// skill that drives the quiz score.
SynthOutput generate(const SynthConfig& config);

struct PlantedCheck {
    double relevant_similarity_mean = 0.0;
    double other_similarity_mean = 0.0;      // NaN when every segment is relevant
    double similarity_gap = 0.0;
    double relevant_engagement_corr = 0.0;   // point-biserial vs labels
    double other_engagement_corr = 0.0;
    double shuffled_corr = 0.0;              // permutation control
    bool gap_applicable = true;
    double pass_rate = 0.0;

    std::string summary() const;
};

PlantedCheck planted_check(const SynthOutput& out, const SynthConfig& config);

// Writes clickstream.csv, course.txt, outcomes.csv, stopwords.txt and
// embeddings.txt into `dir` (created if missing).
std::vector<std::string> write_files(const SynthOutput& out, const std::string& dir);

}  // namespace lop::synth
