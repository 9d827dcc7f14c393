#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lop/ingest.hpp"

namespace lop::textpipe {

using TokenList = std::vector<std::string>;
using StopwordList = std::unordered_set<std::string>;
using LemmaExceptions = std::unordered_map<std::string, std::string>;

struct PreprocessOptions {
    StopwordList stopwords;                 // empty set = keep everything
    LemmaExceptions lemma_exceptions;       // merged over the built-in irregulars
    std::vector<std::string> drop_line_prefixes;  // header/footer filter
};

// Built-in aggressive English stopword list.
StopwordList default_stopwords();
StopwordList load_stopwords(const std::string& path);
StopwordList parse_stopwords(const std::string& text);

// Non-negative integers below 10^6 as space-separated English words;
// empty for anything else.
std::string number_to_words(long long n);

// Rule-based base-form reduction (plural stripping, -ing/-ed with
// consonant-doubling undo) over a small irregular table.
std::string lemmatize(const std::string& word, const LemmaExceptions& extra = {});

// Full pipeline: drop marked lines, lowercase, strip punctuation, expand
// numbers, tokenize on whitespace, lemmatize, remove stopwords.
TokenList preprocess(const std::string& raw_text, const PreprocessOptions& opts);

struct EmbeddingTable {
    std::size_t dim = 100;
    std::unordered_map<std::string, std::vector<double>> entries;
    std::vector<std::string> order;  // insertion order, for exact serialization
};

struct TextEmbedding {
    std::vector<double> vec;
    double coverage = 0.0;  // fraction of tokens found in the table
};

// Whitespace text format, one `word v1 ... v_dim` per line; dimension
// inferred from the first line. Duplicate words keep the first vector.
EmbeddingTable load_embeddings(const std::string& path, ingest::ParseReport& report);
EmbeddingTable parse_embeddings(const std::string& text, ingest::ParseReport& report);
std::string serialize_embeddings(const EmbeddingTable& table);

// Mean of in-vocabulary token vectors; zero vector when nothing matches.
TextEmbedding embed_text(const TokenList& tokens, const EmbeddingTable& table);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Componentwise sum over the question embeddings. Throws on empty input.
std::vector<double> quiz_sum(const std::vector<TextEmbedding>& quiz_embeddings);

}  // namespace lop::textpipe
