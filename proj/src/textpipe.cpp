#include "lop/textpipe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lop::textpipe {

namespace {

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool has_vowel(const std::string& s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return is_vowel(c) || c == 'y'; });
}

bool ends_with(const std::string& s, const char* suffix) {
    const std::size_t n = std::char_traits<char>::length(suffix);
    return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

const char* const kDefaultStopwords[] = {
    "a",     "about", "above", "after",  "again", "against", "all",   "am",    "an",    "and",
    "any",   "are",   "as",    "at",     "be",    "because", "been",  "before", "being", "below",
    "between", "both", "but",  "by",     "can",   "cannot",  "could", "did",   "do",    "does",
    "doing", "down",  "during", "each",  "few",   "for",     "from",  "further", "had",  "has",
    "have",  "having", "he",   "her",    "here",  "hers",    "herself", "him", "himself", "his",
    "how",   "i",     "if",    "in",     "into",  "is",      "it",    "its",   "itself", "just",
    "me",    "more",  "most",  "my",     "myself", "no",     "nor",   "not",   "now",   "of",
    "off",   "on",    "once",  "only",   "or",    "other",   "our",   "ours",  "ourselves", "out",
    "over",  "own",   "same",  "she",    "should", "so",     "some",  "such",  "than",  "that",
    "the",   "their", "theirs", "them",  "themselves", "then", "there", "these", "they", "this",
    "those", "through", "to",  "too",    "under", "until",   "up",    "very",  "was",   "we",
    "were",  "what",  "when",  "where",  "which", "while",   "who",   "whom",  "why",   "will",
    "with",  "would", "you",   "your",   "yours", "yourself", "yourselves",
};

const std::pair<const char*, const char*> kIrregularLemmas[] = {
    {"ran", "run"},       {"went", "go"},        {"gone", "go"},      {"made", "make"},
    {"said", "say"},      {"took", "take"},      {"taken", "take"},   {"gave", "give"},
    {"given", "give"},    {"wrote", "write"},    {"written", "write"}, {"saw", "see"},
    {"seen", "see"},      {"came", "come"},      {"got", "get"},      {"knew", "know"},
    {"known", "know"},    {"found", "find"},     {"thought", "think"}, {"taught", "teach"},
    {"understood", "understand"}, {"children", "child"}, {"men", "man"}, {"women", "woman"},
    {"people", "person"}, {"feet", "foot"},      {"teeth", "tooth"},  {"mice", "mouse"},
    {"better", "good"},   {"best", "good"},
};

const char* const kOnes[] = {"zero", "one",  "two", "three", "four",  "five",  "six",
                             "seven", "eight", "nine", "ten",  "eleven", "twelve", "thirteen",
                             "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
const char* const kTens[] = {"",      "",      "twenty", "thirty", "forty",
                             "fifty", "sixty", "seventy", "eighty", "ninety"};

std::string below_thousand(long long n) {
    std::string out;
    if (n >= 100) {
        out = std::string(kOnes[n / 100]) + " hundred";
        n %= 100;
        if (n > 0) out += ' ';
    }
    if (n >= 20) {
        out += kTens[n / 10];
        n %= 10;
        if (n > 0) out += std::string(" ") + kOnes[n];
    } else if (n > 0 || out.empty()) {
        out += kOnes[n];
    }
    return out;
}

}  // namespace

StopwordList default_stopwords() {
    StopwordList out;
    for (const char* w : kDefaultStopwords) out.insert(w);
    return out;
}

StopwordList parse_stopwords(const std::string& text) {
    StopwordList out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string word;
        while (ls >> word) out.insert(word);
    }
    return out;
}

StopwordList load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stopword file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_stopwords(ss.str());
}

std::string number_to_words(long long n) {
    if (n < 0 || n >= 1000000) return {};
    if (n < 1000) return below_thousand(n);
    std::string out = below_thousand(n / 1000) + " thousand";
    if (n % 1000 != 0) out += ' ' + below_thousand(n % 1000);
    return out;
}

std::string lemmatize(const std::string& word, const LemmaExceptions& extra) {
    if (auto it = extra.find(word); it != extra.end()) return it->second;
    for (const auto& [from, to] : kIrregularLemmas)
        if (word == from) return to;

    const std::size_t n = word.size();
    if (n >= 4 && ends_with(word, "ies")) return word.substr(0, n - 3) + "y";
    if (n >= 5 && ends_with(word, "sses")) return word.substr(0, n - 2);
    if (n >= 4 && ends_with(word, "es")) {
        const std::string base = word.substr(0, n - 2);
        if (ends_with(base, "s") || ends_with(base, "x") || ends_with(base, "z") ||
            ends_with(base, "ch") || ends_with(base, "sh"))
            return base;
        return word.substr(0, n - 1);  // notes -> note
    }
    if (n >= 3 && word.back() == 's' && !ends_with(word, "ss") && !ends_with(word, "us") &&
        !ends_with(word, "is"))
        return word.substr(0, n - 1);
    if (n >= 6 && ends_with(word, "ing")) {
        std::string stem = word.substr(0, n - 3);
        if (stem.size() >= 3 && has_vowel(stem)) {
            if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2] &&
                !is_vowel(stem.back()))
                stem.pop_back();
            return stem;
        }
        return word;
    }
    if (n >= 5 && ends_with(word, "ed")) {
        std::string stem = word.substr(0, n - 2);
        if (stem.size() >= 3 && has_vowel(stem)) {
            if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2] &&
                !is_vowel(stem.back()))
                stem.pop_back();
            return stem;
        }
        return word;
    }
    return word;
}

TokenList preprocess(const std::string& raw_text, const PreprocessOptions& opts) {
    // header/footer line filter
    std::string kept;
    {
        std::istringstream in(raw_text);
        std::string line;
        while (std::getline(in, line)) {
            bool drop = false;
            for (const std::string& prefix : opts.drop_line_prefixes)
                if (!prefix.empty() && line.rfind(prefix, 0) == 0) drop = true;
            if (!drop) {
                kept += line;
                kept += '\n';
            }
        }
    }

    // lowercase, punctuation -> space, digit runs isolated
    std::string cleaned;
    cleaned.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        char c = kept[i];
        if (is_ascii_alpha(c)) {
            cleaned += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (is_ascii_digit(c)) {
            if (!cleaned.empty() && cleaned.back() != ' ' && !is_ascii_digit(cleaned.back()))
                cleaned += ' ';
            cleaned += c;
            if (i + 1 < kept.size() && is_ascii_alpha(kept[i + 1])) cleaned += ' ';
        } else {
            cleaned += ' ';
        }
    }

    TokenList tokens;
    std::istringstream in(cleaned);
    std::string tok;
    while (in >> tok) {
        if (is_ascii_digit(tok[0])) {
            long long value = 0;
            bool overflow = tok.size() > 9;
            for (char c : tok) value = value * 10 + (c - '0');
            const std::string words = overflow ? std::string{} : number_to_words(value);
            if (words.empty()) continue;  // out-of-range numerics are dropped
            std::istringstream ws(words);
            std::string w;
            while (ws >> w) {
                const std::string lemma = lemmatize(w, opts.lemma_exceptions);
                if (opts.stopwords.find(lemma) == opts.stopwords.end()) tokens.push_back(lemma);
            }
            continue;
        }
        const std::string lemma = lemmatize(tok, opts.lemma_exceptions);
        if (opts.stopwords.find(lemma) == opts.stopwords.end()) tokens.push_back(lemma);
    }
    return tokens;
}

EmbeddingTable parse_embeddings(const std::string& text, ingest::ParseReport& report) {
    EmbeddingTable table;
    table.dim = 0;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        std::vector<double> vec;
        double x;
        while (ls >> x) vec.push_back(x);
        if (!ls.eof()) {
            report.errors.push_back({"non-numeric vector component", line_no});
            continue;
        }
        if (table.dim == 0) {
            if (vec.empty()) {
                report.errors.push_back({"first line has no vector components", line_no});
                continue;
            }
            table.dim = vec.size();
        } else if (vec.size() != table.dim) {
            report.errors.push_back({"inconsistent dimension " + std::to_string(vec.size()) +
                                         " (expected " + std::to_string(table.dim) + ")",
                                     line_no});
            continue;
        }
        auto [it, inserted] = table.entries.try_emplace(word, std::move(vec));
        if (!inserted) {
            report.warnings.push_back({"duplicate word '" + word + "', first vector kept", line_no});
        } else {
            table.order.push_back(word);
        }
    }
    if (table.dim == 0) table.dim = 100;
    return table;
}

EmbeddingTable load_embeddings(const std::string& path, ingest::ParseReport& report) {
    std::ifstream in(path);
    if (!in) {
        report.errors.push_back({"cannot open embedding file: " + path, 0});
        return {};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_embeddings(ss.str(), report);
}

std::string serialize_embeddings(const EmbeddingTable& table) {
    std::string out;
    char buf[64];
    for (const std::string& word : table.order) {
        out += word;
        for (double x : table.entries.at(word)) {
            std::snprintf(buf, sizeof(buf), " %.17g", x);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

TextEmbedding embed_text(const TokenList& tokens, const EmbeddingTable& table) {
    TextEmbedding out;
    out.vec.assign(table.dim, 0.0);
    if (tokens.empty()) return out;
    std::size_t found = 0;
    for (const std::string& tok : tokens) {
        const auto it = table.entries.find(tok);
        if (it == table.entries.end()) continue;
        ++found;
        for (std::size_t i = 0; i < table.dim; ++i) out.vec[i] += it->second[i];
    }
    out.coverage = static_cast<double>(found) / static_cast<double>(tokens.size());
    if (found > 0)
        for (double& x : out.vec) x /= static_cast<double>(found);
    return out;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> quiz_sum(const std::vector<TextEmbedding>& quiz_embeddings) {
    if (quiz_embeddings.empty()) throw std::invalid_argument("quiz_sum: empty question list");
    std::vector<double> out(quiz_embeddings.front().vec.size(), 0.0);
    for (const TextEmbedding& q : quiz_embeddings) {
        if (q.vec.size() != out.size()) throw std::invalid_argument("quiz_sum: dimension mismatch");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += q.vec[i];
    }
    return out;
}

}  // namespace lop::textpipe
