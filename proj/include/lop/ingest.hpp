#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lop::ingest {

enum class EventKind { Enter, Exit, Background, Foreground, Annotate };

const char* kind_name(EventKind k);  // lowercase wire spelling
bool parse_kind(const std::string& token, EventKind& out);

struct ClickEvent {
    std::string learner_id;
    int segment_id = 0;  // 1-based
    EventKind kind = EventKind::Enter;
    std::int64_t timestamp_ms = 0;

    bool operator==(const ClickEvent&) const = default;
};

struct SegmentText {
    int segment_id = 0;
    std::string raw_text;
    bool operator==(const SegmentText&) const = default;
};

struct QuizText {
    int question_id = 0;
    std::string raw_text;
    bool operator==(const QuizText&) const = default;
};

struct OutcomeRecord {
    std::string learner_id;
    double score = 0.0;  // in [0,1]
    bool operator==(const OutcomeRecord&) const = default;
};

struct Dataset {
    std::vector<ClickEvent> events;
    std::vector<SegmentText> segments;
    std::vector<QuizText> quiz;
    std::vector<OutcomeRecord> outcomes;
    int segment_count = 0;
    int question_count = 0;
};

// One parse/validation problem, tied to its source line where known.
struct Issue {
    std::string message;
    long line = 0;  // 0 when not line-based
};

struct ParseReport {
    std::vector<Issue> errors;
    std::vector<Issue> warnings;
    bool ok() const { return errors.empty(); }
};

enum class ClickFormat { CSV, JSONL };

// Malformed rows are collected into `report`, never silently dropped.
std::vector<ClickEvent> parse_clickstream(const std::string& path, ClickFormat format,
                                          ParseReport& report);
std::vector<ClickEvent> parse_clickstream_text(const std::string& text, ClickFormat format,
                                               ParseReport& report);

// Course text: `#SEGMENT <id>` / `#QUESTION <id>` markers begin blocks.
void parse_course_text(const std::string& path, std::vector<SegmentText>& segments,
                       std::vector<QuizText>& quiz, ParseReport& report);
void parse_course_text_string(const std::string& text, std::vector<SegmentText>& segments,
                              std::vector<QuizText>& quiz, ParseReport& report);

std::vector<OutcomeRecord> parse_outcomes(const std::string& path, ParseReport& report);
std::vector<OutcomeRecord> parse_outcomes_text(const std::string& text, ParseReport& report);

// Loads all three inputs and fills in S and Q.
Dataset load_dataset(const std::string& clickstream_path, ClickFormat format,
                     const std::string& course_path, const std::string& outcomes_path,
                     ParseReport& report);

// Pure consistency check; all findings are report entries, never exceptions.
ParseReport validate_dataset(const Dataset& d, bool strict);

// Canonical writers for the same formats (round-trip with the parsers).
std::string clickstream_to_csv(const std::vector<ClickEvent>& events);
std::string clickstream_to_jsonl(const std::vector<ClickEvent>& events);
std::string course_text_to_string(const std::vector<SegmentText>& segments,
                                  const std::vector<QuizText>& quiz);
std::string outcomes_to_csv(const std::vector<OutcomeRecord>& outcomes);

}  // namespace lop::ingest
