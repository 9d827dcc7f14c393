#include "lop/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace lop::ingest {

namespace {

const char* const kKindNames[] = {"enter", "exit", "background", "foreground", "annotate"};

std::string read_file(const std::string& path, ParseReport& report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        report.errors.push_back({"cannot open file: " + path, 0});
        return {};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

bool parse_int(const std::string& s, long long& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e && !s.empty();
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

}  // namespace

const char* kind_name(EventKind k) { return kKindNames[static_cast<int>(k)]; }

bool parse_kind(const std::string& token, EventKind& out) {
    for (int i = 0; i < 5; ++i) {
        if (token == kKindNames[i]) {
            out = static_cast<EventKind>(i);
            return true;
        }
    }
    return false;
}

std::vector<ClickEvent> parse_clickstream_text(const std::string& text, ClickFormat format,
                                               ParseReport& report) {
    std::vector<ClickEvent> events;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (format == ClickFormat::CSV) {
            if (!header_seen) {
                header_seen = true;
                if (trim(line) != "learner_id,segment_id,kind,timestamp_ms")
                    report.errors.push_back({"unexpected clickstream CSV header", line_no});
                continue;
            }
            auto fields = split_csv_line(line);
            if (fields.size() != 4) {
                report.errors.push_back({"expected 4 fields, got " + std::to_string(fields.size()), line_no});
                continue;
            }
            ClickEvent ev;
            ev.learner_id = fields[0];
            long long seg = 0, ts = 0;
            if (!parse_int(fields[1], seg)) {
                report.errors.push_back({"non-numeric segment_id '" + fields[1] + "'", line_no});
                continue;
            }
            if (!parse_kind(fields[2], ev.kind)) {
                report.errors.push_back({"unknown event kind '" + fields[2] + "'", line_no});
                continue;
            }
            if (!parse_int(fields[3], ts) || ts < 0) {
                report.errors.push_back({"bad timestamp '" + fields[3] + "'", line_no});
                continue;
            }
            ev.segment_id = static_cast<int>(seg);
            ev.timestamp_ms = ts;
            events.push_back(std::move(ev));
        } else {
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                report.errors.push_back({"invalid JSON object", line_no});
                continue;
            }
            try {
                ClickEvent ev;
                ev.learner_id = j.at("learner_id").get<std::string>();
                ev.segment_id = j.at("segment_id").get<int>();
                const std::string kind = j.at("kind").get<std::string>();
                if (!parse_kind(kind, ev.kind)) {
                    report.errors.push_back({"unknown event kind '" + kind + "'", line_no});
                    continue;
                }
                ev.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
                if (ev.timestamp_ms < 0) {
                    report.errors.push_back({"negative timestamp", line_no});
                    continue;
                }
                events.push_back(std::move(ev));
            } catch (const nlohmann::json::exception& e) {
                report.errors.push_back({std::string("bad event record: ") + e.what(), line_no});
            }
        }
    }
    return events;
}

std::vector<ClickEvent> parse_clickstream(const std::string& path, ClickFormat format,
                                          ParseReport& report) {
    const std::string text = read_file(path, report);
    if (!report.ok()) return {};
    return parse_clickstream_text(text, format, report);
}

void parse_course_text_string(const std::string& text, std::vector<SegmentText>& segments,
                              std::vector<QuizText>& quiz, ParseReport& report) {
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    std::string* current_body = nullptr;
    std::set<int> seen_segments, seen_questions;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const bool is_seg = line.rfind("#SEGMENT ", 0) == 0;
        const bool is_q = line.rfind("#QUESTION ", 0) == 0;
        if (is_seg || is_q) {
            long long id = 0;
            if (!parse_int(trim(line.substr(is_seg ? 9 : 10)), id)) {
                report.errors.push_back({"bad block marker id", line_no});
                current_body = nullptr;
                continue;
            }
            if (is_seg) {
                if (!seen_segments.insert(static_cast<int>(id)).second) {
                    report.errors.push_back({"duplicate segment id " + std::to_string(id), line_no});
                    current_body = nullptr;
                    continue;
                }
                segments.push_back({static_cast<int>(id), ""});
                current_body = &segments.back().raw_text;
            } else {
                if (!seen_questions.insert(static_cast<int>(id)).second) {
                    report.errors.push_back({"duplicate question id " + std::to_string(id), line_no});
                    current_body = nullptr;
                    continue;
                }
                quiz.push_back({static_cast<int>(id), ""});
                current_body = &quiz.back().raw_text;
            }
        } else if (current_body) {
            if (!current_body->empty()) *current_body += '\n';
            *current_body += line;
        } else if (!trim(line).empty()) {
            report.errors.push_back({"text before first block marker", line_no});
        }
    }
    std::sort(segments.begin(), segments.end(),
              [](const SegmentText& a, const SegmentText& b) { return a.segment_id < b.segment_id; });
    std::sort(quiz.begin(), quiz.end(),
              [](const QuizText& a, const QuizText& b) { return a.question_id < b.question_id; });
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i].segment_id != static_cast<int>(i) + 1)
            report.errors.push_back({"segment ids are not contiguous 1..S (missing id " +
                                         std::to_string(i + 1) + ")",
                                     0});
        if (trim(segments[i].raw_text).empty())
            report.warnings.push_back(
                {"segment " + std::to_string(segments[i].segment_id) + " has empty text", 0});
    }
    for (std::size_t i = 0; i < quiz.size(); ++i) {
        if (quiz[i].question_id != static_cast<int>(i) + 1)
            report.errors.push_back({"question ids are not contiguous 1..Q (missing id " +
                                         std::to_string(i + 1) + ")",
                                     0});
    }
}

void parse_course_text(const std::string& path, std::vector<SegmentText>& segments,
                       std::vector<QuizText>& quiz, ParseReport& report) {
    const std::string text = read_file(path, report);
    if (!report.ok()) return;
    parse_course_text_string(text, segments, quiz, report);
}

std::vector<OutcomeRecord> parse_outcomes_text(const std::string& text, ParseReport& report) {
    std::vector<OutcomeRecord> out;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    bool header_seen = false;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (trim(line) != "learner_id,score")
                report.errors.push_back({"unexpected outcomes CSV header", line_no});
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 2) {
            report.errors.push_back({"expected 2 fields", line_no});
            continue;
        }
        double score = 0.0;
        if (!parse_double(fields[1], score) || score < 0.0 || score > 1.0) {
            report.errors.push_back({"bad score '" + fields[1] + "'", line_no});
            continue;
        }
        if (!seen.insert(fields[0]).second) {
            report.errors.push_back({"duplicate outcome for learner '" + fields[0] + "'", line_no});
            continue;
        }
        out.push_back({fields[0], score});
    }
    return out;
}

std::vector<OutcomeRecord> parse_outcomes(const std::string& path, ParseReport& report) {
    const std::string text = read_file(path, report);
    if (!report.ok()) return {};
    return parse_outcomes_text(text, report);
}

Dataset load_dataset(const std::string& clickstream_path, ClickFormat format,
                     const std::string& course_path, const std::string& outcomes_path,
                     ParseReport& report) {
    Dataset d;
    d.events = parse_clickstream(clickstream_path, format, report);
    parse_course_text(course_path, d.segments, d.quiz, report);
    d.outcomes = parse_outcomes(outcomes_path, report);
    d.segment_count = static_cast<int>(d.segments.size());
    d.question_count = static_cast<int>(d.quiz.size());
    return d;
}

ParseReport validate_dataset(const Dataset& d, bool strict) {
    ParseReport report;
    std::unordered_map<std::string, long> event_counts;
    for (const ClickEvent& ev : d.events) {
        event_counts[ev.learner_id] += 1;
        if (ev.segment_id < 1 || ev.segment_id > d.segment_count)
            report.errors.push_back({"event for learner '" + ev.learner_id + "' references segment " +
                                         std::to_string(ev.segment_id) + " outside 1.." +
                                         std::to_string(d.segment_count),
                                     0});
        if (ev.timestamp_ms < 0)
            report.errors.push_back({"negative timestamp for learner '" + ev.learner_id + "'", 0});
    }
    std::unordered_set<std::string> with_outcome;
    for (const OutcomeRecord& o : d.outcomes) {
        with_outcome.insert(o.learner_id);
        if (event_counts.find(o.learner_id) == event_counts.end())
            report.warnings.push_back(
                {"learner '" + o.learner_id + "' has an outcome but no activity", 0});
        if (strict) {
            const double scaled = o.score * 10.0;
            if (std::abs(scaled - std::round(scaled)) > 1e-8)
                report.warnings.push_back({"off-grid score " + fmt_double(o.score) + " for learner '" +
                                               o.learner_id + "'",
                                           0});
        }
    }
    // Deterministic order: learners sorted by id.
    std::vector<std::string> without_outcome;
    for (const auto& [id, n] : event_counts)
        if (with_outcome.find(id) == with_outcome.end()) without_outcome.push_back(id);
    std::sort(without_outcome.begin(), without_outcome.end());
    for (const std::string& id : without_outcome)
        report.warnings.push_back({"learner '" + id + "' has events but no outcome", 0});

    // Unmatched Enter/Exit pairs, per learner per segment.
    std::map<std::pair<std::string, int>, long> open_count;
    for (const ClickEvent& ev : d.events) {
        auto key = std::make_pair(ev.learner_id, ev.segment_id);
        if (ev.kind == EventKind::Enter) open_count[key] += 1;
        if (ev.kind == EventKind::Exit) open_count[key] -= 1;
    }
    for (const auto& [key, n] : open_count) {
        if (n != 0)
            report.warnings.push_back({"learner '" + key.first + "' segment " +
                                           std::to_string(key.second) + " has " +
                                           std::to_string(std::abs(n)) +
                                           (n > 0 ? " unmatched enter event(s)"
                                                  : " unmatched exit event(s)"),
                                       0});
    }
    return report;
}

std::string clickstream_to_csv(const std::vector<ClickEvent>& events) {
    std::string out = "learner_id,segment_id,kind,timestamp_ms\n";
    for (const ClickEvent& ev : events) {
        out += ev.learner_id;
        out += ',';
        out += std::to_string(ev.segment_id);
        out += ',';
        out += kind_name(ev.kind);
        out += ',';
        out += std::to_string(ev.timestamp_ms);
        out += '\n';
    }
    return out;
}

std::string clickstream_to_jsonl(const std::vector<ClickEvent>& events) {
    std::string out;
    for (const ClickEvent& ev : events) {
        nlohmann::json j;
        j["learner_id"] = ev.learner_id;
        j["segment_id"] = ev.segment_id;
        j["kind"] = kind_name(ev.kind);
        j["timestamp_ms"] = ev.timestamp_ms;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string course_text_to_string(const std::vector<SegmentText>& segments,
                                  const std::vector<QuizText>& quiz) {
    std::string out;
    for (const SegmentText& s : segments) {
        out += "#SEGMENT " + std::to_string(s.segment_id) + "\n";
        if (!s.raw_text.empty()) out += s.raw_text + "\n";
    }
    for (const QuizText& q : quiz) {
        out += "#QUESTION " + std::to_string(q.question_id) + "\n";
        if (!q.raw_text.empty()) out += q.raw_text + "\n";
    }
    return out;
}

std::string outcomes_to_csv(const std::vector<OutcomeRecord>& outcomes) {
    std::string out = "learner_id,score\n";
    for (const OutcomeRecord& o : outcomes) out += o.learner_id + "," + fmt_double(o.score) + "\n";
    return out;
}

}  // namespace lop::ingest
