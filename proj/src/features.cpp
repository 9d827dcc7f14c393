#include "lop/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

namespace lop::features {

using ingest::ClickEvent;
using ingest::EventKind;

namespace {

struct Visit {
    std::int64_t enter_ms;
    std::int64_t exit_ms;
    std::int64_t offtask_ms;
};

// Walks one segment's sorted events into completed visits. Dangling enters
// are dropped; overlapping off-task intervals clamp at the visit boundary.
std::vector<Visit> visits_from_events(const std::vector<ClickEvent>& events) {
    std::vector<Visit> visits;
    bool open = false;
    std::int64_t enter_ms = 0, offtask = 0, bg_start = -1;
    for (const ClickEvent& ev : events) {
        switch (ev.kind) {
            case EventKind::Enter:
                if (open) {
                    // re-enter closes the previous visit at this timestamp
                    if (bg_start >= 0) offtask += ev.timestamp_ms - bg_start;
                    visits.push_back({enter_ms, ev.timestamp_ms, offtask});
                }
                open = true;
                enter_ms = ev.timestamp_ms;
                offtask = 0;
                bg_start = -1;
                break;
            case EventKind::Exit:
                if (open) {
                    if (bg_start >= 0) offtask += ev.timestamp_ms - bg_start;
                    visits.push_back({enter_ms, ev.timestamp_ms, offtask});
                    open = false;
                    bg_start = -1;
                }
                break;
            case EventKind::Background:
                if (open && bg_start < 0) bg_start = ev.timestamp_ms;
                break;
            case EventKind::Foreground:
                if (open && bg_start >= 0) {
                    offtask += ev.timestamp_ms - bg_start;
                    bg_start = -1;
                }
                break;
            case EventKind::Annotate:
                break;
        }
    }
    return visits;
}

double seconds_from_visits(const std::vector<Visit>& visits) {
    double total = 0.0;
    for (const Visit& v : visits) {
        const double dur = static_cast<double>(v.exit_ms - v.enter_ms - v.offtask_ms) / 1000.0;
        total += std::max(0.0, dur);
    }
    return total;
}

}  // namespace

double compute_time_spent(const std::vector<ClickEvent>& events) {
    return seconds_from_visits(visits_from_events(events));
}

int compute_view_count(const std::vector<ClickEvent>& events) {
    return static_cast<int>(visits_from_events(events).size());
}

double compute_engagement(double t, double n, const SegmentStats& stats, const EngagementParams& p) {
    const double time_term = std::pow((1.0 + t / stats.t_bar) / 2.0, p.alpha_t);
    const double note_term = std::pow((1.0 + n / stats.n_bar) / 2.0, p.alpha_b);
    return std::min(p.gamma * time_term * note_term, 1.0);
}

std::vector<std::vector<BehaviorFeatures>> extract_behavior(const ingest::Dataset& d,
                                                            std::vector<std::string>& learner_order) {
    const int S = d.segment_count;
    std::unordered_map<std::string, std::size_t> index;
    learner_order.clear();
    std::vector<std::vector<ClickEvent>> per_learner;
    for (const ClickEvent& ev : d.events) {
        auto [it, inserted] = index.try_emplace(ev.learner_id, per_learner.size());
        if (inserted) {
            learner_order.push_back(ev.learner_id);
            per_learner.emplace_back();
        }
        per_learner[it->second].push_back(ev);
    }

    std::vector<std::vector<BehaviorFeatures>> out(per_learner.size(),
                                                   std::vector<BehaviorFeatures>(S));
    for (std::size_t u = 0; u < per_learner.size(); ++u) {
        std::vector<ClickEvent>& evs = per_learner[u];
        std::stable_sort(evs.begin(), evs.end(), [](const ClickEvent& a, const ClickEvent& b) {
            return a.timestamp_ms < b.timestamp_ms;
        });
        // Close unmatched enters at the learner's next event on any other
        // segment by injecting a synthetic exit there.
        std::vector<ClickEvent> closed;
        closed.reserve(evs.size());
        int open_segment = 0;  // 0 = none
        std::int64_t last_seen = 0;
        for (const ClickEvent& ev : evs) {
            if (open_segment != 0 && ev.segment_id != open_segment) {
                closed.push_back({ev.learner_id, open_segment, EventKind::Exit, ev.timestamp_ms});
                open_segment = 0;
            }
            if (ev.kind == EventKind::Enter) open_segment = ev.segment_id;
            if (ev.kind == EventKind::Exit && ev.segment_id == open_segment) open_segment = 0;
            closed.push_back(ev);
            last_seen = ev.timestamp_ms;
        }
        (void)last_seen;  // a dangling final enter stays unmatched and is dropped

        std::vector<std::vector<ClickEvent>> per_segment(S);
        for (const ClickEvent& ev : closed) {
            if (ev.segment_id < 1 || ev.segment_id > S) continue;
            per_segment[ev.segment_id - 1].push_back(ev);
            if (ev.kind == EventKind::Annotate) out[u][ev.segment_id - 1].n += 1.0;
        }
        for (int s = 0; s < S; ++s) {
            const auto visits = visits_from_events(per_segment[s]);
            out[u][s].t = seconds_from_visits(visits);
            out[u][s].v = static_cast<double>(visits.size());
        }
    }
    return out;
}

std::vector<SegmentStats> compute_segment_stats(
    const std::vector<std::vector<BehaviorFeatures>>& behavior, int segment_count) {
    std::vector<SegmentStats> stats(segment_count);
    double course_time_sum = 0.0;
    long course_time_n = 0;
    double note_sum = 0.0;
    long note_n = 0;
    for (int s = 0; s < segment_count; ++s) {
        double t_sum = 0.0;
        long t_n = 0;
        for (const auto& learner : behavior) {
            const BehaviorFeatures& f = learner[s];
            if (f.t > 0.0) {
                t_sum += f.t;
                ++t_n;
            }
            if (f.t > 0.0 || f.v > 0.0 || f.n > 0.0) {
                note_sum += f.n;
                ++note_n;
            }
        }
        stats[s].t_bar = t_n > 0 ? t_sum / static_cast<double>(t_n) : 0.0;
        course_time_sum += t_sum;
        course_time_n += t_n;
    }
    const double course_mean_t = course_time_n > 0 ? course_time_sum / course_time_n : 0.0;
    const double t_floor = course_mean_t > 0.0 ? 1e-6 * course_mean_t : 1.0;
    const double n_bar_raw = note_n > 0 ? note_sum / static_cast<double>(note_n) : 0.0;
    const double n_floor = n_bar_raw > 0.0 ? 1e-6 * n_bar_raw : 1.0;
    for (SegmentStats& st : stats) {
        if (st.t_bar <= 0.0) st.t_bar = t_floor;
        st.n_bar = n_bar_raw > 0.0 ? n_bar_raw : n_floor;
    }
    return stats;
}

FeatureMatrix assemble_feature_matrix(const ingest::Dataset& d, const FeatureParams& params) {
    FeatureMatrix fm;
    fm.segment_count = d.segment_count;
    fm.features_per_segment = params.include_expected_time ? 5 : 4;

    std::vector<std::string> event_order;
    const auto behavior = extract_behavior(d, event_order);
    std::unordered_map<std::string, std::size_t> behavior_index;
    for (std::size_t i = 0; i < event_order.size(); ++i) behavior_index[event_order[i]] = i;
    const auto stats = compute_segment_stats(behavior, d.segment_count);

    std::unordered_map<std::string, double> score_of;
    for (const auto& o : d.outcomes) score_of[o.learner_id] = o.score;
    for (const std::string& id : event_order)
        if (score_of.find(id) == score_of.end()) fm.excluded_learners.push_back(id);

    const int S = d.segment_count;
    const int F = fm.features_per_segment;
    const std::size_t D = static_cast<std::size_t>(S) * F;
    for (int s = 1; s <= S; ++s) {
        const std::string prefix = "seg" + std::to_string(s) + "_";
        fm.feature_names.push_back(prefix + "time");
        fm.feature_names.push_back(prefix + "views");
        fm.feature_names.push_back(prefix + "annotations");
        fm.feature_names.push_back(prefix + "engagement");
        if (params.include_expected_time) fm.feature_names.push_back(prefix + "expected_time");
    }

    fm.x = Matrix(d.outcomes.size(), D);
    for (std::size_t u = 0; u < d.outcomes.size(); ++u) {
        const auto& outcome = d.outcomes[u];
        fm.learner_ids.push_back(outcome.learner_id);
        fm.labels.push_back(outcome.score >= params.pass_cutoff ? 1 : 0);
        const auto it = behavior_index.find(outcome.learner_id);
        for (int s = 0; s < S; ++s) {
            BehaviorFeatures f;  // zero activity when the learner has no events
            if (it != behavior_index.end()) f = behavior[it->second][s];
            f.e = compute_engagement(f.t, f.n, stats[s], params.engagement);
            const std::size_t base = static_cast<std::size_t>(s) * F;
            fm.x(u, base + 0) = f.t;
            fm.x(u, base + 1) = f.v;
            fm.x(u, base + 2) = f.n;
            fm.x(u, base + 3) = f.e;
            if (params.include_expected_time) fm.x(u, base + 4) = stats[s].t_bar;
        }
    }

    std::vector<std::size_t> all_rows(fm.x.rows);
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
    fit_normalization(fm.x, all_rows, fm.norm_mean, fm.norm_std);
    fm.x_norm = apply_normalization(fm.x, fm.norm_mean, fm.norm_std);
    return fm;
}

void fit_normalization(const Matrix& x, const std::vector<std::size_t>& fit_rows,
                       std::vector<double>& mean, std::vector<double>& stddev) {
    mean.assign(x.cols, 0.0);
    stddev.assign(x.cols, 0.0);
    if (fit_rows.empty()) return;
    const double n = static_cast<double>(fit_rows.size());
    for (std::size_t j = 0; j < x.cols; ++j) {
        double sum = 0.0;
        for (std::size_t r : fit_rows) sum += x(r, j);
        const double mu = sum / n;
        double ss = 0.0;
        for (std::size_t r : fit_rows) {
            const double dxx = x(r, j) - mu;
            ss += dxx * dxx;
        }
        mean[j] = mu;
        stddev[j] = std::sqrt(ss / n);
    }
}

Matrix apply_normalization(const Matrix& x, const std::vector<double>& mean,
                           const std::vector<double>& stddev) {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
            out(i, j) = stddev[j] > 0.0 ? (x(i, j) - mean[j]) / stddev[j] : 0.0;
    return out;
}

std::string feature_matrix_to_csv(const FeatureMatrix& fm, bool normalized) {
    std::string out = "learner_id";
    for (const std::string& name : fm.feature_names) out += "," + name;
    out += ",label\n";
    const Matrix& x = normalized ? fm.x_norm : fm.x;
    char buf[64];
    for (std::size_t i = 0; i < x.rows; ++i) {
        out += fm.learner_ids[i];
        for (std::size_t j = 0; j < x.cols; ++j) {
            std::snprintf(buf, sizeof(buf), ",%.12g", x(i, j));
            out += buf;
        }
        out += "," + std::to_string(fm.labels[i]) + "\n";
    }
    return out;
}

}  // namespace lop::features
