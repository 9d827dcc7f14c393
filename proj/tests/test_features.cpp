#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lop/features.hpp"

using namespace lop;
using namespace lop::features;
using ingest::ClickEvent;
using ingest::EventKind;

namespace {

ClickEvent ev(EventKind kind, std::int64_t ms, int seg = 1, const std::string& id = "u") {
    return {id, seg, kind, ms};
}

// Millisecond-resolution replay: a learner accrues time while inside an
// enter..exit window and not backgrounded. Used as an independent oracle for
// compute_time_spent on well-formed sequences.
double sweep_time_seconds(const std::vector<ClickEvent>& events) {
    if (events.empty()) return 0.0;
    const std::int64_t end = events.back().timestamp_ms;
    double active_ms = 0.0;
    std::size_t next = 0;
    bool in_visit = false, in_background = false;
    for (std::int64_t ms = events.front().timestamp_ms; ms <= end; ++ms) {
        while (next < events.size() && events[next].timestamp_ms == ms) {
            switch (events[next].kind) {
                case EventKind::Enter: in_visit = true; in_background = false; break;
                case EventKind::Exit: in_visit = false; in_background = false; break;
                case EventKind::Background: in_background = true; break;
                case EventKind::Foreground: in_background = false; break;
                case EventKind::Annotate: break;
            }
            ++next;
        }
        // end instants are exclusive: the exit/background flip at `ms` is
        // applied above before this tick is counted
        if (in_visit && !in_background) active_ms += 1.0;
    }
    return active_ms / 1000.0;
}

}  // namespace

TEST_CASE("time spent examples") {
    SUBCASE("one clean visit") {
        CHECK(compute_time_spent({ev(EventKind::Enter, 0), ev(EventKind::Exit, 10000)}) ==
              doctest::Approx(10.0));
    }
    SUBCASE("background interval is subtracted") {
        const std::vector<ClickEvent> events = {
            ev(EventKind::Enter, 0), ev(EventKind::Background, 2000),
            ev(EventKind::Foreground, 4000), ev(EventKind::Exit, 10000)};
        CHECK(compute_time_spent(events) == doctest::Approx(8.0));
    }
    SUBCASE("background left open clamps at the exit") {
        const std::vector<ClickEvent> events = {ev(EventKind::Enter, 0),
                                                ev(EventKind::Background, 6000),
                                                ev(EventKind::Exit, 10000)};
        CHECK(compute_time_spent(events) == doctest::Approx(6.0));
    }
    SUBCASE("re-enter closes the open visit") {
        const std::vector<ClickEvent> events = {ev(EventKind::Enter, 0), ev(EventKind::Enter, 5000),
                                                ev(EventKind::Exit, 9000)};
        CHECK(compute_time_spent(events) == doctest::Approx(9.0));
        CHECK(compute_view_count(events) == 2);
    }
    SUBCASE("dangling enter contributes nothing") {
        CHECK(compute_time_spent({ev(EventKind::Enter, 0)}) == 0.0);
        CHECK(compute_view_count({ev(EventKind::Enter, 0)}) == 0);
    }
    SUBCASE("background outside a visit is ignored") {
        const std::vector<ClickEvent> events = {
            ev(EventKind::Background, 0), ev(EventKind::Foreground, 500),
            ev(EventKind::Enter, 1000), ev(EventKind::Exit, 3000)};
        CHECK(compute_time_spent(events) == doctest::Approx(2.0));
    }
    SUBCASE("doubling timestamps doubles the time") {
        std::vector<ClickEvent> events = {
            ev(EventKind::Enter, 100), ev(EventKind::Background, 300),
            ev(EventKind::Foreground, 700), ev(EventKind::Exit, 1500),
            ev(EventKind::Enter, 2000), ev(EventKind::Exit, 2600)};
        const double base = compute_time_spent(events);
        for (ClickEvent& e : events) e.timestamp_ms *= 2;
        CHECK(compute_time_spent(events) == doctest::Approx(2.0 * base));
    }
}

TEST_CASE("time spent matches millisecond replay on random sequences") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ClickEvent> events;
        std::int64_t cursor = 0;
        const int visits = static_cast<int>(rng() % 4);
        for (int v = 0; v < visits; ++v) {
            cursor += 1 + static_cast<std::int64_t>(rng() % 50);
            const std::int64_t enter = cursor;
            events.push_back(ev(EventKind::Enter, enter));
            const int pauses = static_cast<int>(rng() % 3);
            for (int p = 0; p < pauses; ++p) {
                cursor += 1 + static_cast<std::int64_t>(rng() % 40);
                events.push_back(ev(EventKind::Background, cursor));
                cursor += 1 + static_cast<std::int64_t>(rng() % 40);
                events.push_back(ev(EventKind::Foreground, cursor));
            }
            cursor += 1 + static_cast<std::int64_t>(rng() % 60);
            events.push_back(ev(EventKind::Exit, cursor));
        }
        CHECK(compute_time_spent(events) == doctest::Approx(sweep_time_seconds(events)).epsilon(1e-12));
        CHECK(compute_view_count(events) == visits);
    }
}

TEST_CASE("engagement") {
    const SegmentStats stats{100.0, 2.0};
    EngagementParams p;  // gamma = alpha_t = alpha_b = 1

    SUBCASE("average learner scores gamma") {
        CHECK(compute_engagement(100.0, 2.0, stats, p) == doctest::Approx(1.0));
        p.gamma = 0.7;
        CHECK(compute_engagement(100.0, 2.0, stats, p) == doctest::Approx(0.7));
    }
    SUBCASE("no activity scores a quarter") {
        CHECK(compute_engagement(0.0, 0.0, stats, p) == doctest::Approx(0.25));
    }
    SUBCASE("clamped at one") {
        CHECK(compute_engagement(1e6, 1e3, stats, p) == 1.0);
    }
    SUBCASE("monotone in time and annotations") {
        double prev = 0.0;
        for (double t = 0.0; t <= 150.0; t += 10.0) {
            const double e = compute_engagement(t, 1.0, stats, p);
            CHECK(e >= prev);
            prev = e;
        }
        CHECK(compute_engagement(50.0, 3.0, stats, p) > compute_engagement(50.0, 1.0, stats, p));
    }
    SUBCASE("stays inside the unit interval") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 10000; ++i) {
            const SegmentStats st{1e-3 + 500.0 * u(rng), 1e-3 + 10.0 * u(rng)};
            const EngagementParams q{u(rng), 3.0 * u(rng), 3.0 * u(rng)};
            const double e = compute_engagement(1000.0 * u(rng), 20.0 * u(rng), st, q);
            CHECK(e >= 0.0);
            CHECK(e <= 1.0);
        }
    }
}

TEST_CASE("segment stats") {
    auto row = [](double t, double n) {
        BehaviorFeatures f;
        f.t = t;
        f.n = n;
        return f;
    };
    SUBCASE("time mean over active learners only") {
        const std::vector<std::vector<BehaviorFeatures>> behavior = {
            {row(100, 0)}, {row(200, 0)}};
        CHECK(compute_segment_stats(behavior, 1)[0].t_bar == doctest::Approx(150.0));
        const std::vector<std::vector<BehaviorFeatures>> with_zero = {
            {row(0, 0)}, {row(60, 0)}, {row(120, 0)}};
        CHECK(compute_segment_stats(with_zero, 1)[0].t_bar == doctest::Approx(90.0));
    }
    SUBCASE("untouched segment is floored, not zero") {
        const std::vector<std::vector<BehaviorFeatures>> behavior = {
            {row(100, 2), row(0, 0)}, {row(300, 4), row(0, 0)}};
        const auto stats = compute_segment_stats(behavior, 2);
        CHECK(stats[0].t_bar == doctest::Approx(200.0));
        CHECK(stats[1].t_bar == doctest::Approx(1e-6 * 200.0));
        CHECK(stats[1].t_bar > 0.0);
    }
    SUBCASE("annotation mean is course-wide over active cells") {
        const std::vector<std::vector<BehaviorFeatures>> behavior = {
            {row(10, 1), row(20, 5)}, {row(30, 0), row(0, 0)}};
        const auto stats = compute_segment_stats(behavior, 2);
        // active cells: (10,1) (20,5) (30,0) -> mean 2
        CHECK(stats[0].n_bar == doctest::Approx(2.0));
        CHECK(stats[1].n_bar == doctest::Approx(2.0));
    }
    SUBCASE("no activity at all yields unit floors") {
        const std::vector<std::vector<BehaviorFeatures>> behavior = {{row(0, 0)}};
        const auto stats = compute_segment_stats(behavior, 1);
        CHECK(stats[0].t_bar == 1.0);
        CHECK(stats[0].n_bar == 1.0);
    }
}

TEST_CASE("behavior extraction across segments") {
    ingest::Dataset d;
    d.segment_count = 2;
    d.question_count = 1;
    d.segments = {{1, "a"}, {2, "b"}};
    d.quiz = {{1, "q"}};
    d.events = {
        {"u1", 1, EventKind::Enter, 0},
        {"u1", 1, EventKind::Annotate, 1000},
        {"u1", 2, EventKind::Enter, 5000},  // closes the open seg-1 visit here
        {"u1", 2, EventKind::Exit, 8000},
        {"u2", 2, EventKind::Annotate, 100},  // annotation outside any visit still counts
    };
    std::vector<std::string> order;
    const auto behavior = extract_behavior(d, order);
    REQUIRE(order.size() == 2);
    const std::size_t u1 = order[0] == "u1" ? 0 : 1;
    const std::size_t u2 = 1 - u1;
    CHECK(behavior[u1][0].t == doctest::Approx(5.0));
    CHECK(behavior[u1][0].v == 1.0);
    CHECK(behavior[u1][0].n == 1.0);
    CHECK(behavior[u1][1].t == doctest::Approx(3.0));
    CHECK(behavior[u2][1].n == 1.0);
    CHECK(behavior[u2][1].t == 0.0);
}

TEST_CASE("feature matrix assembly") {
    ingest::Dataset d;
    d.segment_count = 2;
    d.question_count = 1;
    d.segments = {{1, "a"}, {2, "b"}};
    d.quiz = {{1, "q"}};
    d.events = {
        {"u1", 1, EventKind::Enter, 0},     {"u1", 1, EventKind::Exit, 60000},
        {"u2", 1, EventKind::Enter, 0},     {"u2", 1, EventKind::Exit, 30000},
        {"u2", 2, EventKind::Enter, 40000}, {"u2", 2, EventKind::Exit, 70000},
        {"u9", 1, EventKind::Enter, 0},     {"u9", 1, EventKind::Exit, 1000},
    };
    d.outcomes = {{"u1", 0.8}, {"u2", 0.79}, {"u3", 1.0}};
    FeatureParams params;
    const FeatureMatrix fm = assemble_feature_matrix(d, params);

    SUBCASE("shape and names") {
        CHECK(fm.x.rows == 3);
        CHECK(fm.x.cols == 8);
        REQUIRE(fm.feature_names.size() == 8);
        CHECK(fm.feature_names[0] == "seg1_time");
        CHECK(fm.feature_names[3] == "seg1_engagement");
        CHECK(fm.feature_names[4] == "seg2_time");
        CHECK(fm.segment_of(0) == 1);
        CHECK(fm.segment_of(3) == 1);
        CHECK(fm.segment_of(4) == 2);
        CHECK(fm.segment_of(7) == 2);
    }
    SUBCASE("rows follow the outcomes file and the cutoff is inclusive") {
        CHECK(fm.learner_ids == std::vector<std::string>{"u1", "u2", "u3"});
        CHECK(fm.labels == std::vector<int>{1, 0, 1});
    }
    SUBCASE("raw values land in the right columns") {
        CHECK(fm.x(0, 0) == doctest::Approx(60.0));  // u1 seg1 time
        CHECK(fm.x(0, 1) == 1.0);                    // views
        CHECK(fm.x(0, 4) == 0.0);                    // u1 never saw seg2
        CHECK(fm.x(1, 4) == doctest::Approx(30.0));  // u2 seg2 time
    }
    SUBCASE("learner without events gets minimal engagement, not garbage") {
        CHECK(fm.x(2, 0) == 0.0);
        CHECK(fm.x(2, 3) == doctest::Approx(0.25));
        CHECK(all_finite(fm.x));
    }
    SUBCASE("learner with events but no outcome is recorded as excluded") {
        REQUIRE(fm.excluded_learners.size() == 1);
        CHECK(fm.excluded_learners[0] == "u9");
    }
    SUBCASE("expected-time option widens each segment block") {
        params.include_expected_time = true;
        const FeatureMatrix wide = assemble_feature_matrix(d, params);
        CHECK(wide.x.cols == 10);
        CHECK(wide.feature_names[4] == "seg1_expected_time");
        // same expected time for every learner in the segment
        CHECK(wide.x(0, 4) == wide.x(1, 4));
    }
}

TEST_CASE("normalization") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(5.0, 2.5);
    Matrix x(40, 3);
    for (std::size_t i = 0; i < x.rows; ++i) {
        x(i, 0) = g(rng);
        x(i, 1) = 7.0;  // constant
        x(i, 2) = g(rng) * 10.0;
    }
    std::vector<std::size_t> fit_rows;
    for (std::size_t i = 0; i < 25; ++i) fit_rows.push_back(i);
    std::vector<double> mean, stddev;
    fit_normalization(x, fit_rows, mean, stddev);
    const Matrix z = apply_normalization(x, mean, stddev);

    SUBCASE("fit rows come out standardized") {
        for (std::size_t j : {std::size_t{0}, std::size_t{2}}) {
            double m = 0.0, ss = 0.0;
            for (std::size_t r : fit_rows) m += z(r, j);
            m /= 25.0;
            for (std::size_t r : fit_rows) ss += (z(r, j) - m) * (z(r, j) - m);
            CHECK(std::abs(m) < 1e-9);
            CHECK(std::sqrt(ss / 25.0) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("constant column maps to zero everywhere") {
        for (std::size_t i = 0; i < z.rows; ++i) CHECK(z(i, 1) == 0.0);
    }
    SUBCASE("held-out rows use the fit statistics, not their own") {
        CHECK(z(30, 0) == doctest::Approx((x(30, 0) - mean[0]) / stddev[0]));
    }
}
