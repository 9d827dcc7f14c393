#pragma once

#include <string>
#include <vector>

#include "lop/ingest.hpp"
#include "lop/matrix.hpp"

namespace lop::features {

struct EngagementParams {
    double gamma = 1.0;    // instructor constant in (0,1]
    double alpha_t = 1.0;  // diminishing return on time
    double alpha_b = 1.0;  // diminishing return on annotations
};

struct BehaviorFeatures {
    double t = 0.0;  // time spent, seconds
    double v = 0.0;  // view count
    double n = 0.0;  // annotations
    double e = 0.0;  // engagement in [0,1]
};

struct SegmentStats {
    double t_bar = 0.0;  // expected time spent on the segment, seconds
    double n_bar = 0.0;  // expected annotations, course-wide
};

struct FeatureMatrix {
    Matrix x;                      // U x D, raw (unnormalized) values
    Matrix x_norm;                 // U x D, z-scored over all learners
    std::vector<int> labels;       // 1 = pass
    std::vector<std::string> feature_names;
    std::vector<std::string> learner_ids;   // row order
    std::vector<double> norm_mean;          // per-column fit used for x_norm
    std::vector<double> norm_std;
    int segment_count = 0;
    int features_per_segment = 4;
    std::vector<std::string> excluded_learners;  // had events but no outcome

    // Segment that owns feature column d.
    int segment_of(std::size_t d) const {
        return static_cast<int>(d / static_cast<std::size_t>(features_per_segment)) + 1;
    }
};

struct FeatureParams {
    EngagementParams engagement;
    bool include_expected_time = false;  // adds t_bar as a 5th per-segment column
    double pass_cutoff = 0.8;            // inclusive
};

// Net time accounting over one learner's events on one segment:
// sum of enter->exit intervals minus background->foreground time inside them.
// Events must be sorted by timestamp. Never negative.
double compute_time_spent(const std::vector<ingest::ClickEvent>& events);

// Number of completed enter->exit visits.
int compute_view_count(const std::vector<ingest::ClickEvent>& events);

// min( gamma * ((1 + t/t_bar)/2)^alpha_t * ((1 + n/n_bar)/2)^alpha_b , 1 )
double compute_engagement(double t, double n, const SegmentStats& stats,
                          const EngagementParams& p);

// Per-learner, per-segment raw behavior. Unmatched enters are closed at the
// learner's next event on any segment; a dangling final enter is dropped.
std::vector<std::vector<BehaviorFeatures>> extract_behavior(const ingest::Dataset& d,
                                                            std::vector<std::string>& learner_order);

// t_bar over learners with positive time; n_bar over cells with any activity.
// Zero means are floored (1e-6 of the course-wide mean, else 1.0).
std::vector<SegmentStats> compute_segment_stats(
    const std::vector<std::vector<BehaviorFeatures>>& behavior, int segment_count);

FeatureMatrix assemble_feature_matrix(const ingest::Dataset& d, const FeatureParams& params);

// Mean/std fit on `fit_rows` only; constant columns map to zero.
void fit_normalization(const Matrix& x, const std::vector<std::size_t>& fit_rows,
                       std::vector<double>& mean, std::vector<double>& stddev);
Matrix apply_normalization(const Matrix& x, const std::vector<double>& mean,
                           const std::vector<double>& stddev);

std::string feature_matrix_to_csv(const FeatureMatrix& fm, bool normalized);

}  // namespace lop::features
