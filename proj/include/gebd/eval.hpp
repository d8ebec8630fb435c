#pragma once

// F1 at relative-distance thresholds with per-video rater maximization.

#include <map>
#include <span>
#include <string>
#include <vector>

namespace gebd {

struct RaterAnnotation {
    std::string rater_id;
    std::vector<double> boundaries;  // seconds, sorted
};

struct BoundaryAnnotation {
    std::string video_id;
    double duration = 0.0;  // seconds
    std::vector<RaterAnnotation> raters;

    /// Throws InputError naming the offending rater.
    void validate() const;
};

struct MatchCounts {
    std::size_t tp = 0, fp = 0, fn = 0;

    double precision() const;
    double recall() const;
    double f1() const;
    MatchCounts& operator+=(const MatchCounts& o);
};

/// Absolute slack on the relative-distance comparison, absorbing decimal
/// round-off in timestamps.
inline constexpr double kRelDisSlack = 1e-9;

/// One-to-one matching: predictions in ascending order each take the earliest
/// unmatched ground truth with |p - g| / duration <= threshold. This yields a
/// maximum-cardinality matching.
MatchCounts match(std::span<const double> preds, std::span<const double> gts, double duration, double threshold);

/// Counts against the rater whose F1 is highest (first such rater on ties).
MatchCounts best_rater_counts(std::span<const double> preds, const BoundaryAnnotation& annotation, double threshold);
double f1_max_over_raters(std::span<const double> preds, const BoundaryAnnotation& annotation, double threshold);

struct VideoPrediction {
    std::string video_id;
    std::vector<double> boundaries;  // seconds
    std::vector<float> scores;       // optional per-frame scores
};

enum class Aggregation { micro, macro };

struct EvalRow {
    double threshold = 0.0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;  // one per threshold
    EvalRow average;            // column means across thresholds
    std::vector<std::string> errors;
    std::size_t videos = 0;

    double f1_at(double threshold) const;
};

/// 0.05, 0.10, ..., 0.50.
std::vector<double> default_thresholds();

EvalReport sweep(const std::vector<VideoPrediction>& predictions,
                 const std::map<std::string, BoundaryAnnotation>& annotations,
                 Aggregation aggregation = Aggregation::micro,
                 const std::vector<double>& thresholds = default_thresholds());

/// "threshold,precision,recall,f1" rows plus a final "avg" row.
std::string report_csv(const EvalReport& report);

} // namespace gebd
