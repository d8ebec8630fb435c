#include "gebd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gebd/error.hpp"

namespace gebd {

void BoundaryAnnotation::validate() const {
    if (!(duration > 0.0)) throw InputError("video " + video_id + ": duration must be positive");
    if (raters.empty()) throw InputError("video " + video_id + ": at least one rater is required");
    for (const auto& r : raters) {
        for (double t : r.boundaries) {
            if (!(t >= 0.0 && t <= duration)) {
                throw InputError("video " + video_id + ", rater " + r.rater_id + ": timestamp " + std::to_string(t) +
                                 " outside [0, " + std::to_string(duration) + "]");
            }
        }
        if (!std::is_sorted(r.boundaries.begin(), r.boundaries.end())) {
            throw InputError("video " + video_id + ", rater " + r.rater_id + ": timestamps not sorted");
        }
    }
}

double MatchCounts::precision() const {
    if (tp + fp == 0) return fn == 0 ? 1.0 : 0.0;
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double MatchCounts::recall() const {
    if (tp + fn == 0) return fp == 0 ? 1.0 : 0.0;
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double MatchCounts::f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

MatchCounts& MatchCounts::operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
}

MatchCounts match(std::span<const double> preds, std::span<const double> gts, double duration, double threshold) {
    if (!(duration > 0.0)) throw InputError("match: duration must be positive");
    std::vector<double> p(preds.begin(), preds.end()), g(gts.begin(), gts.end());
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    const double limit = threshold + kRelDisSlack;
    std::size_t next = 0, tp = 0;
    for (double x : p) {
        // Ground truths too far left of x are out of reach for every later prediction too.
        while (next < g.size() && (x - g[next]) / duration > limit) ++next;
        if (next < g.size() && std::fabs(g[next] - x) / duration <= limit) {
            ++tp;
            ++next;
        }
    }
    return {tp, p.size() - tp, g.size() - tp};
}

MatchCounts best_rater_counts(std::span<const double> preds, const BoundaryAnnotation& annotation, double threshold) {
    if (annotation.raters.empty()) throw InputError("video " + annotation.video_id + " has no raters");
    MatchCounts best;
    double best_f1 = -1.0;
    for (const auto& r : annotation.raters) {
        const MatchCounts c = match(preds, r.boundaries, annotation.duration, threshold);
        if (c.f1() > best_f1) {
            best_f1 = c.f1();
            best = c;
        }
    }
    return best;
}

double f1_max_over_raters(std::span<const double> preds, const BoundaryAnnotation& annotation, double threshold) {
    return best_rater_counts(preds, annotation, threshold).f1();
}

double EvalReport::f1_at(double threshold) const {
    for (const auto& r : rows)
        if (std::fabs(r.threshold - threshold) < 1e-9) return r.f1;
    throw UsageError("no report row for threshold " + std::to_string(threshold));
}

std::vector<double> default_thresholds() {
    std::vector<double> t;
    for (int i = 1; i <= 10; ++i) t.push_back(i / 20.0);
    return t;
}

EvalReport sweep(const std::vector<VideoPrediction>& predictions,
                 const std::map<std::string, BoundaryAnnotation>& annotations, Aggregation aggregation,
                 const std::vector<double>& thresholds) {
    EvalReport report;
    std::vector<const VideoPrediction*> usable;
    for (const auto& p : predictions) {
        auto it = annotations.find(p.video_id);
        if (it == annotations.end()) {
            report.errors.push_back("missing annotation for video " + p.video_id);
            continue;
        }
        try {
            it->second.validate();
        } catch (const InputError& e) {
            report.errors.push_back(e.what());
            continue;
        }
        usable.push_back(&p);
    }
    report.videos = usable.size();
    for (double th : thresholds) {
        EvalRow row{th, 0.0, 0.0, 0.0};
        MatchCounts total;
        for (const auto* p : usable) {
            const MatchCounts c = best_rater_counts(p->boundaries, annotations.at(p->video_id), th);
            total += c;
            row.precision += c.precision();
            row.recall += c.recall();
            row.f1 += c.f1();
        }
        if (aggregation == Aggregation::micro) {
            row.precision = total.precision();
            row.recall = total.recall();
            row.f1 = total.f1();
        } else if (!usable.empty()) {
            const double n = static_cast<double>(usable.size());
            row.precision /= n;
            row.recall /= n;
            row.f1 /= n;
        }
        report.rows.push_back(row);
    }
    if (!report.rows.empty()) {
        for (const auto& r : report.rows) {
            report.average.precision += r.precision;
            report.average.recall += r.recall;
            report.average.f1 += r.f1;
        }
        const double n = static_cast<double>(report.rows.size());
        report.average.precision /= n;
        report.average.recall /= n;
        report.average.f1 /= n;
    }
    return report;
}

std::string report_csv(const EvalReport& report) {
    std::string out = "threshold,precision,recall,f1\n";
    char buf[128];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%.2f,%.6f,%.6f,%.6f\n", r.threshold, r.precision, r.recall, r.f1);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "avg,%.6f,%.6f,%.6f\n", report.average.precision, report.average.recall,
                  report.average.f1);
    out += buf;
    return out;
}

} // namespace gebd
