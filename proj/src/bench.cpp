#include "gebd/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "gebd/error.hpp"
#include "gebd/init.hpp"

namespace gebd {

namespace {

double median(std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

} // namespace

std::vector<ScalingPoint> scaling_bench(const Model& model, const std::vector<std::size_t>& lengths,
                                        std::size_t repeats, std::uint64_t seed) {
    if (repeats == 0) throw ConfigError("repeats must be >= 1");
    const auto& cfg = model.config();
    Rng rng(seed);
    std::vector<FeatureSequence> inputs;
    std::vector<ScalingPoint> out;
    for (auto t : lengths) {
        if (t == 0) throw ConfigError("sequence lengths must be >= 1");
        FeatureSequence seq;
        seq.video_id = "bench";
        seq.features = normal_init({t, cfg.input_channels}, 1.0f, rng);
        for (std::size_t i = 0; i < t; ++i) seq.timestamps.push_back(static_cast<double>(i) / 25.0);
        seq.duration = static_cast<double>(t) / 25.0;
        model.predict(seq);  // warm-up
        inputs.push_back(std::move(seq));
        ScalingPoint p;
        p.length = t;
        p.attention_flops = attention_flops(t, cfg.channels, cfg.window_k);
        out.push_back(p);
    }
    // Lengths are interleaved within each round and every round is divided by
    // its own total, which cancels drift in machine speed between rounds. The
    // per-length median of those shares, rescaled by the median round total,
    // is the reported time.
    std::vector<std::vector<double>> shares(inputs.size());
    std::vector<double> totals;
    for (std::size_t r = 0; r < repeats; ++r) {
        std::vector<double> round(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            ForwardStats stats;
            const auto start = std::chrono::steady_clock::now();
            model.predict(inputs[i], {}, &stats);
            round[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            out[i].windows_encoded = stats.windows_encoded;
        }
        double total = 0.0;
        for (double v : round) total += v;
        totals.push_back(total);
        for (std::size_t i = 0; i < inputs.size(); ++i) shares[i].push_back(round[i] / total);
    }
    const double scale = median(totals);
    for (std::size_t i = 0; i < inputs.size(); ++i) out[i].seconds = median(shares[i]) * scale;
    return out;
}

ScalingFit fit_scaling(const std::vector<ScalingPoint>& points) {
    if (points.size() < 3) throw ConfigError("scaling fit needs at least 3 lengths");
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd a1(n, 2), a2(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(points[i].length);
        a1.row(i) << t, 1.0;
        a2.row(i) << t * t, t, 1.0;
        y(i) = points[i].seconds;
    }
    const Eigen::VectorXd c1 = a1.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd c2 = a2.colPivHouseholderQr().solve(y);
    ScalingFit f;
    f.slope = c1(0);
    f.intercept = c1(1);
    f.quad = c2(0);
    f.lin = c2(1);
    f.constant = c2(2);
    const auto& last = *std::max_element(points.begin(), points.end(),
                                         [](const auto& a, const auto& b) { return a.length < b.length; });
    const double tmax = static_cast<double>(last.length);
    f.quadratic_share = std::abs(f.quad) * tmax * tmax / last.seconds;
    return f;
}

} // namespace gebd
