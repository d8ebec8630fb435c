#pragma once

// Wall-clock scaling of prediction with sequence length.

#include <cstdint>
#include <vector>

#include "gebd/model.hpp"

namespace gebd {

struct ScalingPoint {
    std::size_t length = 0;
    double seconds = 0.0;             // drift-normalised median of the repeats
    std::size_t windows_encoded = 0;  // per forward pass
    std::uint64_t attention_flops = 0;
};

struct ScalingFit {
    double slope = 0.0, intercept = 0.0;         // seconds = slope * T + intercept
    double quad = 0.0, lin = 0.0, constant = 0.0;  // least-squares quadratic
    /// |quad * T_max^2| relative to the measured time at the largest T.
    double quadratic_share = 0.0;
};

/// Times model.predict on random [T, input_channels] features for each T.
std::vector<ScalingPoint> scaling_bench(const Model& model, const std::vector<std::size_t>& lengths,
                                        std::size_t repeats = 3, std::uint64_t seed = 0);

ScalingFit fit_scaling(const std::vector<ScalingPoint>& points);

} // namespace gebd
