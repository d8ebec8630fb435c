#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gebd/checkpoint.hpp"
#include "gebd/init.hpp"

namespace gebd {

/// conv1d(C->C) -> ReLU -> conv1d(C->C) -> ReLU -> conv1d(C->1) -> sigmoid, k = 3.
struct HeadWeights {
    Tensor w[3];
    Tensor b[3];

    static HeadWeights create(std::size_t channels, ParamSet& params, Rng& rng, const std::string& prefix = "head.");
    std::size_t channels() const { return w[0].dim(1); }
};

/// v: [T, C] per-frame representations -> [T] boundary probabilities.
Tensor classify(const Tensor& v, const HeadWeights& head);

enum class LossKind { bce, mse };
enum class LabelKind { gaussian, hard };

LossKind parse_loss(std::string_view name);
LabelKind parse_labels(std::string_view name);
std::string_view to_string(LossKind kind);
std::string_view to_string(LabelKind kind);

struct SoftLabelSequence {
    std::vector<float> labels;
    std::vector<std::size_t> boundaries;
};

/// Sum of exp(-(t - t')^2 / (2 sigma^2)) over boundaries t, truncated beyond
/// 4 sigma and clamped to 1.
SoftLabelSequence soft_labels(std::span<const std::size_t> boundary_frames, std::size_t length, float sigma = 1.0f);
/// 1 at every boundary frame, 0 elsewhere.
SoftLabelSequence hard_labels(std::span<const std::size_t> boundary_frames, std::size_t length);

inline constexpr float kProbClip = 1e-7f;

/// Mean binary cross entropy over frames whose mask is nonzero (all frames
/// when `mask` is empty). Scores are clipped to [1e-7, 1 - 1e-7].
Tensor bce_loss(const Tensor& scores, std::span<const float> labels, std::span<const float> mask = {});
Tensor mse_loss(const Tensor& scores, std::span<const float> labels, std::span<const float> mask = {});

struct DecodeOptions {
    float threshold = 0.5f;
    std::size_t min_separation = 2;
};

/// Frames at or above threshold that are strict local maxima within
/// +-min_separation, with plateaus resolved toward the earlier frame.
std::vector<std::size_t> decode_boundary_frames(std::span<const float> scores, const DecodeOptions& options = {});
/// As decode_boundary_frames, converted to seconds through `frame_times`.
std::vector<double> decode_boundaries(std::span<const float> scores, std::span<const double> frame_times,
                                      const DecodeOptions& options = {});

struct ScoreSequence {
    std::vector<float> scores;
    std::vector<double> decoded;
};

} // namespace gebd
