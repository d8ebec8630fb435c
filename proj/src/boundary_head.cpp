#include "gebd/boundary_head.hpp"

#include <algorithm>
#include <cmath>

#include "gebd/error.hpp"
#include "gebd/ops.hpp"

namespace gebd {

HeadWeights HeadWeights::create(std::size_t channels, ParamSet& params, Rng& rng, const std::string& prefix) {
    if (channels == 0) throw ConfigError("head channels must be >= 1");
    const std::size_t outs[3] = {channels, channels, 1};
    HeadWeights h;
    for (int i = 0; i < 3; ++i) {
        const std::string p = prefix + "conv" + std::to_string(i) + ".";
        h.w[i] = params.add(p + "weight", he_uniform({outs[i], channels, 3}, channels * 3, rng));
        h.b[i] = params.add(p + "bias", Tensor::zeros({outs[i]}));
    }
    return h;
}

Tensor classify(const Tensor& v, const HeadWeights& head) {
    if (v.rank() != 2) throw ShapeError("classify: expected [T, C], got " + shape_str(v.shape()));
    const std::size_t t = v.dim(0), c = v.dim(1);
    if (c != head.channels()) {
        throw ConfigError("classify: input has " + std::to_string(c) + " channels, head expects " +
                          std::to_string(head.channels()));
    }
    Tensor x = reshape(transpose(v, 0, 1), {1, c, t});
    x = relu(conv1d(x, head.w[0], head.b[0]));
    x = relu(conv1d(x, head.w[1], head.b[1]));
    x = conv1d(x, head.w[2], head.b[2]);
    return reshape(sigmoid(x), {t});
}

LossKind parse_loss(std::string_view name) {
    if (name == "bce") return LossKind::bce;
    if (name == "mse") return LossKind::mse;
    throw ConfigError("unknown loss '" + std::string(name) + "' (expected bce|mse)");
}

LabelKind parse_labels(std::string_view name) {
    if (name == "gaussian") return LabelKind::gaussian;
    if (name == "hard") return LabelKind::hard;
    throw ConfigError("unknown label mode '" + std::string(name) + "' (expected gaussian|hard)");
}

std::string_view to_string(LossKind kind) { return kind == LossKind::bce ? "bce" : "mse"; }
std::string_view to_string(LabelKind kind) { return kind == LabelKind::gaussian ? "gaussian" : "hard"; }

namespace {

void check_frames(std::span<const std::size_t> frames, std::size_t length) {
    for (auto f : frames) {
        if (f >= length) {
            throw InputError("boundary frame " + std::to_string(f) + " outside sequence of length " +
                             std::to_string(length));
        }
    }
}

void check_lengths(const Tensor& scores, std::span<const float> labels, std::span<const float> mask) {
    if (scores.rank() != 1 || scores.numel() != labels.size() || (!mask.empty() && mask.size() != labels.size())) {
        throw InputError("loss: scores " + shape_str(scores.shape()) + " vs " + std::to_string(labels.size()) +
                         " labels" + (mask.empty() ? "" : " / " + std::to_string(mask.size()) + " mask values"));
    }
}

template <typename Value, typename Deriv>
Tensor masked_mean_loss(const char* name, const Tensor& scores, std::span<const float> labels,
                        std::span<const float> mask, Value value, Deriv deriv) {
    check_lengths(scores, labels, mask);
    const auto p = scores.data();
    double total = 0.0, count = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const float m = mask.empty() ? 1.0f : mask[i];
        if (m == 0.0f) continue;
        total += m * value(p[i], labels[i]);
        count += m;
    }
    const float denom = count > 0.0 ? static_cast<float>(count) : 1.0f;
    std::vector<float> y(labels.begin(), labels.end());
    std::vector<float> mk(mask.begin(), mask.end());
    return record_op(name, {}, {static_cast<float>(total / denom)}, {&scores},
                     [scores, y = std::move(y), mk = std::move(mk), denom, deriv](const TensorImpl& o) {
                         if (!scores.requires_grad()) return;
                         auto g = scores.impl()->grad_buffer();
                         const auto p = scores.data();
                         for (std::size_t i = 0; i < p.size(); ++i) {
                             const float m = mk.empty() ? 1.0f : mk[i];
                             if (m == 0.0f) continue;
                             g[i] += o.grad[0] * m * deriv(p[i], y[i]) / denom;
                         }
                     });
}

} // namespace

SoftLabelSequence soft_labels(std::span<const std::size_t> boundary_frames, std::size_t length, float sigma) {
    check_frames(boundary_frames, length);
    if (!(sigma > 0.0f)) throw ConfigError("label sigma must be positive");
    SoftLabelSequence s;
    s.boundaries.assign(boundary_frames.begin(), boundary_frames.end());
    s.labels.assign(length, 0.0f);
    const double radius = 4.0 * sigma;
    const long reach = static_cast<long>(std::floor(radius));
    for (auto b : boundary_frames) {
        const long lo = std::max(0L, static_cast<long>(b) - reach);
        const long hi = std::min(static_cast<long>(length) - 1, static_cast<long>(b) + reach);
        for (long t = lo; t <= hi; ++t) {
            const double d = static_cast<double>(t) - static_cast<double>(b);
            s.labels[static_cast<std::size_t>(t)] += static_cast<float>(std::exp(-d * d / (2.0 * sigma * sigma)));
        }
    }
    for (auto& v : s.labels) v = std::min(v, 1.0f);
    return s;
}

SoftLabelSequence hard_labels(std::span<const std::size_t> boundary_frames, std::size_t length) {
    check_frames(boundary_frames, length);
    SoftLabelSequence s;
    s.boundaries.assign(boundary_frames.begin(), boundary_frames.end());
    s.labels.assign(length, 0.0f);
    for (auto b : boundary_frames) s.labels[b] = 1.0f;
    return s;
}

Tensor bce_loss(const Tensor& scores, std::span<const float> labels, std::span<const float> mask) {
    auto clip = [](float p) { return std::clamp(p, kProbClip, 1.0f - kProbClip); };
    return masked_mean_loss(
        "bce_loss", scores, labels, mask,
        [clip](float p, float y) {
            const double q = clip(p);
            return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
        },
        [clip](float p, float y) {
            if (p < kProbClip || p > 1.0f - kProbClip) return 0.0f;  // clipped region is flat
            const float q = clip(p);
            return (q - y) / (q * (1.0f - q));
        });
}

Tensor mse_loss(const Tensor& scores, std::span<const float> labels, std::span<const float> mask) {
    return masked_mean_loss(
        "mse_loss", scores, labels, mask, [](float p, float y) { return double(p - y) * (p - y); },
        [](float p, float y) { return 2.0f * (p - y); });
}

std::vector<std::size_t> decode_boundary_frames(std::span<const float> scores, const DecodeOptions& options) {
    std::vector<std::size_t> out;
    const std::size_t n = scores.size(), sep = options.min_separation;
    for (std::size_t t = 0; t < n; ++t) {
        const float s = scores[t];
        if (!(s >= options.threshold)) continue;
        bool peak = true;
        const std::size_t lo = t >= sep ? t - sep : 0, hi = std::min(n - 1, t + sep);
        for (std::size_t j = lo; j <= hi && peak; ++j) {
            if (j < t) peak = scores[j] < s;
            else if (j > t) peak = scores[j] <= s;
        }
        if (peak) out.push_back(t);
    }
    return out;
}

std::vector<double> decode_boundaries(std::span<const float> scores, std::span<const double> frame_times,
                                      const DecodeOptions& options) {
    if (frame_times.size() != scores.size()) {
        throw InputError("decode: " + std::to_string(scores.size()) + " scores but " +
                         std::to_string(frame_times.size()) + " frame timestamps");
    }
    std::vector<double> out;
    for (auto f : decode_boundary_frames(scores, options)) out.push_back(frame_times[f]);
    return out;
}

} // namespace gebd
