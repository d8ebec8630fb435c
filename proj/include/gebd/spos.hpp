#pragma once

// Structured partition of a frame sequence into K slices of one-to-one
// context windows of length L = 2K + 1.

#include <cstddef>
#include <algorithm>
#include <span>
#include <vector>

#include "gebd/tensor.hpp"

namespace gebd {

struct SposOptions {
    /// Right contexts replicate the last real frame instead of the last
    /// (possibly zero) padded frame.
    bool clamp_to_last_real_frame = false;
};

struct PaddedSequence {
    Tensor features;             // [T', C], T' = ceil(T / K) * K
    std::size_t original_length = 0;
    std::size_t pad_count = 0;
    std::size_t window_k = 0;

    std::size_t padded_length() const { return original_length + pad_count; }
};

struct SliceContext {
    std::size_t slice_index = 0;
    Tensor left;        // [N, K, C]
    Tensor right;       // [N, K, C]
    Tensor candidates;  // [N, C]
    std::vector<std::size_t> frame_indices;  // t = n * K + k
};

struct ContextWindowBatch {
    Tensor windows;  // [N, L, C]
    std::size_t slice_index = 0;
    std::vector<std::size_t> frame_indices;
};

inline std::size_t window_length(std::size_t k) { return 2 * k + 1; }

/// Appends ceil(T/K)*K - T zero frames. Differentiable w.r.t. `features`.
PaddedSequence pad_sequence(const Tensor& features, std::size_t k);

/// Shift-and-view construction of slice `k`: the left view prepends K-k copies
/// of frame 0 and drops the last K-k frames; the right view appends k+1
/// copies of the last frame and drops the first k+1.
SliceContext build_slice(const PaddedSequence& padded, std::size_t k, const SposOptions& options = {});

/// Concatenates [left, candidate, right] along time.
ContextWindowBatch make_windows(const SliceContext& slice);

/// All K slices; every padded frame is a candidate in exactly one batch.
std::vector<ContextWindowBatch> partition(const Tensor& features, std::size_t k,
                                          const SposOptions& options = {});

/// Restores frame order from per-slice outputs (each [N, D]) and drops the
/// padded tail: output[t] = slice (t mod K), row (t div K).
Tensor scatter_outputs(std::span<const Tensor> per_slice, std::size_t length);

/// Plain-value variant of scatter_outputs.
std::vector<std::vector<float>> scatter_outputs(const std::vector<std::vector<std::vector<float>>>& per_slice,
                                                std::size_t length);

} // namespace gebd
