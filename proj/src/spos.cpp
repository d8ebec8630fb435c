#include "gebd/spos.hpp"

#include "gebd/error.hpp"
#include "gebd/ops.hpp"

namespace gebd {

namespace {

Tensor repeat_frame(const Tensor& seq, std::size_t index, std::size_t times) {
    const Tensor frame = narrow(seq, 0, index, 1);
    return concat(std::vector<Tensor>(times, frame), 0);
}

} // namespace

PaddedSequence pad_sequence(const Tensor& features, std::size_t k) {
    if (k == 0) throw ConfigError("window size K must be >= 1");
    if (features.rank() != 2) throw InputError("features must be [T, C], got " + shape_str(features.shape()));
    const std::size_t t = features.dim(0), c = features.dim(1);
    if (t == 0) throw InputError("cannot partition an empty frame sequence");
    if (c == 0) throw InputError("features have zero channels");
    const std::size_t padded = (t + k - 1) / k * k;
    PaddedSequence out;
    out.original_length = t;
    out.pad_count = padded - t;
    out.window_k = k;
    out.features = out.pad_count == 0 ? features
                                      : concat({features, Tensor::zeros({out.pad_count, c})}, 0);
    return out;
}

SliceContext build_slice(const PaddedSequence& padded, std::size_t k, const SposOptions& options) {
    const std::size_t kk = padded.window_k;
    if (k >= kk) {
        throw UsageError("slice index " + std::to_string(k) + " out of range for K=" + std::to_string(kk));
    }
    const Tensor& v = padded.features;
    const std::size_t tp = v.dim(0), c = v.dim(1), n = tp / kk;

    SliceContext s;
    s.slice_index = k;
    for (std::size_t i = 0; i < n; ++i) s.frame_indices.push_back(i * kk + k);

    const std::size_t lead = kk - k;
    const Tensor shifted_left = concat({repeat_frame(v, 0, lead), narrow(v, 0, 0, tp - lead)}, 0);
    s.left = reshape(shifted_left, {n, kk, c});

    Tensor source = v;
    if (options.clamp_to_last_real_frame && padded.pad_count > 0) {
        const std::size_t t = padded.original_length;
        source = concat({narrow(v, 0, 0, t), repeat_frame(v, t - 1, padded.pad_count)}, 0);
    }
    const std::size_t trail = k + 1;
    const Tensor shifted_right =
        concat({narrow(source, 0, trail, tp - trail), repeat_frame(source, tp - 1, trail)}, 0);
    s.right = reshape(shifted_right, {n, kk, c});

    s.candidates = reshape(narrow(reshape(v, {n, kk, c}), 1, k, 1), {n, c});
    return s;
}

ContextWindowBatch make_windows(const SliceContext& slice) {
    const std::size_t n = slice.candidates.dim(0), c = slice.candidates.dim(1);
    ContextWindowBatch b;
    b.slice_index = slice.slice_index;
    b.frame_indices = slice.frame_indices;
    b.windows = concat({slice.left, reshape(slice.candidates, {n, 1, c}), slice.right}, 1);
    return b;
}

std::vector<ContextWindowBatch> partition(const Tensor& features, std::size_t k, const SposOptions& options) {
    const PaddedSequence padded = pad_sequence(features, k);
    std::vector<ContextWindowBatch> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(make_windows(build_slice(padded, i, options)));
    return out;
}

Tensor scatter_outputs(std::span<const Tensor> per_slice, std::size_t length) {
    if (per_slice.empty()) throw UsageError("scatter_outputs: no slices");
    const std::size_t n = per_slice[0].dim(0), d = per_slice[0].numel() / std::max<std::size_t>(n, 1);
    std::vector<Tensor> rows;
    rows.reserve(per_slice.size());
    for (const auto& s : per_slice) {
        if (s.dim(0) != n || s.numel() != n * d) {
            throw ShapeError("scatter_outputs: inconsistent slice shapes " + shape_str(per_slice[0].shape()) +
                             " vs " + shape_str(s.shape()));
        }
        rows.push_back(reshape(s, {1, n, d}));
    }
    const std::size_t k = per_slice.size();
    if (length > n * k) throw ShapeError("scatter_outputs: length exceeds padded length");
    const Tensor ordered = reshape(permute(concat(rows, 0), {1, 0, 2}), {n * k, d});
    return narrow(ordered, 0, 0, length);
}

std::vector<std::vector<float>> scatter_outputs(const std::vector<std::vector<std::vector<float>>>& per_slice,
                                                std::size_t length) {
    const std::size_t k = per_slice.size();
    if (k == 0) throw UsageError("scatter_outputs: no slices");
    const std::size_t n = per_slice[0].size();
    for (const auto& s : per_slice)
        if (s.size() != n) throw ShapeError("scatter_outputs: slices disagree on N");
    if (length > n * k) throw ShapeError("scatter_outputs: length exceeds padded length");
    std::vector<std::vector<float>> out;
    out.reserve(length);
    for (std::size_t t = 0; t < length; ++t) out.push_back(per_slice[t % k][t / k]);
    return out;
}

} // namespace gebd
