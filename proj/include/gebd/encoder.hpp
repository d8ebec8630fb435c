#pragma once

// Transformer encoder applied independently to every structured context
// window: attention never crosses window boundaries.

#include <cstdint>
#include <string>
#include <vector>

#include "gebd/checkpoint.hpp"
#include "gebd/init.hpp"
#include "gebd/spos.hpp"

namespace gebd {

struct EncoderConfig {
    std::size_t layers = 6;
    std::size_t channels = 256;
    std::size_t heads = 4;
    std::size_t ffn_multiplier = 4;
    std::size_t window_length = 17;
    bool positional_embedding = true;

    void validate() const;
};

struct EncoderLayerWeights {
    Tensor norm1_gain, norm1_bias;
    Tensor qkv_weight, qkv_bias;  // [C, 3C], [3C]
    Tensor out_weight, out_bias;  // [C, C], [C]
    Tensor norm2_gain, norm2_bias;
    Tensor ffn1_weight, ffn1_bias;  // [C, mC], [mC]
    Tensor ffn2_weight, ffn2_bias;  // [mC, C], [C]
};

struct EncoderWeights {
    Tensor positional;  // [L, C]; undefined when disabled
    std::vector<EncoderLayerWeights> layers;
    Tensor final_gain, final_bias;

    /// Creates and registers parameters under `prefix` ("encoder.").
    static EncoderWeights create(const EncoderConfig& cfg, ParamSet& params, Rng& rng,
                                 const std::string& prefix = "encoder.");
};

struct EncodedWindow {
    Tensor representation;  // [N, L, C]
};

/// windows: [N, L, C] -> [N, L, C].
Tensor encode(const Tensor& windows, const EncoderConfig& cfg, const EncoderWeights& weights);
EncodedWindow encode(const ContextWindowBatch& batch, const EncoderConfig& cfg, const EncoderWeights& weights);

/// Windowed attention cost 4*T*C^2 + 2*L^2*T*C with L = 2K + 1.
std::uint64_t attention_flops(std::uint64_t t, std::uint64_t c, std::uint64_t k);
/// Global attention cost 4*T*C^2 + 2*T^2*C, for comparison.
std::uint64_t global_attention_flops(std::uint64_t t, std::uint64_t c);

} // namespace gebd
