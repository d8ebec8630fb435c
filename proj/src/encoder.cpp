#include "gebd/encoder.hpp"

#include <cmath>

#include "gebd/error.hpp"
#include "gebd/ops.hpp"

namespace gebd {

void EncoderConfig::validate() const {
    if (layers < 1) throw ConfigError("encoder layers must be >= 1");
    if (window_length < 1) throw ConfigError("window length must be >= 1");
    if (heads < 1 || channels % heads != 0) {
        throw ConfigError("channels (" + std::to_string(channels) + ") must be divisible by heads (" +
                          std::to_string(heads) + ")");
    }
    if (ffn_multiplier < 1) throw ConfigError("ffn multiplier must be >= 1");
}

EncoderWeights EncoderWeights::create(const EncoderConfig& cfg, ParamSet& params, Rng& rng,
                                      const std::string& prefix) {
    cfg.validate();
    const std::size_t c = cfg.channels, hidden = c * cfg.ffn_multiplier;
    EncoderWeights w;
    if (cfg.positional_embedding) {
        w.positional = params.add(prefix + "pos", normal_init({cfg.window_length, c}, 0.02f, rng));
    }
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        const std::string p = prefix + "layer" + std::to_string(i) + ".";
        EncoderLayerWeights l;
        l.norm1_gain = params.add(p + "norm1.gain", Tensor::full({c}, 1.0f));
        l.norm1_bias = params.add(p + "norm1.bias", Tensor::zeros({c}));
        l.qkv_weight = params.add(p + "attn.qkv.weight", he_uniform({c, 3 * c}, c, rng));
        l.qkv_bias = params.add(p + "attn.qkv.bias", Tensor::zeros({3 * c}));
        l.out_weight = params.add(p + "attn.out.weight", he_uniform({c, c}, c, rng));
        l.out_bias = params.add(p + "attn.out.bias", Tensor::zeros({c}));
        l.norm2_gain = params.add(p + "norm2.gain", Tensor::full({c}, 1.0f));
        l.norm2_bias = params.add(p + "norm2.bias", Tensor::zeros({c}));
        l.ffn1_weight = params.add(p + "ffn1.weight", he_uniform({c, hidden}, c, rng));
        l.ffn1_bias = params.add(p + "ffn1.bias", Tensor::zeros({hidden}));
        l.ffn2_weight = params.add(p + "ffn2.weight", he_uniform({hidden, c}, hidden, rng));
        l.ffn2_bias = params.add(p + "ffn2.bias", Tensor::zeros({c}));
        w.layers.push_back(std::move(l));
    }
    w.final_gain = params.add(prefix + "norm.gain", Tensor::full({c}, 1.0f));
    w.final_bias = params.add(prefix + "norm.bias", Tensor::zeros({c}));
    return w;
}

namespace {

Tensor self_attention(const Tensor& x, const EncoderLayerWeights& w, std::size_t heads) {
    const std::size_t n = x.dim(0), l = x.dim(1), c = x.dim(2), dh = c / heads;
    const Tensor qkv = linear(x, w.qkv_weight, w.qkv_bias);
    auto split = [&](std::size_t part) { return reshape(narrow(qkv, 2, part * c, c), {n, l, heads, dh}); };
    const Tensor q = permute(split(0), {0, 2, 1, 3});     // [N, H, L, dh]
    const Tensor kt = permute(split(1), {0, 2, 3, 1});    // [N, H, dh, L]
    const Tensor v = permute(split(2), {0, 2, 1, 3});     // [N, H, L, dh]
    const Tensor scores = scale(matmul(q, kt), 1.0f / std::sqrt(static_cast<float>(dh)));
    const Tensor mixed = matmul(softmax(scores, -1), v);  // [N, H, L, dh]
    const Tensor merged = reshape(permute(mixed, {0, 2, 1, 3}), {n, l, c});
    return linear(merged, w.out_weight, w.out_bias);
}

} // namespace

Tensor encode(const Tensor& windows, const EncoderConfig& cfg, const EncoderWeights& weights) {
    cfg.validate();
    if (windows.rank() != 3) throw ShapeError("encode: windows must be [N, L, C], got " + shape_str(windows.shape()));
    if (windows.dim(2) != cfg.channels) {
        throw ConfigError("encode: window channels " + std::to_string(windows.dim(2)) +
                          " != configured channels " + std::to_string(cfg.channels));
    }
    if (windows.dim(1) != cfg.window_length) {
        throw ConfigError("encode: window length " + std::to_string(windows.dim(1)) +
                          " != configured length " + std::to_string(cfg.window_length));
    }
    Tensor x = cfg.positional_embedding ? add(windows, weights.positional) : windows;
    for (const auto& layer : weights.layers) {
        x = add(x, self_attention(layer_norm(x, layer.norm1_gain, layer.norm1_bias), layer, cfg.heads));
        const Tensor h = relu(linear(layer_norm(x, layer.norm2_gain, layer.norm2_bias), layer.ffn1_weight,
                                     layer.ffn1_bias));
        x = add(x, linear(h, layer.ffn2_weight, layer.ffn2_bias));
    }
    return layer_norm(x, weights.final_gain, weights.final_bias);
}

EncodedWindow encode(const ContextWindowBatch& batch, const EncoderConfig& cfg, const EncoderWeights& weights) {
    return {encode(batch.windows, cfg, weights)};
}

std::uint64_t attention_flops(std::uint64_t t, std::uint64_t c, std::uint64_t k) {
    const std::uint64_t l = 2 * k + 1;
    return 4 * t * c * c + 2 * l * l * t * c;
}

std::uint64_t global_attention_flops(std::uint64_t t, std::uint64_t c) {
    return 4 * t * c * c + 2 * t * t * c;
}

} // namespace gebd
