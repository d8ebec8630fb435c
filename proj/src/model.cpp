#include "gebd/model.hpp"

#include <algorithm>

#include "gebd/error.hpp"
#include "gebd/ops.hpp"

namespace gebd {

Representation parse_representation(std::string_view name) {
    if (name == "spos") return Representation::spos;
    if (name == "conv1d") return Representation::conv1d;
    throw ConfigError("unknown representation '" + std::string(name) + "' (expected spos|conv1d)");
}

std::string_view to_string(Representation r) { return r == Representation::spos ? "spos" : "conv1d"; }

void ModelConfig::validate() const {
    if (window_k < 1) throw ConfigError("K must be >= 1 (got " + std::to_string(window_k) + ")");
    if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
    if (channels < 4 || channels % 4 != 0) {
        throw ConfigError("channels C must be a positive multiple of 4 (got " + std::to_string(channels) + ")");
    }
    if (groups < 1 || channels % groups != 0) {
        throw ConfigError("channels C=" + std::to_string(channels) + " not divisible by groups G=" +
                          std::to_string(groups));
    }
    encoder().validate();
}

EncoderConfig ModelConfig::encoder() const {
    return {layers, channels, heads, ffn_multiplier, window_length(), positional_embedding};
}

ModelConfig ModelConfig::full_size() {
    ModelConfig c;
    c.channels = 256;
    c.layers = 6;
    return c;
}

Model::Model(ModelConfig config) : config_(config) {
    config_.validate();
    Rng rng(config_.seed);
    const std::size_t c = config_.channels;
    input_weight_ = params_.add("input.weight", he_uniform({config_.input_channels, c}, config_.input_channels, rng));
    input_bias_ = params_.add("input.bias", Tensor::zeros({c}));
    if (config_.representation == Representation::spos) {
        encoder_ = EncoderWeights::create(config_.encoder(), params_, rng);
        fcn_ = FcnWeights::create(config_.groups, c, params_, rng);
    } else {
        for (std::size_t i = 0; i < config_.layers; ++i) {
            const std::string p = "cnn1d.conv" + std::to_string(i) + ".";
            cnn_weights_.push_back(params_.add(p + "weight", he_uniform({c, c, 3}, c * 3, rng)));
            cnn_biases_.push_back(params_.add(p + "bias", Tensor::zeros({c})));
        }
    }
    head_ = HeadWeights::create(c, params_, rng);
}

Model Model::clone() const {
    Model m(config_);
    m.params_.load(params_.items());
    return m;
}

namespace {
constexpr std::size_t kWindowChunk = 32;
} // namespace

Tensor Model::frame_representation(const Tensor& features, ForwardStats* stats) const {
    if (features.rank() != 2 || features.dim(1) != config_.input_channels) {
        throw ConfigError("model expects [T, " + std::to_string(config_.input_channels) + "] features, got " +
                          shape_str(features.shape()));
    }
    const std::size_t t = features.dim(0);
    const Tensor x = linear(features, input_weight_, input_bias_);

    if (config_.representation == Representation::conv1d) {
        Tensor y = reshape(transpose(x, 0, 1), {1, config_.channels, t});
        for (std::size_t i = 0; i < cnn_weights_.size(); ++i) y = relu(conv1d(y, cnn_weights_[i], cnn_biases_[i]));
        return transpose(reshape(y, {config_.channels, t}), 0, 1);
    }

    const std::size_t k = config_.window_k;
    const auto batches = partition(x, k, {config_.clamp_to_last_real_frame});
    std::vector<Tensor> windows;
    windows.reserve(batches.size());
    for (const auto& b : batches) windows.push_back(b.windows);
    // All K slices share the encoder, so they run as one batch of windows.
    const Tensor all = concat(windows, 0);
    const std::size_t n = batches[0].windows.dim(0);
    if (stats) {
        stats->windows_encoded += all.dim(0);
        stats->window_positions += all.dim(0) * all.dim(1);
    }
    // Windows are independent, so they go through the encoder and FCN in
    // fixed-size chunks; the working set then stays cache-sized for any T.
    const std::size_t total = all.dim(0);
    std::vector<Tensor> parts;
    for (std::size_t s = 0; s < total; s += kWindowChunk) {
        const std::size_t len = std::min(kWindowChunk, total - s);
        const Tensor chunk = len == total ? all : narrow(all, 0, s, len);
        const Tensor encoded = encode(chunk, config_.encoder(), encoder_);
        const auto maps = similarity(split_groups(encoded, config_.groups), config_.similarity);
        parts.push_back(read_patterns(maps, fcn_).h);
    }
    const Tensor h = parts.size() == 1 ? parts[0] : concat(parts, 0);  // [K*N, C]
    std::vector<Tensor> per_slice;
    per_slice.reserve(k);
    for (std::size_t i = 0; i < k; ++i) per_slice.push_back(narrow(h, 0, i * n, n));
    return scatter_outputs(per_slice, t);
}

Tensor Model::forward(const Tensor& features, ForwardStats* stats) const {
    return classify(frame_representation(features, stats), head_);
}

Tensor Model::similarity_maps(const Tensor& features) const {
    if (config_.representation != Representation::spos) throw UsageError("similarity maps need the spos representation");
    NoGradGuard guard;
    const Tensor x = linear(features, input_weight_, input_bias_);
    const std::size_t k = config_.window_k;
    const auto batches = partition(x, k, {config_.clamp_to_last_real_frame});
    std::vector<Tensor> windows;
    for (const auto& b : batches) windows.push_back(b.windows);
    const std::size_t n = batches[0].windows.dim(0), g = config_.groups, l = config_.window_length();
    const Tensor maps =
        similarity(split_groups(encode(concat(windows, 0), config_.encoder(), encoder_), g), config_.similarity).maps;
    // Rows are slice-major; reorder to frame order.
    return reshape(permute(reshape(maps, {k, n, g * l * l}), {1, 0, 2}), {n * k, g, l, l});
}

ScoreSequence Model::predict(const FeatureSequence& sequence, const DecodeOptions& decode, ForwardStats* stats) const {
    NoGradGuard guard;
    ScoreSequence out;
    out.scores = forward(sequence.features, stats).to_vector();
    out.decoded = decode_boundaries(out.scores, sequence.timestamps, decode);
    return out;
}

namespace {

Tensor meta(double v) { return Tensor::from({1}, {static_cast<float>(v)}); }

std::size_t meta_value(const std::vector<NamedArray>& arrays, const std::string& name) {
    for (const auto& [n, t] : arrays) {
        if (n == "meta." + name) {
            if (t.numel() != 1) throw ParseError("checkpoint meta." + name + " must hold one value");
            const float v = t.data()[0];
            if (!(v >= 0.0f)) throw ParseError("checkpoint meta." + name + " is negative");
            return static_cast<std::size_t>(v);
        }
    }
    throw ConfigError("checkpoint lacks meta." + name + " (not a model checkpoint?)");
}

constexpr SimilarityKind kKinds[] = {SimilarityKind::cosine, SimilarityKind::euclidean, SimilarityKind::manhattan,
                                     SimilarityKind::chebyshev};

} // namespace

std::vector<NamedArray> Model::checkpoint_arrays() const {
    std::vector<NamedArray> out;
    const auto& c = config_;
    const std::size_t kind = static_cast<std::size_t>(std::find(std::begin(kKinds), std::end(kKinds), c.similarity) -
                                                      std::begin(kKinds));
    out.emplace_back("meta.input_channels", meta(c.input_channels));
    out.emplace_back("meta.channels", meta(c.channels));
    out.emplace_back("meta.window_k", meta(c.window_k));
    out.emplace_back("meta.groups", meta(c.groups));
    out.emplace_back("meta.layers", meta(c.layers));
    out.emplace_back("meta.heads", meta(c.heads));
    out.emplace_back("meta.ffn_multiplier", meta(c.ffn_multiplier));
    out.emplace_back("meta.positional_embedding", meta(c.positional_embedding ? 1 : 0));
    out.emplace_back("meta.similarity", meta(kind));
    out.emplace_back("meta.clamp_to_last_real_frame", meta(c.clamp_to_last_real_frame ? 1 : 0));
    out.emplace_back("meta.representation", meta(c.representation == Representation::spos ? 0 : 1));
    for (const auto& [name, t] : params_.items()) out.emplace_back(name, t);
    return out;
}

Model Model::from_checkpoint(const std::vector<NamedArray>& arrays) {
    ModelConfig c;
    c.input_channels = meta_value(arrays, "input_channels");
    c.channels = meta_value(arrays, "channels");
    c.window_k = meta_value(arrays, "window_k");
    c.groups = meta_value(arrays, "groups");
    c.layers = meta_value(arrays, "layers");
    c.heads = meta_value(arrays, "heads");
    c.ffn_multiplier = meta_value(arrays, "ffn_multiplier");
    c.positional_embedding = meta_value(arrays, "positional_embedding") != 0;
    const std::size_t kind = meta_value(arrays, "similarity");
    if (kind >= std::size(kKinds)) throw ParseError("checkpoint has unknown similarity code " + std::to_string(kind));
    c.similarity = kKinds[kind];
    c.clamp_to_last_real_frame = meta_value(arrays, "clamp_to_last_real_frame") != 0;
    c.representation = meta_value(arrays, "representation") == 0 ? Representation::spos : Representation::conv1d;
    Model m(c);
    m.params_.load(arrays);
    return m;
}

} // namespace gebd
