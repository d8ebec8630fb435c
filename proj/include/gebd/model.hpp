#pragma once

// Full boundary detector: input projection -> structured partition ->
// windowed encoder -> group similarity + FCN -> frame reassembly -> head.

#include <cstdint>
#include <string_view>
#include <vector>

#include "gebd/boundary_head.hpp"
#include "gebd/checkpoint.hpp"
#include "gebd/data_io.hpp"
#include "gebd/encoder.hpp"
#include "gebd/group_similarity.hpp"
#include "gebd/spos.hpp"

namespace gebd {

/// `spos` is the structured-context model; `conv1d` replaces the partition,
/// encoder and similarity stages with stacked 1D convolutions (baseline).
enum class Representation { spos, conv1d };

Representation parse_representation(std::string_view name);
std::string_view to_string(Representation r);

struct ModelConfig {
    std::size_t input_channels = 32;
    std::size_t channels = 64;
    std::size_t window_k = 8;
    std::size_t groups = 4;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t ffn_multiplier = 4;
    bool positional_embedding = true;
    SimilarityKind similarity = SimilarityKind::cosine;
    bool clamp_to_last_real_frame = false;
    Representation representation = Representation::spos;
    std::uint64_t seed = 0;

    void validate() const;
    EncoderConfig encoder() const;
    std::size_t window_length() const { return 2 * window_k + 1; }

    /// Width and depth used for the published numbers (C=256, 6 layers).
    static ModelConfig full_size();
};

struct ForwardStats {
    std::size_t windows_encoded = 0;    // candidate windows run through the encoder
    std::size_t window_positions = 0;   // windows_encoded * L
};

class Model {
public:
    explicit Model(ModelConfig config);
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    /// Deep copy of configuration and weights.
    Model clone() const;

    const ModelConfig& config() const { return config_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    /// features [T, input_channels] -> per-frame representations V [T, C].
    Tensor frame_representation(const Tensor& features, ForwardStats* stats = nullptr) const;
    /// features [T, input_channels] -> boundary probabilities [T].
    Tensor forward(const Tensor& features, ForwardStats* stats = nullptr) const;
    /// Grouped similarity maps for every padded frame, in frame order [T', G, L, L].
    Tensor similarity_maps(const Tensor& features) const;

    /// One gradient-free forward pass plus decoding.
    ScoreSequence predict(const FeatureSequence& sequence, const DecodeOptions& decode = {},
                          ForwardStats* stats = nullptr) const;

    std::vector<NamedArray> checkpoint_arrays() const;
    static Model from_checkpoint(const std::vector<NamedArray>& arrays);

private:
    ModelConfig config_;
    ParamSet params_;
    Tensor input_weight_, input_bias_;
    EncoderWeights encoder_;
    FcnWeights fcn_;
    HeadWeights head_;
    std::vector<Tensor> cnn_weights_, cnn_biases_;
};

} // namespace gebd
