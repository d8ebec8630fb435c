#pragma once

// SGD training loop and batch evaluation for the boundary detector.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gebd/boundary_head.hpp"
#include "gebd/data_io.hpp"
#include "gebd/eval.hpp"
#include "gebd/model.hpp"

namespace gebd {

struct TrainConfig {
    double lr = 1e-2;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t epochs = 15;
    std::vector<std::size_t> lr_drops = {8, 12};
    double lr_drop_factor = 0.1;
    std::size_t batch_videos = 1;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::bce;
    LabelKind labels = LabelKind::gaussian;
    float sigma = 1.0f;
    std::size_t sample_frames = 100;  // 0 keeps every frame
    ModelConfig model;
    DecodeOptions decode;

    void validate() const;
    /// Learning rate in effect during epoch `epoch` (0-based).
    double lr_at(std::size_t epoch) const;

    /// Full-size schedule: C=256, 6 layers, 30 epochs, drops at 16 and 24.
    static TrainConfig full_size();
};

/// One video prepared for training or evaluation.
struct Sample {
    FeatureSequence sequence;
    BoundaryAnnotation annotation;
    std::vector<std::size_t> boundary_frames;
};

Sample make_sample(const FeatureFile& features, const BoundaryAnnotation& annotation, std::size_t sample_frames);
std::vector<Sample> make_samples(const std::vector<DatasetEntry>& entries, std::size_t sample_frames);
std::vector<Sample> make_samples(const std::vector<SyntheticVideo>& videos, std::size_t sample_frames);

/// Per-frame training targets for one sample.
std::vector<float> targets(const Sample& sample, const TrainConfig& cfg);

/// Mean loss of one sample under the configured loss; differentiable.
Tensor sample_loss(const Model& model, const Sample& sample, const TrainConfig& cfg);

/// v = momentum * v + g + wd * w;  w -= lr * v.
class Sgd {
public:
    Sgd(ParamSet& params, double momentum, double weight_decay);
    void step(double lr);
    void zero_grad();

private:
    ParamSet* params_;
    double momentum_, weight_decay_;
    std::vector<std::vector<float>> velocity_;
};

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double f1_at_005 = 0.0;
    double avg_f1 = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    std::string to_json() const;
};

struct TrainResult {
    Model model;
    TrainLog log;
};

struct TrainOptions {
    std::filesystem::path checkpoint_dir;  // empty: no checkpoints written
    std::size_t eval_every = 1;            // validation cadence in epochs; the last epoch is always evaluated
    std::function<void(const EpochLog&)> on_epoch;
};

/// Mini-batch SGD from a model initialised with cfg.seed; the gradient of a
/// batch is the mean of its per-video losses. A non-finite loss or weight
/// aborts with NumericError after saving the last finite weights to
/// <checkpoint_dir>/last_finite.ckpt.
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const TrainConfig& cfg,
                  const TrainOptions& options = {});

std::vector<VideoPrediction> predict_all(const Model& model, const std::vector<Sample>& samples,
                                         const DecodeOptions& decode = {});
EvalReport evaluate(const Model& model, const std::vector<Sample>& samples, const DecodeOptions& decode = {},
                    Aggregation aggregation = Aggregation::micro);

} // namespace gebd
