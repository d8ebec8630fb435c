#include "gebd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "gebd/error.hpp"
#include "gebd/ops.hpp"

namespace gebd {

void TrainConfig::validate() const {
    // lr = 0 is accepted so a frozen run can be expressed; negative is not.
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a finite value >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    for (auto d : lr_drops) {
        if (d >= epochs) {
            throw ConfigError("lr drop epoch " + std::to_string(d) + " must be < epochs (" + std::to_string(epochs) + ")");
        }
    }
    if (!(lr_drop_factor > 0.0)) throw ConfigError("lr_drop_factor must be > 0");
    if (batch_videos < 1) throw ConfigError("batch_videos must be >= 1");
    if (!(sigma > 0.0f)) throw ConfigError("sigma must be > 0");
    if (!(decode.threshold >= 0.0f && decode.threshold <= 1.0f)) throw ConfigError("decode threshold must lie in [0, 1]");
    model.validate();
}

double TrainConfig::lr_at(std::size_t epoch) const {
    double r = lr;
    for (auto d : lr_drops) {
        if (d <= epoch) r *= lr_drop_factor;
    }
    return r;
}

TrainConfig TrainConfig::full_size() {
    TrainConfig c;
    c.epochs = 30;
    c.lr_drops = {16, 24};
    c.model = ModelConfig::full_size();
    return c;
}

Sample make_sample(const FeatureFile& features, const BoundaryAnnotation& annotation, std::size_t sample_frames) {
    Sample s;
    s.sequence = sample_frames == 0 ? full_sequence(features) : sample_uniform(features, sample_frames);
    s.annotation = annotation;
    s.boundary_frames = boundary_frames(annotation, s.sequence.timestamps);
    return s;
}

std::vector<Sample> make_samples(const std::vector<DatasetEntry>& entries, std::size_t sample_frames) {
    std::vector<Sample> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(make_sample(e.features, e.annotation, sample_frames));
    return out;
}

std::vector<Sample> make_samples(const std::vector<SyntheticVideo>& videos, std::size_t sample_frames) {
    std::vector<Sample> out;
    out.reserve(videos.size());
    for (const auto& v : videos) out.push_back(make_sample(v.features, v.annotation, sample_frames));
    return out;
}

std::vector<float> targets(const Sample& sample, const TrainConfig& cfg) {
    const std::size_t t = sample.sequence.length();
    return cfg.labels == LabelKind::gaussian ? soft_labels(sample.boundary_frames, t, cfg.sigma).labels
                                             : hard_labels(sample.boundary_frames, t).labels;
}

Tensor sample_loss(const Model& model, const Sample& sample, const TrainConfig& cfg) {
    const Tensor scores = model.forward(sample.sequence.features);
    const auto labels = targets(sample, cfg);
    return cfg.loss == LossKind::bce ? bce_loss(scores, labels) : mse_loss(scores, labels);
}

Sgd::Sgd(ParamSet& params, double momentum, double weight_decay)
    : params_(&params), momentum_(momentum), weight_decay_(weight_decay) {
    for (const auto& [name, t] : params.items()) velocity_.emplace_back(t.numel(), 0.0f);
}

void Sgd::step(double lr) {
    const auto& items = params_->items();
    for (std::size_t i = 0; i < items.size(); ++i) {
        Tensor w = items[i].second;
        float* wd = w.mutable_data().data();
        auto& v = velocity_[i];
        const float mu = static_cast<float>(momentum_), decay = static_cast<float>(weight_decay_),
                    rate = static_cast<float>(lr);
        if (w.has_grad()) {
            const auto& g = w.grad();
            for (std::size_t j = 0; j < v.size(); ++j) {
                v[j] = mu * v[j] + g[j] + decay * wd[j];
                wd[j] -= rate * v[j];
            }
        } else {
            for (std::size_t j = 0; j < v.size(); ++j) {
                v[j] = mu * v[j] + decay * wd[j];
                wd[j] -= rate * v[j];
            }
        }
    }
}

void Sgd::zero_grad() { params_->zero_grad(); }

std::string TrainLog::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : epochs) {
        j.push_back({{"epoch", e.epoch},
                     {"lr", e.lr},
                     {"loss", e.loss},
                     {"f1_at_0.05", e.f1_at_005},
                     {"avg_f1", e.avg_f1},
                     {"seconds", e.seconds}});
    }
    return nlohmann::json{{"epochs", j}}.dump(2) + "\n";
}

std::vector<VideoPrediction> predict_all(const Model& model, const std::vector<Sample>& samples,
                                         const DecodeOptions& decode) {
    std::vector<VideoPrediction> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        auto r = model.predict(s.sequence, decode);
        out.push_back({s.sequence.video_id, std::move(r.decoded), std::move(r.scores)});
    }
    return out;
}

EvalReport evaluate(const Model& model, const std::vector<Sample>& samples, const DecodeOptions& decode,
                    Aggregation aggregation) {
    std::map<std::string, BoundaryAnnotation> annotations;
    for (const auto& s : samples) annotations[s.sequence.video_id] = s.annotation;
    return sweep(predict_all(model, samples, decode), annotations, aggregation);
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const TrainConfig& cfg,
                  const TrainOptions& options) {
    cfg.validate();
    if (train_set.empty()) throw InputError("training set is empty");
    using clock = std::chrono::steady_clock;

    ModelConfig mc = cfg.model;
    mc.seed = cfg.seed;
    TrainResult result{Model(mc), {}};
    Model& model = result.model;
    Sgd opt(model.params(), cfg.momentum, cfg.weight_decay);
    Rng rng(cfg.seed ^ 0x5eedULL);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    auto save = [&](const std::string& name) {
        if (!options.checkpoint_dir.empty()) save_checkpoint(options.checkpoint_dir / name, model.checkpoint_arrays());
    };
    // Copy of the weights after the last step that left them finite.
    std::vector<std::vector<float>> good;
    auto remember = [&] {
        good.resize(model.params().size());
        const auto& items = model.params().items();
        for (std::size_t i = 0; i < items.size(); ++i) good[i].assign(items[i].second.data().begin(), items[i].second.data().end());
    };
    auto abort_with = [&](const std::string& what) {
        GradTape::current().clear();
        const auto& items = model.params().items();
        for (std::size_t i = 0; i < items.size(); ++i) {
            Tensor t = items[i].second;
            std::copy(good[i].begin(), good[i].end(), t.mutable_data().begin());
        }
        save("last_finite.ckpt");
        throw NumericError(what);
    };
    auto finite_params = [&] {
        for (const auto& [name, t] : model.params().items())
            for (float v : t.data())
                if (!std::isfinite(v)) return false;
        return true;
    };
    remember();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = clock::now();
        const double lr = cfg.lr_at(epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_videos) {
            const std::size_t end = std::min(order.size(), b + cfg.batch_videos);
            const float inv = 1.0f / static_cast<float>(end - b);
            opt.zero_grad();
            for (std::size_t i = b; i < end; ++i) {
                const Tensor loss = sample_loss(model, train_set[order[i]], cfg);
                const double value = loss.item();
                if (!std::isfinite(value)) {
                    abort_with("non-finite loss in epoch " + std::to_string(epoch) + " on video '" +
                               train_set[order[i]].sequence.video_id + "'");
                }
                total += value;
                backward(scale(loss, inv));
            }
            opt.step(lr);
            if (!finite_params()) abort_with("non-finite weights after a step in epoch " + std::to_string(epoch));
            remember();
        }

        EpochLog e;
        e.epoch = epoch;
        e.lr = lr;
        e.loss = total / static_cast<double>(train_set.size());
        const bool last = epoch + 1 == cfg.epochs;
        if (!val_set.empty() && (last || (options.eval_every > 0 && (epoch + 1) % options.eval_every == 0))) {
            const auto report = evaluate(model, val_set, cfg.decode);
            e.f1_at_005 = report.rows.front().f1;
            e.avg_f1 = report.average.f1;
        }
        e.seconds = std::chrono::duration<double>(clock::now() - start).count();
        save("last.ckpt");
        result.log.epochs.push_back(e);
        if (options.on_epoch) options.on_epoch(e);
    }
    return result;
}

} // namespace gebd
