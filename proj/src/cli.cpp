#include "gebd/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gebd/bench.hpp"
#include "gebd/error.hpp"
#include "gebd/fileutil.hpp"

namespace gebd {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) throw ConfigError("unknown config key '" + where + key + "'");
    }
}

template <typename T>
void read_key(const json& obj, const char* key, T& dst, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        dst = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + where + key + "' has the wrong type");
    }
}

void read_size(const json& obj, const char* key, std::size_t& dst, const std::string& where) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError("config key '" + where + key + "' must be a non-negative integer");
    }
    dst = v.get<std::size_t>();
}

template <typename Parse>
auto read_enum(const json& obj, const char* key, Parse parse, decltype(parse("")) dst, const std::string& where) {
    std::string name;
    read_key(obj, key, name, where);
    return obj.contains(key) ? parse(name) : dst;
}

} // namespace

TrainConfig train_config_from_json(const std::string& text, TrainConfig cfg) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"seed", "epochs", "lr", "momentum", "weight_decay", "lr_drops", "lr_drop_factor", "batch_videos",
                    "loss", "labels", "sigma", "sample_frames", "threshold", "min_separation", "model"},
                   "");
    read_key(j, "seed", cfg.seed, "");
    read_size(j, "epochs", cfg.epochs, "");
    read_key(j, "lr", cfg.lr, "");
    read_key(j, "momentum", cfg.momentum, "");
    read_key(j, "weight_decay", cfg.weight_decay, "");
    read_key(j, "lr_drops", cfg.lr_drops, "");
    read_key(j, "lr_drop_factor", cfg.lr_drop_factor, "");
    read_size(j, "batch_videos", cfg.batch_videos, "");
    cfg.loss = read_enum(j, "loss", parse_loss, cfg.loss, "");
    cfg.labels = read_enum(j, "labels", parse_labels, cfg.labels, "");
    read_key(j, "sigma", cfg.sigma, "");
    read_size(j, "sample_frames", cfg.sample_frames, "");
    read_key(j, "threshold", cfg.decode.threshold, "");
    read_size(j, "min_separation", cfg.decode.min_separation, "");
    if (j.contains("model")) {
        const auto& m = j.at("model");
        if (!m.is_object()) throw ConfigError("config key 'model' must be an object");
        reject_unknown(m,
                       {"input_channels", "channels", "K", "groups", "layers", "heads", "ffn_multiplier",
                        "positional_embedding", "similarity", "clamp_to_last_real_frame", "representation"},
                       "model.");
        auto& mc = cfg.model;
        read_size(m, "input_channels", mc.input_channels, "model.");
        read_size(m, "channels", mc.channels, "model.");
        read_size(m, "K", mc.window_k, "model.");
        read_size(m, "groups", mc.groups, "model.");
        read_size(m, "layers", mc.layers, "model.");
        read_size(m, "heads", mc.heads, "model.");
        read_size(m, "ffn_multiplier", mc.ffn_multiplier, "model.");
        read_key(m, "positional_embedding", mc.positional_embedding, "model.");
        mc.similarity = read_enum(m, "similarity", parse_similarity, mc.similarity, "model.");
        read_key(m, "clamp_to_last_real_frame", mc.clamp_to_last_real_frame, "model.");
        mc.representation = read_enum(m, "representation", parse_representation, mc.representation, "model.");
    }
    return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
    const auto& m = cfg.model;
    json j = {{"seed", cfg.seed},
              {"epochs", cfg.epochs},
              {"lr", cfg.lr},
              {"momentum", cfg.momentum},
              {"weight_decay", cfg.weight_decay},
              {"lr_drops", cfg.lr_drops},
              {"lr_drop_factor", cfg.lr_drop_factor},
              {"batch_videos", cfg.batch_videos},
              {"loss", std::string(to_string(cfg.loss))},
              {"labels", std::string(to_string(cfg.labels))},
              {"sigma", cfg.sigma},
              {"sample_frames", cfg.sample_frames},
              {"threshold", cfg.decode.threshold},
              {"min_separation", cfg.decode.min_separation},
              {"model",
               {{"input_channels", m.input_channels},
                {"channels", m.channels},
                {"K", m.window_k},
                {"groups", m.groups},
                {"layers", m.layers},
                {"heads", m.heads},
                {"ffn_multiplier", m.ffn_multiplier},
                {"positional_embedding", m.positional_embedding},
                {"similarity", std::string(to_string(m.similarity))},
                {"clamp_to_last_real_frame", m.clamp_to_last_real_frame},
                {"representation", std::string(to_string(m.representation))}}}};
    return j.dump(2) + "\n";
}

namespace {

std::vector<std::filesystem::path> feature_paths(const std::filesystem::path& p) {
    namespace fs = std::filesystem;
    if (!fs::exists(p)) throw InputError("features path '" + p.string() + "' does not exist");
    if (!fs::is_directory(p)) return {p};
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".scxf") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw InputError("no .scxf files in '" + p.string() + "'");
    return out;
}

FeatureSequence load_sequence(const std::filesystem::path& path, std::size_t sample_frames) {
    const auto file = read_features(path);
    return sample_frames == 0 ? full_sequence(file) : sample_uniform(file, sample_frames);
}

std::vector<std::size_t> parse_lengths(const std::string& list) {
    std::vector<std::size_t> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != item.size() || v == 0) throw ConfigError("--T expects positive integers, got '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--T list is empty");
    return out;
}

struct GenArgs {
    std::string out;
    std::size_t count = 100;
    SyntheticSpec spec;
};

struct TrainArgs {
    std::string data, val, config, out;
    bool full_size = false, quiet = false;
    std::uint64_t seed = 0;
    std::size_t epochs = 0, batch = 0, k = 0, channels = 0, groups = 0, layers = 0, sample_frames = 0;
    double lr = 0.0;
    std::vector<std::size_t> lr_drops;
    std::string similarity, loss, labels, representation;
};

struct PredictArgs {
    std::string ckpt, features, out;
    std::size_t sample_frames = 100, min_separation = 2;
    float threshold = 0.5f;
};

struct EvalArgs {
    std::string preds, annots, out;
    bool macro = false;
};

struct BenchArgs {
    std::string mode = "scaling", lengths = "64,128,256,512", out;
    std::size_t k = 8, channels = 64, groups = 4, layers = 2, input_channels = 32, repeats = 3;
    std::uint64_t seed = 0;
};

struct SimArgs {
    std::string ckpt, features, out;
    std::size_t sample_frames = 100;
    long long frame = -1;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
    a.spec.validate();
    if (a.count == 0) throw ConfigError("--count must be >= 1");
    const auto videos = generate_dataset(a.spec, a.count);
    write_dataset(a.out, videos);
    out << "wrote " << videos.size() << " videos to " << a.out << "\n";
    return 0;
}

int cmd_train(const CLI::App& sub, const TrainArgs& a, std::ostream& out) {
    TrainConfig cfg = a.full_size ? TrainConfig::full_size() : TrainConfig{};
    if (!a.config.empty()) cfg = train_config_from_json(read_file(a.config), cfg);
    auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
    if (given("--seed")) cfg.seed = a.seed;
    if (given("--epochs")) cfg.epochs = a.epochs;
    if (given("--lr")) cfg.lr = a.lr;
    if (given("--lr-drops")) cfg.lr_drops = a.lr_drops;
    if (given("--batch")) cfg.batch_videos = a.batch;
    if (given("--sample-frames")) cfg.sample_frames = a.sample_frames;
    if (given("--K")) cfg.model.window_k = a.k;
    if (given("--channels")) cfg.model.channels = a.channels;
    if (given("--groups")) cfg.model.groups = a.groups;
    if (given("--layers")) cfg.model.layers = a.layers;
    if (given("--similarity")) cfg.model.similarity = parse_similarity(a.similarity);
    if (given("--loss")) cfg.loss = parse_loss(a.loss);
    if (given("--labels")) cfg.labels = parse_labels(a.labels);
    if (given("--representation")) cfg.model.representation = parse_representation(a.representation);
    cfg.validate();

    const auto train_set = make_samples(read_dataset(a.data), cfg.sample_frames);
    if (train_set.empty()) throw InputError("dataset '" + a.data + "' has no videos");
    const std::vector<Sample> val_set = a.val.empty() ? std::vector<Sample>{}
                                                      : make_samples(read_dataset(a.val), cfg.sample_frames);
    cfg.model.input_channels = train_set.front().sequence.features.dim(1);
    for (const auto& s : val_set) {
        if (s.sequence.features.dim(1) != cfg.model.input_channels) {
            throw InputError("validation video '" + s.sequence.video_id + "' has a different channel count");
        }
    }
    const std::filesystem::path dir(a.out);
    write_file_atomic(dir / "config.json", train_config_to_json(cfg));

    TrainOptions opts;
    opts.checkpoint_dir = dir;
    if (!a.quiet) {
        opts.on_epoch = [&](const EpochLog& e) {
            char line[160];
            std::snprintf(line, sizeof line, "epoch %zu lr %.2e loss %.6f f1@0.05 %.4f avg_f1 %.4f (%.1fs)\n", e.epoch,
                          e.lr, e.loss, e.f1_at_005, e.avg_f1, e.seconds);
            out << line << std::flush;
        };
    }
    const auto result = train(train_set, val_set, cfg, opts);
    save_checkpoint(dir / "model.ckpt", result.model.checkpoint_arrays());
    write_file_atomic(dir / "train_log.json", result.log.to_json());
    out << "saved " << (dir / "model.ckpt").string() << "\n";
    return 0;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    const DecodeOptions decode{a.threshold, a.min_separation};
    if (!(decode.threshold >= 0.0f && decode.threshold <= 1.0f)) throw ConfigError("--threshold must lie in [0, 1]");
    const Model model = Model::from_checkpoint(load_checkpoint(a.ckpt));
    std::vector<VideoPrediction> preds;
    for (const auto& path : feature_paths(a.features)) {
        const auto seq = load_sequence(path, a.sample_frames);
        if (seq.features.dim(1) != model.config().input_channels) {
            throw ConfigError("features '" + path.string() + "' have " + std::to_string(seq.features.dim(1)) +
                              " channels but the checkpoint expects " + std::to_string(model.config().input_channels));
        }
        auto r = model.predict(seq, decode);
        preds.push_back({seq.video_id, std::move(r.decoded), std::move(r.scores)});
    }
    write_predictions(a.out, preds);
    out << "wrote predictions for " << preds.size() << " videos to " << a.out << "\n";
    return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    const auto preds = read_predictions(a.preds);
    const auto annots = read_annotations(a.annots);
    const auto report = sweep(preds, annots, a.macro ? Aggregation::macro : Aggregation::micro);
    for (const auto& e : report.errors) err << "warning: " << e << "\n";
    const auto csv = report_csv(report);
    if (a.out.empty()) {
        out << csv;
    } else {
        write_file_atomic(a.out, csv);
    }
    return 0;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    if (a.mode != "scaling") throw ConfigError("unknown bench mode '" + a.mode + "' (expected scaling)");
    const auto lengths = parse_lengths(a.lengths);
    ModelConfig mc;
    mc.window_k = a.k;
    mc.channels = a.channels;
    mc.groups = a.groups;
    mc.layers = a.layers;
    mc.input_channels = a.input_channels;
    mc.seed = a.seed;
    mc.validate();
    const Model model(mc);
    const auto points = scaling_bench(model, lengths, a.repeats, a.seed);
    json rows = json::array();
    out << "T,seconds,windows_encoded,attention_flops\n";
    for (const auto& p : points) {
        char line[128];
        std::snprintf(line, sizeof line, "%zu,%.6f,%zu,%llu\n", p.length, p.seconds, p.windows_encoded,
                      static_cast<unsigned long long>(p.attention_flops));
        out << line;
        rows.push_back({{"T", p.length},
                        {"seconds", p.seconds},
                        {"windows_encoded", p.windows_encoded},
                        {"attention_flops", p.attention_flops}});
    }
    json doc = {{"K", a.k}, {"C", a.channels}, {"points", rows}};
    if (points.size() >= 3) {
        const auto fit = fit_scaling(points);
        char line[160];
        std::snprintf(line, sizeof line, "fit: seconds = %.3e * T + %.3e; quadratic share at T=%zu: %.2f%%\n",
                      fit.slope, fit.intercept, lengths.back(), 100.0 * fit.quadratic_share);
        out << line;
        doc["fit"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"quadratic_share", fit.quadratic_share}};
    }
    if (!a.out.empty()) write_file_atomic(a.out, doc.dump(2) + "\n");
    return 0;
}

int cmd_simmaps(const SimArgs& a, std::ostream& out) {
    const Model model = Model::from_checkpoint(load_checkpoint(a.ckpt));
    const auto seq = load_sequence(a.features, a.sample_frames);
    const Tensor maps = model.similarity_maps(seq.features);
    const std::size_t t = seq.length(), g = maps.dim(1), l = maps.dim(2);
    if (a.frame >= static_cast<long long>(t)) {
        throw ConfigError("--frame " + std::to_string(a.frame) + " is outside [0, " + std::to_string(t) + ")");
    }
    const auto v = maps.data();
    std::string csv = "frame,group,row,col,value\n";
    char line[96];
    for (std::size_t f = 0; f < t; ++f) {
        if (a.frame >= 0 && f != static_cast<std::size_t>(a.frame)) continue;
        for (std::size_t gi = 0; gi < g; ++gi) {
            for (std::size_t i = 0; i < l; ++i) {
                for (std::size_t j = 0; j < l; ++j) {
                    std::snprintf(line, sizeof line, "%zu,%zu,%zu,%zu,%.6f\n", f, gi, i, j,
                                  v[((f * g + gi) * l + i) * l + j]);
                    csv += line;
                }
            }
        }
    }
    write_file_atomic(a.out, csv);
    out << "wrote similarity maps to " << a.out << "\n";
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Generic event boundary detection with structured context", "gebd"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen-data", "Generate a planted-boundary synthetic dataset");
    g->add_option("--out", gen.out, "Output dataset directory")->required();
    g->add_option("--count", gen.count, "Number of videos");
    g->add_option("--seed", gen.spec.seed, "Random seed");
    g->add_option("--frames", gen.spec.frames, "Frames per video");
    g->add_option("--channels", gen.spec.channels, "Feature channels");
    g->add_option("--noise", gen.spec.noise, "Gaussian noise std-dev");
    g->add_option("--min-segments", gen.spec.min_segments, "Minimum segments per video");
    g->add_option("--max-segments", gen.spec.max_segments, "Maximum segments per video");
    g->add_option("--latent-dim", gen.spec.latent_dim, "Latent segment dimension");
    g->add_option("--latent-scale", gen.spec.latent_scale, "Latent segment std-dev");
    g->add_option("--jitter", gen.spec.jitter, "Rater jitter std-dev in frames");
    g->add_option("--raters", gen.spec.raters, "Raters per video");
    g->add_option("--fps", gen.spec.fps, "Frames per second");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a boundary detector");
    t->add_option("--data", tr.data, "Training dataset directory")->required();
    t->add_option("--val", tr.val, "Validation dataset directory");
    t->add_option("--config", tr.config, "JSON config file");
    t->add_option("--out", tr.out, "Checkpoint directory")->required();
    t->add_flag("--full-size", tr.full_size, "Start from the full-size configuration (C=256, 6 layers, 30 epochs)");
    t->add_flag("--quiet", tr.quiet, "No per-epoch output");
    t->add_option("--seed", tr.seed, "Random seed");
    t->add_option("--epochs", tr.epochs, "Training epochs");
    t->add_option("--lr", tr.lr, "Base learning rate");
    t->add_option("--lr-drops", tr.lr_drops, "Epochs after which the rate drops 10x (comma-separated)")
        ->delimiter(',')
        ->expected(0, -1);
    t->add_option("--batch", tr.batch, "Videos per SGD step");
    t->add_option("--sample-frames", tr.sample_frames, "Frames sampled per video (0 keeps all)");
    t->add_option("--K", tr.k, "Context half-width K");
    t->add_option("--channels", tr.channels, "Model width C");
    t->add_option("--groups", tr.groups, "Similarity groups G");
    t->add_option("--layers", tr.layers, "Encoder layers");
    t->add_option("--similarity", tr.similarity, "cosine|euclidean|manhattan|chebyshev");
    t->add_option("--loss", tr.loss, "bce|mse");
    t->add_option("--labels", tr.labels, "gaussian|hard");
    t->add_option("--representation", tr.representation, "spos|conv1d");

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Score and decode boundaries");
    p->add_option("--ckpt", pr.ckpt, "Model checkpoint")->required();
    p->add_option("--features", pr.features, "Feature file or directory of .scxf files")->required();
    p->add_option("--out", pr.out, "Predictions JSON")->required();
    p->add_option("--sample-frames", pr.sample_frames, "Frames sampled per video (0 keeps all)");
    p->add_option("--threshold", pr.threshold, "Decoding threshold");
    p->add_option("--min-separation", pr.min_separation, "Local-maximum radius in frames");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "F1 sweep over relative-distance thresholds");
    e->add_option("--preds", ev.preds, "Predictions JSON")->required();
    e->add_option("--annots", ev.annots, "Annotations JSON")->required();
    e->add_option("--out", ev.out, "Report CSV (stdout when omitted)");
    e->add_flag("--macro", ev.macro, "Average per-video F1 instead of pooling counts");

    BenchArgs be;
    auto* b = app.add_subcommand("bench", "Runtime scaling benchmark");
    b->add_option("--mode", be.mode, "Benchmark mode (scaling)");
    b->add_option("--T", be.lengths, "Comma-separated sequence lengths");
    b->add_option("--K", be.k, "Context half-width K");
    b->add_option("--channels", be.channels, "Model width C");
    b->add_option("--groups", be.groups, "Similarity groups G");
    b->add_option("--layers", be.layers, "Encoder layers");
    b->add_option("--input-channels", be.input_channels, "Input feature channels");
    b->add_option("--repeats", be.repeats, "Interleaved timing rounds (median per length)");
    b->add_option("--seed", be.seed, "Random seed");
    b->add_option("--out", be.out, "Optional JSON results file");

    SimArgs sm;
    auto* s = app.add_subcommand("dump-simmaps", "Write grouped similarity maps as CSV");
    s->add_option("--ckpt", sm.ckpt, "Model checkpoint")->required();
    s->add_option("--features", sm.features, "Feature file")->required();
    s->add_option("--out", sm.out, "Output CSV")->required();
    s->add_option("--frame", sm.frame, "Only this frame (default: all)");
    s->add_option("--sample-frames", sm.sample_frames, "Frames sampled (0 keeps all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& ex) {
        err << "error: " << ex.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (g->parsed()) return cmd_gen(gen, out);
        if (t->parsed()) return cmd_train(*t, tr, out);
        if (p->parsed()) return cmd_predict(pr, out);
        if (e->parsed()) return cmd_eval(ev, out, err);
        if (b->parsed()) return cmd_bench(be, out);
        if (s->parsed()) return cmd_simmaps(sm, out);
    } catch (const NumericError& ex) {
        err << "numeric failure: " << ex.what() << "\n";
        return 2;
    } catch (const ConfigError& ex) {
        err << "invalid configuration: " << ex.what() << "\n";
        return 1;
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << "\n";
        return 1;
    } catch (const InputError& ex) {
        err << "invalid input: " << ex.what() << "\n";
        return 1;
    } catch (const ParseError& ex) {
        err << "invalid input: " << ex.what() << "\n";
        return 1;
    } catch (const std::exception& ex) {
        err << "failure: " << ex.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace gebd
