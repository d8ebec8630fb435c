#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gebd/error.hpp"
#include "gebd/ops.hpp"
#include "gebd/trainer.hpp"
#include "op_checks.hpp"

using namespace gebd;
namespace fs = std::filesystem;

namespace {

std::vector<Sample> small_set(std::size_t count, std::uint64_t seed, std::size_t frames = 100) {
    SyntheticSpec s;
    s.seed = seed;
    s.frames = frames;
    return make_samples(generate_dataset(s, count), 0);
}

std::vector<std::vector<float>> snapshot(const Model& m) {
    std::vector<std::vector<float>> out;
    for (const auto& [name, t] : m.params().items()) out.push_back(t.to_vector());
    return out;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("forward shapes and window accounting") {
    Model m(ModelConfig{});
    std::mt19937_64 g(1);
    const Tensor x = oracle::random_tensor({100, 32}, g);
    ForwardStats stats;
    const auto y = m.forward(x, &stats);
    GradTape::current().clear();
    CHECK(y.shape() == Shape{100});
    CHECK(stats.windows_encoded == 104);
    CHECK(stats.window_positions == 104 * 17);
    const auto maps = m.similarity_maps(x);
    CHECK(maps.shape() == Shape{104, 4, 17, 17});
}

TEST_CASE("similarity maps are in frame order") {
    ModelConfig c = oracle::toy_model_config();
    c.positional_embedding = false;
    Model m(c);
    std::mt19937_64 g(2);
    Tensor x = oracle::random_tensor({6, 8}, g);
    // Make frames 0..4 identical: the window of frame 2 then sees one vector
    // at every position, so its cosine map is all ones.
    auto d = x.mutable_data();
    for (std::size_t t = 1; t < 5; ++t) std::copy_n(d.begin(), 8, d.begin() + t * 8);
    const auto maps = m.similarity_maps(x);
    for (std::size_t i = 0; i < 2 * 25; ++i) CHECK(std::abs(maps.data()[2 * 50 + i] - 1.0f) < 1e-5f);
}

TEST_CASE("config validation") {
    ModelConfig c;
    c.window_k = 0;
    CHECK_THROWS_AS(Model{c}, ConfigError);
    c = {};
    c.groups = 3;
    CHECK_THROWS_AS(Model{c}, ConfigError);
    c = {};
    c.heads = 5;
    CHECK_THROWS_AS(Model{c}, ConfigError);
}

TEST_CASE("predict is deterministic and batch-independent") {
    Model m(ModelConfig{});
    const auto samples = small_set(2, 3);
    auto twice = samples;
    twice[1] = twice[0];
    twice[1].sequence.video_id = "copy";
    const auto p = predict_all(m, twice);
    CHECK(p[0].scores == p[1].scores);
    CHECK(predict_all(m, samples)[0].scores == p[0].scores);
    for (float s : p[0].scores) CHECK((s >= 0.0f && s <= 1.0f));
    CHECK(GradTape::current().empty());
}

TEST_CASE("checkpoint round trip preserves predictions bitwise") {
    ModelConfig c;
    c.similarity = SimilarityKind::manhattan;
    c.clamp_to_last_real_frame = true;
    c.window_k = 3;
    c.seed = 9;
    Model m(c);
    const auto dir = fs::temp_directory_path() / "gebd_test_ckpt";
    fs::remove_all(dir);
    save_checkpoint(dir / "m.ckpt", m.checkpoint_arrays());
    const Model back = Model::from_checkpoint(load_checkpoint(dir / "m.ckpt"));
    CHECK(back.config().similarity == SimilarityKind::manhattan);
    CHECK(back.config().clamp_to_last_real_frame);
    CHECK(back.config().window_k == 3);
    const auto s = small_set(1, 4);
    CHECK(predict_all(m, s)[0].scores == predict_all(back, s)[0].scores);
    fs::remove_all(dir);

    auto arrays = m.checkpoint_arrays();
    arrays.erase(arrays.begin());
    CHECK_THROWS_AS(Model::from_checkpoint(arrays), ConfigError);
    arrays = m.checkpoint_arrays();
    for (auto& [name, t] : arrays)
        if (name == "head.conv2.weight") t = Tensor::zeros({2, 2});
    CHECK_THROWS_AS(Model::from_checkpoint(arrays), ConfigError);
}

TEST_CASE("conv1d baseline representation") {
    ModelConfig c;
    c.representation = Representation::conv1d;
    Model m(c);
    CHECK(m.params().contains("cnn1d.conv0.weight"));
    CHECK_FALSE(m.params().contains("encoder.pos"));
    std::mt19937_64 g(5);
    NoGradGuard guard;
    CHECK(m.forward(oracle::random_tensor({50, 32}, g)).shape() == Shape{50});
    const Model back = Model::from_checkpoint(m.checkpoint_arrays());
    CHECK(back.config().representation == Representation::conv1d);
}

TEST_CASE("full pipeline gradient check") {
    const auto r = oracle::check_pipeline();
    MESSAGE("pipeline rel error " << r.rel_error << " (" << r.nonsmooth << " of 20 coordinates straddle a kink)");
    CHECK(r.checked == 20);
    CHECK(r.rel_error < 2e-2);
}

} // TEST_SUITE

TEST_SUITE("trainer") {

TEST_CASE("config validation and schedule") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.lr_at(0) == doctest::Approx(1e-2));
    CHECK(c.lr_at(8) == doctest::Approx(1e-3));
    CHECK(c.lr_at(12) == doctest::Approx(1e-4));
    c.lr_drops = {15};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.lr = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    const auto p = TrainConfig::full_size();
    CHECK(p.epochs == 30);
    CHECK(p.lr_drops == std::vector<std::size_t>{16, 24});
    CHECK(p.model.channels == 256);
    CHECK(p.model.layers == 6);
}

TEST_CASE("sgd matches a hand-stepped oracle") {
    ParamSet ps;
    Tensor w = ps.add("w", Tensor::from({3}, {0.5f, -1.0f, 2.0f}));
    const std::vector<float> x = {1.0f, 2.0f, -3.0f};
    Sgd opt(ps, 0.9, 1e-4);
    std::vector<double> wv = {0.5, -1.0, 2.0}, v(3, 0.0);
    for (int step = 0; step < 3; ++step) {
        opt.zero_grad();
        // loss = sum(w^2 * x) -> grad = 2 w x
        backward(sum(mul(mul(w, w), Tensor::from({3}, x))));
        opt.step(0.05);
        for (std::size_t i = 0; i < 3; ++i) {
            const double g = 2.0 * wv[i] * x[i];
            v[i] = 0.9 * v[i] + g + 1e-4 * wv[i];
            wv[i] -= 0.05 * v[i];
        }
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(w.data()[i] - wv[i]) < 1e-6);
    }
}

TEST_CASE("one step on a frozen toy batch matches the oracle") {
    Model m(oracle::toy_model_config());
    SyntheticSpec s;
    s.frames = 12;
    s.channels = 8;
    s.min_segment_length = 2;
    const auto batch = make_samples(generate_dataset(s, 2), 0);
    TrainConfig cfg;
    cfg.model = m.config();
    for (const auto& b : batch) backward(scale(sample_loss(m, b, cfg), 0.5f));
    std::vector<std::vector<float>> expected;
    for (const auto& [name, t] : m.params().items()) {
        std::vector<float> e = t.to_vector();
        const auto g = t.grad();
        for (std::size_t i = 0; i < e.size(); ++i) e[i] -= static_cast<float>(cfg.lr) * (g[i] + 1e-4f * e[i]);
        expected.push_back(std::move(e));
    }
    Sgd opt(m.params(), cfg.momentum, cfg.weight_decay);
    opt.step(cfg.lr);
    const auto got = snapshot(m);
    double worst = 0.0;
    for (std::size_t k = 0; k < got.size(); ++k)
        for (std::size_t i = 0; i < got[k].size(); ++i) worst = std::max(worst, double(std::abs(got[k][i] - expected[k][i])));
    CHECK(worst < 1e-6);
}

TEST_CASE("lr = 0 leaves parameters unchanged") {
    const auto set = small_set(3, 7, 40);
    TrainConfig cfg;
    cfg.lr = 0.0;
    cfg.epochs = 1;
    cfg.lr_drops = {};
    const Model fresh(cfg.model);
    const auto result = train(set, {}, cfg);
    CHECK(snapshot(result.model) == snapshot(fresh));
}

TEST_CASE("loss decreases over the first five epochs") {
    const auto set = small_set(8, 0);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.lr_drops = {};
    const auto result = train(set, {}, cfg);
    REQUIRE(result.log.epochs.size() == 5);
    for (std::size_t e = 0; e < 5; ++e) CHECK(result.log.epochs[e].epoch == e);
    MESSAGE("epoch losses: " << result.log.epochs[0].loss << " " << result.log.epochs[1].loss << " "
                             << result.log.epochs[2].loss << " " << result.log.epochs[3].loss << " "
                             << result.log.epochs[4].loss);
    CHECK(result.log.epochs[4].loss < result.log.epochs[0].loss);
}

TEST_CASE("divergence aborts and keeps the last finite state") {
    const auto set = small_set(2, 1, 40);
    TrainConfig cfg;
    cfg.lr = 1e30;
    cfg.epochs = 3;
    cfg.lr_drops = {};
    cfg.batch_videos = 1;
    const auto dir = fs::temp_directory_path() / "gebd_test_diverge";
    fs::remove_all(dir);
    TrainOptions opts;
    opts.checkpoint_dir = dir;
    CHECK_THROWS_AS(train(set, {}, cfg, opts), NumericError);
    REQUIRE(fs::exists(dir / "last_finite.ckpt"));
    for (const auto& [name, t] : load_checkpoint(dir / "last_finite.ckpt"))
        for (float v : t.data()) REQUIRE(std::isfinite(v));
    fs::remove_all(dir);
}

TEST_CASE("checkpoints are written every epoch") {
    const auto set = small_set(2, 2, 40);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.lr_drops = {1};
    const auto dir = fs::temp_directory_path() / "gebd_test_epochs";
    fs::remove_all(dir);
    TrainOptions opts;
    opts.checkpoint_dir = dir;
    std::size_t calls = 0;
    opts.on_epoch = [&](const EpochLog&) {
        CHECK(fs::exists(dir / "last.ckpt"));
        ++calls;
    };
    const auto r = train(set, set, cfg, opts);
    CHECK(calls == 2);
    CHECK(r.log.to_json().find("\"avg_f1\"") != std::string::npos);
    fs::remove_all(dir);
}

} // TEST_SUITE
