#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "gebd/cli.hpp"
#include "gebd/error.hpp"
#include "gebd/fileutil.hpp"

using namespace gebd;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "gebd");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("gebd_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const fs::path kFixtures = GEBD_FIXTURE_DIR;
const fs::path kConfigs = GEBD_CONFIG_DIR;

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help lists every subcommand") {
    const auto r = run({"--help"});
    CHECK(r.code == 0);
    for (const char* sub : {"gen-data", "train", "predict", "eval", "bench", "dump-simmaps"})
        CHECK(r.out.find(sub) != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
    auto r = run({"eval", "--bogus"});
    CHECK(r.code == 1);
    CHECK(r.err.find("Usage") != std::string::npos);
    r = run({});
    CHECK(r.code == 1);
    r = run({"train", "--data", "nowhere", "--out", "nowhere", "--K", "0"});
    CHECK(r.code == 1);
    CHECK(r.err.find("K must be >= 1") != std::string::npos);
    r = run({"bench", "--K", "3", "--channels", "6", "--groups", "4"});
    CHECK(r.code == 1);
    r = run({"eval", "--preds", "missing.json", "--annots", "missing.json"});
    CHECK(r.code == 1);
}

TEST_CASE("eval reproduces the hand-worked golden report") {
    const auto dir = scratch("golden");
    const auto out = dir / "report.csv";
    const auto r = run({"eval", "--preds", (kFixtures / "eval/predictions.json").string(), "--annots",
                        (kFixtures / "eval/annotations.json").string(), "--out", out.string()});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("video d") != std::string::npos);
    CHECK(read_file(out) == read_file(kFixtures / "eval/report.csv"));
    const auto stdout_run = run({"eval", "--preds", (kFixtures / "eval/predictions.json").string(), "--annots",
                                 (kFixtures / "eval/annotations.json").string()});
    CHECK(stdout_run.out == read_file(kFixtures / "eval/report.csv"));
    fs::remove_all(dir);
}

TEST_CASE("config documents round trip and reject unknown keys") {
    TrainConfig c = TrainConfig::full_size();
    c.loss = LossKind::mse;
    c.labels = LabelKind::hard;
    c.model.similarity = SimilarityKind::chebyshev;
    c.model.window_k = 4;
    const auto back = train_config_from_json(train_config_to_json(c));
    CHECK(train_config_to_json(back) == train_config_to_json(c));
    CHECK(back.model.window_k == 4);
    CHECK(back.epochs == 30);
    CHECK_THROWS_AS(train_config_from_json(R"({"learning_rate": 0.1})"), ConfigError);
    CHECK_THROWS_AS(train_config_from_json(R"({"model": {"kk": 3}})"), ConfigError);
    CHECK_THROWS(train_config_from_json(R"({"epochs": "many"})"));
    CHECK_THROWS_AS(train_config_from_json(R"({"loss": 3})"), ConfigError);
    CHECK_THROWS_AS(train_config_from_json(R"({"model": {"similarity": true}})"), ConfigError);
    CHECK(train_config_from_json(R"({"model": {"K": 6}})").model.window_k == 6);
}

TEST_CASE("shipped presets parse and validate") {
    std::size_t count = 0;
    for (const auto& e : fs::directory_iterator(kConfigs)) {
        if (e.path().extension() != ".json") continue;
        CAPTURE(e.path().filename().string());
        const auto cfg = train_config_from_json(read_file(e.path()));
        CHECK_NOTHROW(cfg.validate());
        CHECK_NOTHROW(Model{cfg.model});
        ++count;
    }
    CHECK(count >= 26);
    CHECK(train_config_to_json(train_config_from_json(read_file(kConfigs / "full_size.json"))) ==
          train_config_to_json(TrainConfig::full_size()));
}

TEST_CASE("gen-data, train, predict, eval and dump-simmaps end to end") {
    const auto dir = scratch("e2e");
    const auto data = (dir / "data").string();
    REQUIRE(run({"gen-data", "--out", data, "--count", "3", "--frames", "40", "--channels", "8", "--seed", "4"}).code ==
            0);
    const auto ckpt = (dir / "ckpt").string();
    auto r = run({"train", "--data", data, "--val", data, "--out", ckpt, "--epochs", "2", "--lr-drops", "1",
                  "--channels", "8", "--groups", "2", "--layers", "1", "--K", "2", "--sample-frames", "0"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("epoch 1") != std::string::npos);
    for (const char* f : {"config.json", "last.ckpt", "model.ckpt", "train_log.json"}) CHECK(fs::exists(ckpt + "/" + f));

    const auto model = ckpt + "/model.ckpt";
    const auto p1 = (dir / "p1.json").string(), p2 = (dir / "p2.json").string();
    REQUIRE(run({"predict", "--ckpt", model, "--features", data + "/features", "--out", p1}).code == 0);
    REQUIRE(run({"predict", "--ckpt", model, "--features", data + "/features", "--out", p2}).code == 0);
    CHECK(read_file(p1) == read_file(p2));

    r = run({"eval", "--preds", p1, "--annots", data + "/annotations.json"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("threshold,precision,recall,f1\n", 0) == 0);

    const auto sim = (dir / "sim.csv").string();
    const auto first = fs::directory_iterator(data + "/features")->path().string();
    REQUIRE(run({"dump-simmaps", "--ckpt", model, "--features", first, "--out", sim, "--frame", "3"}).code == 0);
    const auto csv = read_file(sim);
    CHECK(csv.rfind("frame,group,row,col,value\n", 0) == 0);
    // 2 groups of 5x5 maps for one frame.
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 25);
    CHECK(run({"dump-simmaps", "--ckpt", model, "--features", first, "--out", sim, "--frame", "100"}).code == 1);

    const auto cfg = (dir / "bad.json").string();
    write_file_atomic(cfg, R"({"nope": 1})");
    CHECK(run({"train", "--data", data, "--out", ckpt, "--config", cfg}).code == 1);
    fs::remove_all(dir);
}

TEST_CASE("bench prints a scaling table") {
    const auto r = run({"bench", "--T", "16,24,32", "--K", "2", "--channels", "8", "--groups", "2", "--layers", "1",
                        "--input-channels", "4", "--repeats", "1"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("T,seconds,windows_encoded,attention_flops\n16,", 0) == 0);
    CHECK(r.out.find("fit:") != std::string::npos);
}

} // TEST_SUITE
