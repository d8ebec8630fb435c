// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "gebd/bench.hpp"
#include "gebd/checkpoint.hpp"
#include "gebd/cli.hpp"
#include "gebd/data_io.hpp"
#include "gebd/encoder.hpp"
#include "gebd/eval.hpp"
#include "gebd/runtime.hpp"
#include "gebd/spos.hpp"
#include "gebd/trainer.hpp"
#include "op_checks.hpp"

using namespace gebd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// 1. Partition against the edge-clamped gather oracle.

Outcome partition_oracle() {
    std::mt19937_64 g(2024);
    std::size_t windows = 0, mismatches = 0;
    for (std::size_t t = 1; t <= 40; ++t) {
        for (std::size_t k = 1; k <= 10; ++k) {
            const std::size_t c = 5;
            const Tensor x = oracle::random_tensor({t, c}, g);
            const std::size_t padded_len = (t + k - 1) / k * k;
            std::vector<float> padded(padded_len * c, 0.0f);
            std::copy(x.data().begin(), x.data().end(), padded.begin());
            const auto batches = partition(x, k);
            std::vector<int> seen(padded_len, 0);
            if (batches.size() != k) ++mismatches;
            for (const auto& b : batches) {
                const std::size_t l = 2 * k + 1;
                if (b.windows.dim(1) != l || b.windows.dim(2) != c) {
                    ++mismatches;
                    continue;
                }
                const auto d = b.windows.data();
                for (std::size_t n = 0; n < b.frame_indices.size(); ++n) {
                    const std::size_t f = b.frame_indices[n];
                    if (f >= padded_len) {
                        ++mismatches;
                        continue;
                    }
                    ++seen[f];
                    const auto ref = oracle::gather_window(padded, padded_len, c, k, f);
                    if (!std::equal(ref.begin(), ref.end(), d.begin() + n * l * c)) ++mismatches;
                    ++windows;
                }
            }
            for (int s : seen) mismatches += s != 1;
        }
    }
    return {mismatches == 0, std::to_string(windows) + " windows over 400 (T, K) pairs, " + std::to_string(mismatches) +
                                 " mismatches"};
}

// ---------------------------------------------------------------------------
// 2. Linear scaling and the flop counter.

Outcome scaling() {
    tune_allocator();
    ModelConfig mc;
    mc.window_k = 8;
    mc.channels = 64;
    const Model model(mc);
    const std::vector<std::size_t> lengths = {64, 128, 256, 512};
    const auto points = scaling_bench(model, lengths, 40, 0);
    const auto fit = fit_scaling(points);
    bool flops_ok = true;
    std::ostringstream table;
    for (const auto& p : points) {
        const std::uint64_t t = p.length, c = 64, l = 17;
        flops_ok = flops_ok && p.attention_flops == 4 * t * c * c + 2 * l * l * t * c;
        table << " T=" << p.length << ":" << fmt("%.4fs", p.seconds);
    }
    return {fit.quadratic_share < 0.10 && flops_ok,
            "quadratic share at T=512 " + fmt("%.2f%%", 100.0 * fit.quadratic_share) + " (< 10%), slope " +
                fmt("%.3e", fit.slope) + " s/frame, flop formula " + (flops_ok ? "exact" : "MISMATCH") + ";" +
                table.str()};
}

// ---------------------------------------------------------------------------
// 3. Finite-difference gradient checks.

Outcome gradients() {
    double worst = 0.0;
    std::string worst_op;
    std::size_t ops = 0;
    for (const auto& c : oracle::op_checks()) {
        const double e = oracle::check_op(c);
        ++ops;
        if (e > worst) {
            worst = e;
            worst_op = c.name;
        }
    }
    const auto pipe = oracle::check_pipeline();
    return {worst < 1e-3 && pipe.rel_error < 2e-2,
            std::to_string(ops) + " op checks, worst " + fmt("%.2e", worst) + " (" + worst_op + ") < 1e-3; pipeline " +
                fmt("%.2e", pipe.rel_error) + " < 2e-2 on " + std::to_string(pipe.checked) + " weights (" +
                std::to_string(pipe.nonsmooth) + " straddle a ReLU kink)"};
}

// ---------------------------------------------------------------------------
// 4. Group similarity invariants.

Outcome similarity_invariants() {
    const char* kinds[] = {"cosine", "euclidean", "manhattan", "chebyshev"};
    double sym = 0.0, diag = 0.0, decomp = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 g(seed);
        const std::size_t n = 2, l = 7, c = 12, groups = 3, cg = c / groups;
        const Tensor x = oracle::random_tensor({n, l, c}, g);
        const auto xv = x.to_vector();
        for (const char* kind : kinds) {
            const auto m = similarity(split_groups(x, groups), parse_similarity(kind)).maps.to_vector();
            const bool cosine = std::strcmp(kind, "cosine") == 0;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t gi = 0; gi < groups; ++gi)
                    for (std::size_t i = 0; i < l; ++i) {
                        const std::size_t row = ((b * groups + gi) * l + i) * l;
                        diag = std::max(diag, std::abs(m[row + i] - (cosine ? 1.0 : 0.0)));
                        for (std::size_t j = 0; j < l; ++j) {
                            sym = std::max(sym, double(std::abs(m[row + j] - m[((b * groups + gi) * l + j) * l + i])));
                            const double ref = oracle::pair_similarity(&xv[(b * l + i) * c + gi * cg],
                                                                       &xv[(b * l + j) * c + gi * cg], cg, kind);
                            decomp = std::max(decomp, std::abs(ref - m[row + j]));
                        }
                    }
        }
    }
    return {sym < 1e-6 && diag < 1e-6 && decomp < 1e-6,
            "100 seeds x 4 kinds: asymmetry " + fmt("%.1e", sym) + ", diagonal error " + fmt("%.1e", diag) +
                ", decomposition error " + fmt("%.1e", decomp) + " (all < 1e-6)"};
}

// ---------------------------------------------------------------------------
// 5. Soft labels.

Outcome soft_label_values() {
    const std::vector<std::size_t> one = {20};
    const auto l = soft_labels(one, 41).labels;
    const double expect[3] = {1.0, 0.6065, 0.1353};
    double worst = 0.0;
    for (int o = 0; o < 3; ++o) {
        worst = std::max(worst, std::abs(l[20 + o] - expect[o]));
        worst = std::max(worst, std::abs(l[20 - o] - expect[o]));
    }
    const std::vector<std::size_t> two = {20, 21};
    const auto overlap = soft_labels(two, 41).labels;
    const bool clamped = overlap[20] == 1.0f && overlap[21] == 1.0f;
    return {worst < 1e-4 && clamped, "max deviation at offsets 0..2 " + fmt("%.1e", worst) +
                                         " (< 1e-4); adjacent boundaries clamp to 1: " + (clamped ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 6. Evaluator.

void multisets(const std::vector<double>& grid, std::size_t n, std::size_t start, std::vector<double>& cur,
               std::vector<std::vector<double>>& out) {
    if (cur.size() == n) {
        out.push_back(cur);
        return;
    }
    for (std::size_t i = start; i < grid.size(); ++i) {
        cur.push_back(grid[i]);
        multisets(grid, n, i, cur, out);
        cur.pop_back();
    }
}

Outcome evaluator() {
    const std::vector<double> grid = {0.0, 0.5, 1.0, 1.5, 2.5, 4.0, 7.0, 10.0};
    std::size_t instances = 0, mismatches = 0;
    for (std::size_t np = 0; np <= 6; ++np) {
        for (std::size_t ng = 0; np + ng <= 6; ++ng) {
            std::vector<std::vector<double>> ps, gs;
            std::vector<double> cur;
            multisets(grid, np, 0, cur, ps);
            multisets(grid, ng, 0, cur, gs);
            for (const auto& p : ps)
                for (const auto& gt : gs)
                    for (double th : default_thresholds()) {
                        mismatches += match(p, gt, 10.0, th).tp != oracle::brute_force_matching(p, gt, 10.0, th);
                        ++instances;
                    }
        }
    }
    const std::vector<double> gts = {2.0, 5.0}, preds = {2.4};
    const double f1 = match(preds, gts, 10.0, 0.05).f1();
    const bool hand = std::abs(f1 - 2.0 / 3.0) < 1e-9;

    BoundaryAnnotation a;
    a.video_id = "v";
    a.duration = 10.0;
    a.raters = {{"r0", gts}};
    const auto csv = report_csv(sweep({{"v", preds, {}}}, {{"v", a}}));
    std::istringstream lines(csv);
    std::vector<std::string> rows;
    for (std::string line; std::getline(lines, line);) rows.push_back(line);
    bool report = rows.size() == 12 && rows[0] == "threshold,precision,recall,f1" && rows[11].rfind("avg,", 0) == 0;
    for (int i = 1; report && i <= 10; ++i) report = rows[i].rfind(fmt("%.2f,", 0.05 * i), 0) == 0;
    return {mismatches == 0 && hand && report,
            std::to_string(instances) + " exhaustive instances, " + std::to_string(mismatches) +
                " mismatches vs brute force; hand F1 " + fmt("%.12f", f1) + "; report rows 0.05..0.50 + avg: " +
                (report ? "ok" : "BAD")};
}

// ---------------------------------------------------------------------------
// 7 and 8. Synthetic learning and ablation directions.

// Golden values of the reference configuration, locked from its first run on
// the build machine. Training is deterministic for a fixed build, but other
// compilers or CPUs round differently, so drift up to kGoldenSlack is accepted.
constexpr double kGoldenF1At005 = 0.9729;
constexpr double kGoldenAvgF1 = 0.9729;
constexpr double kGoldenSlack = 0.03;

struct Split {
    std::vector<Sample> train, val;
};

const Split& synthetic_split() {
    static const Split split = [] {
        SyntheticSpec spec;  // T=100, C=32, 3-6 segments, noise 0.3, seed 0
        // 300 training videos: with 100 the cosine model is data-starved
        // (avg F1 0.89 -> 0.94 at 200 -> 0.97 at 300 on the same held-out set).
        const auto videos = generate_dataset(spec, 500);
        const std::vector<SyntheticVideo> head(videos.begin(), videos.begin() + 300);
        const std::vector<SyntheticVideo> tail(videos.begin() + 300, videos.end());
        return Split{make_samples(head, 100), make_samples(tail, 100)};
    }();
    return split;
}

struct CellResult {
    double f1_at_005 = 0.0, avg_f1 = 0.0, seconds = 0.0;
    std::optional<Model> model;
};

CellResult run_cell(const TrainConfig& cfg, const std::string& name) {
    const auto& split = synthetic_split();
    const auto start = std::chrono::steady_clock::now();
    TrainOptions opts;
    opts.eval_every = 0;  // validation on the last epoch only
    opts.on_epoch = [&](const EpochLog& e) {
        std::cout << "  [" << name << "] epoch " << e.epoch << " loss " << fmt("%.5f", e.loss)
                  << (e.epoch + 1 == cfg.epochs ? " f1@0.05 " + fmt("%.4f", e.f1_at_005) + " avg " + fmt("%.4f", e.avg_f1)
                                                : "")
                  << "\n"
                  << std::flush;
    };
    auto result = train(split.train, split.val, cfg, opts);
    CellResult r;
    r.f1_at_005 = result.log.epochs.back().f1_at_005;
    r.avg_f1 = result.log.epochs.back().avg_f1;
    r.seconds = seconds_since(start);
    r.model = std::move(result.model);
    return r;
}

TrainConfig reference_config() {
    TrainConfig cfg;  // C=64, K=8, G=4, cosine, BCE + Gaussian, 15 epochs
    cfg.seed = 0;
    cfg.model.input_channels = 32;
    return cfg;
}

std::map<std::string, CellResult>& cells() {
    static std::map<std::string, CellResult> c;
    return c;
}

const CellResult& cell(const std::string& name) {
    auto& c = cells();
    if (auto it = c.find(name); it != c.end()) return it->second;
    TrainConfig cfg = reference_config();
    if (name == "K=2") cfg.model.window_k = 2;
    if (name == "hard") cfg.labels = LabelKind::hard;
    if (name == "euclidean") cfg.model.similarity = SimilarityKind::euclidean;
    return c.emplace(name, run_cell(cfg, name)).first->second;
}

Outcome synthetic_learning() {
    tune_allocator();
    const auto& r = cell("reference");
    const bool floors = r.f1_at_005 >= 0.85 && r.avg_f1 >= 0.90;
    const bool golden_ok = std::abs(r.f1_at_005 - kGoldenF1At005) <= kGoldenSlack &&
                           std::abs(r.avg_f1 - kGoldenAvgF1) <= kGoldenSlack;
    const std::string golden = "golden " + fmt("%.4f", kGoldenF1At005) + " / " + fmt("%.4f", kGoldenAvgF1) + " +- " +
                               fmt("%.2f", kGoldenSlack) + (golden_ok ? " ok" : " DRIFTED");
    return {floors && golden_ok && r.seconds < 1800.0,
            "200 held-out videos: F1@0.05 " + fmt("%.4f", r.f1_at_005) + " (>= 0.85), avg F1 " +
                fmt("%.4f", r.avg_f1) + " (>= 0.90); " + golden + "; trained in " + fmt("%.0fs", r.seconds)};
}

Outcome ablations() {
    tune_allocator();
    const auto& ref = cell("reference");
    const auto& k2 = cell("K=2");
    const auto& hard = cell("hard");
    const auto& euc = cell("euclidean");
    const bool k_ok = ref.avg_f1 >= k2.avg_f1;
    const bool label_ok = ref.avg_f1 >= hard.avg_f1;
    const bool sim_ok = std::abs(ref.avg_f1 - euc.avg_f1) <= 0.02;
    return {k_ok && label_ok && sim_ok,
            "avg F1: K=8 " + fmt("%.4f", ref.avg_f1) + " vs K=2 " + fmt("%.4f", k2.avg_f1) + (k_ok ? " ok" : " WRONG") +
                "; gaussian " + fmt("%.4f", ref.avg_f1) + " vs hard " + fmt("%.4f", hard.avg_f1) +
                (label_ok ? " ok" : " WRONG") + "; cosine - euclidean " + fmt("%+.4f", ref.avg_f1 - euc.avg_f1) +
                (sim_ok ? " ok" : " OUT OF BAND")};
}

// ---------------------------------------------------------------------------
// 9. Round trips.

Outcome round_trips() {
    const auto dir = fs::temp_directory_path() / "gebd_acceptance_rt";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };

    // Checkpoint: the trained reference model when available, otherwise fresh.
    ModelConfig mc;
    mc.similarity = SimilarityKind::chebyshev;
    mc.clamp_to_last_real_frame = true;
    const Model fresh(mc);
    const bool trained = cells().count("reference") > 0;
    const Model& model = trained ? *cells().at("reference").model : fresh;
    save_checkpoint(dir / "m.ckpt", model.checkpoint_arrays());
    const Model loaded = Model::from_checkpoint(load_checkpoint(dir / "m.ckpt"));
    SyntheticSpec spec;
    spec.seed = 77;
    auto samples = make_samples(generate_dataset(spec, 5), 100);
    bool bitwise = !samples.empty();
    for (const auto& s : samples) {
        const auto a = model.predict(s.sequence).scores, b = loaded.predict(s.sequence).scores;
        bitwise = bitwise && a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
    }
    expect(bitwise, "checkpoint predictions");
    expect(encode_checkpoint(loaded.checkpoint_arrays()) == encode_checkpoint(model.checkpoint_arrays()),
           "checkpoint bytes");

    // Features, annotations, predictions, datasets, configs.
    const auto videos = generate_dataset(spec, 3);
    for (const auto& v : videos) {
        write_features(dir / (v.features.video_id + ".scxf"), v.features);
        expect(read_features(dir / (v.features.video_id + ".scxf")) == v.features, "feature file");
    }
    AnnotationSet annots;
    for (const auto& v : videos) annots[v.annotation.video_id] = v.annotation;
    write_annotations(dir / "a.json", annots);
    expect(encode_annotations(read_annotations(dir / "a.json")) == encode_annotations(annots), "annotations");
    const auto preds = predict_all(fresh, make_samples(videos, 100));
    write_predictions(dir / "p.json", preds);
    const auto back = read_predictions(dir / "p.json");
    bool preds_ok = back.size() == preds.size();
    for (std::size_t i = 0; preds_ok && i < preds.size(); ++i)
        preds_ok = back[i].video_id == preds[i].video_id && back[i].boundaries == preds[i].boundaries &&
                   back[i].scores == preds[i].scores;
    expect(preds_ok, "predictions");
    write_dataset(dir / "ds", videos);
    const auto ds = read_dataset(dir / "ds");
    bool ds_ok = ds.size() == videos.size();
    for (std::size_t i = 0; ds_ok && i < ds.size(); ++i) ds_ok = ds[i].features == videos[i].features;
    expect(ds_ok, "dataset directory");
    TrainConfig cfg = TrainConfig::full_size();
    cfg.labels = LabelKind::hard;
    cfg.model.similarity = SimilarityKind::manhattan;
    expect(train_config_to_json(train_config_from_json(train_config_to_json(cfg))) == train_config_to_json(cfg),
           "train config JSON");
    fs::remove_all(dir);

    std::string detail = std::string(trained ? "trained" : "fresh") +
                         " model: predictions bitwise equal after save/load: " + (bitwise ? "yes" : "no") +
                         "; checkpoint, feature, annotation, prediction, dataset and config formats round-trip";
    for (const auto& f : failures) detail += "; FAILED " + f;
    return {failures.empty(), detail};
}

} // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all = {
        {1, "SPoS oracle equivalence", 10, partition_oracle},
        {2, "linear scaling", 120, scaling},
        {3, "gradient integrity", 120, gradients},
        {4, "group similarity invariants", 30, similarity_invariants},
        {5, "soft labels", 1, soft_label_values},
        {6, "evaluator", 60, evaluator},
        {7, "synthetic learning", 1800, synthetic_learning},
        {8, "ablation directions", 3 * 1800, ablations},
        {9, "round trips", 60, round_trips},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failures = 0;
    std::vector<std::string> summary;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = seconds_since(start);
        const bool in_budget = s < c.budget_seconds;
        const bool pass = o.pass && in_budget;
        failures += !pass;
        std::ostringstream line;
        line << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
             << fmt("%.1fs", s) << (in_budget ? "" : " over budget " + fmt("%.0fs", c.budget_seconds)) << "]";
        std::cout << line.str() << "\n" << std::flush;
        summary.push_back(line.str());
    }
    std::cout << "\n";
    for (const auto& l : summary) std::cout << l << "\n";
    return failures == 0 ? 0 : 1;
}
