#include <doctest.h>

#include <cmath>

#include "gebd/error.hpp"
#include "gebd/eval.hpp"
#include "oracles.hpp"

using namespace gebd;

namespace {

BoundaryAnnotation annotation(std::string id, double duration, std::vector<std::vector<double>> raters) {
    BoundaryAnnotation a;
    a.video_id = std::move(id);
    a.duration = duration;
    for (std::size_t i = 0; i < raters.size(); ++i) a.raters.push_back({"r" + std::to_string(i), raters[i]});
    return a;
}

// Every sorted multiset of `n` values drawn from `grid`.
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

} // namespace

TEST_SUITE("eval") {

TEST_CASE("hand cases") {
    const std::vector<double> gts = {2.0, 5.0}, preds = {2.4};
    const auto c = match(preds, gts, 10.0, 0.05);
    CHECK(c.tp == 1);
    CHECK(c.fp == 0);
    CHECK(c.fn == 1);
    CHECK(c.precision() == 1.0);
    CHECK(c.recall() == 0.5);
    CHECK(std::abs(c.f1() - 2.0 / 3.0) < 1e-9);
    const auto same = match(gts, gts, 10.0, 0.05);
    CHECK(same.tp == 2);
    CHECK(same.fp + same.fn == 0);
    const std::vector<double> twin = {1.9, 2.1}, one = {2.0};
    const auto t = match(twin, one, 10.0, 0.05);
    CHECK(t.tp == 1);
    CHECK(t.fp == 1);
    CHECK_THROWS_AS(match(preds, gts, 0.0, 0.05), InputError);
}

TEST_CASE("earliest-reachable rule beats nearest-unmatched") {
    // Nearest-unmatched would pair 0.3 with 0.5 and leave 0.7 unmatched.
    const std::vector<double> gts = {0.0, 0.5}, preds = {0.3, 0.7};
    CHECK(match(preds, gts, 1.0, 0.35).tp == 2);
    CHECK(oracle::brute_force_matching(preds, gts, 1.0, 0.35) == 2);
}

TEST_CASE("greedy equals brute-force maximum matching on exhaustive small instances") {
    const std::vector<double> grid = {0.0, 0.5, 1.0, 1.5, 2.5, 4.0, 7.0, 10.0};
    std::size_t instances = 0;
    for (std::size_t np = 0; np <= 6; ++np) {
        for (std::size_t ng = 0; ng + np <= 6; ++ng) {
            std::vector<std::vector<double>> ps, gs;
            std::vector<double> cur;
            multisets(grid, np, 0, cur, ps);
            multisets(grid, ng, 0, cur, gs);
            for (const auto& p : ps)
                for (const auto& g : gs)
                    for (double th : {0.05, 0.1, 0.15}) {
                        const auto c = match(p, g, 10.0, th);
                        REQUIRE(c.tp == oracle::brute_force_matching(p, g, 10.0, th));
                        ++instances;
                    }
        }
    }
    CHECK(instances > 1000);
}

TEST_CASE("monotone in threshold") {
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> p(5), gt(4);
        for (auto& x : p) x = u(g);
        for (auto& x : gt) x = u(g);
        std::size_t prev_tp = 0, prev_fn = gt.size();
        for (double th : default_thresholds()) {
            const auto c = match(p, gt, 20.0, th);
            CHECK(c.tp >= prev_tp);
            CHECK(c.fn <= prev_fn);
            prev_tp = c.tp;
            prev_fn = c.fn;
        }
    }
}

TEST_CASE("rater maximisation") {
    const auto a = annotation("v", 10.0, {{1.0, 6.0}, {3.0, 8.0}, {2.0}});
    const std::vector<double> rater2 = {3.0, 8.0};
    CHECK(f1_max_over_raters(rater2, a, 0.05) == 1.0);
    const auto single = annotation("v", 10.0, {{2.0, 5.0}});
    const std::vector<double> p = {2.4};
    CHECK(std::abs(f1_max_over_raters(p, single, 0.05) - 2.0 / 3.0) < 1e-9);
    CHECK(f1_max_over_raters({}, a, 0.05) == 0.0);
    auto none = a;
    none.raters.clear();
    CHECK_THROWS_AS(f1_max_over_raters(p, none, 0.05), InputError);
}

TEST_CASE("sweep report") {
    std::map<std::string, BoundaryAnnotation> annots = {{"a", annotation("a", 10.0, {{2.0, 5.0}})},
                                                        {"b", annotation("b", 8.0, {{1.0}, {4.0}})}};
    std::vector<VideoPrediction> perfect = {{"a", {2.0, 5.0}, {}}, {"b", {4.0}, {}}};
    const auto r = sweep(perfect, annots);
    CHECK(r.rows.size() == 10);
    CHECK(std::abs(r.rows.front().threshold - 0.05) < 1e-12);
    CHECK(std::abs(r.rows.back().threshold - 0.5) < 1e-12);
    for (const auto& row : r.rows) CHECK(row.f1 == 1.0);
    CHECK(r.average.f1 == 1.0);

    std::vector<VideoPrediction> empty = {{"a", {}, {}}, {"b", {}, {}}};
    for (const auto& row : sweep(empty, annots).rows) CHECK(row.f1 == 0.0);

    std::vector<VideoPrediction> stray = {{"a", {2.0}, {}}, {"zzz", {1.0}, {}}};
    const auto s = sweep(stray, annots);
    CHECK(s.errors.size() == 1);
    CHECK(s.videos == 1);

    const auto csv = report_csv(r);
    CHECK(csv.rfind("threshold,precision,recall,f1\n0.05,", 0) == 0);
    CHECK(csv.find("\navg,") != std::string::npos);
}

TEST_CASE("micro and macro aggregation differ as expected") {
    std::map<std::string, BoundaryAnnotation> annots = {{"a", annotation("a", 10.0, {{1.0, 3.0, 5.0, 7.0}})},
                                                        {"b", annotation("b", 10.0, {{5.0}})}};
    std::vector<VideoPrediction> preds = {{"a", {1.0, 3.0, 5.0, 7.0}, {}}, {"b", {}, {}}};
    const double micro = sweep(preds, annots, Aggregation::micro).rows[0].f1;
    const double macro = sweep(preds, annots, Aggregation::macro).rows[0].f1;
    // micro: TP=4 FP=0 FN=1 -> P=1, R=0.8; macro: mean(1, 0).
    CHECK(std::abs(micro - 2 * 0.8 / 1.8) < 1e-12);
    CHECK(std::abs(macro - 0.5) < 1e-12);
}

TEST_CASE("annotation validation names the rater") {
    auto a = annotation("v", 10.0, {{1.0}, {11.0}});
    try {
        a.validate();
        FAIL("expected validation error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("r1") != std::string::npos);
    }
}

} // TEST_SUITE
