#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "cefr/evaluation.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cefr;
using testing_support::Rng;

namespace {

std::vector<Level> to_levels(const std::vector<int>& v) {
    std::vector<Level> out;
    for (int i : v) out.emplace_back(i);
    return out;
}

std::vector<LevelSet> to_singletons(const std::vector<int>& v) {
    std::vector<LevelSet> out;
    for (int i : v) out.push_back(LevelSet::single(Level(i)));
    return out;
}

}  // namespace

TEST_CASE("resolve_gold") {
    const Level a1(0), b1(2), b2(3), c1(4);
    CHECK(resolve_gold(b2, LevelSet{b1, b2}) == b2);
    CHECK(resolve_gold(a1, LevelSet{b1}) == b1);
    CHECK(resolve_gold(c1, LevelSet{b1, b2}) == b2);
    CHECK(resolve_gold(a1, LevelSet{b1, b2}) == b1);
    // Equidistant golds resolve to the lower level.
    CHECK(resolve_gold(Level(2), LevelSet{Level(1), Level(3)}) == Level(1));
}

TEST_CASE("confusion_and_f1 examples") {
    const auto golds = to_singletons({0, 0, 1, 1});
    const auto preds = to_levels({0, 1, 1, 1});
    const auto r = confusion_and_f1(preds, golds, 2);
    CHECK(r.per_level_f1[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.per_level_f1[1] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(std::abs(r.macro_f1 - 0.7333333333333333) <= 1e-9);
    CHECK(r.confusion(0, 1) == 1);
    CHECK(r.confusion.sum() == 4);

    const auto perfect = confusion_and_f1(to_levels({0, 1, 2, 3, 4, 5}), to_singletons({0, 1, 2, 3, 4, 5}));
    CHECK(perfect.macro_f1 == 1.0);
    CHECK(perfect.confusion == Eigen::MatrixXi::Identity(6, 6));

    // A level nobody predicts or holds gets F1 0.
    const auto missing = confusion_and_f1(to_levels({0, 0}), to_singletons({0, 0}), 2);
    CHECK(missing.per_level_f1[1] == 0.0);
    CHECK(missing.macro_f1 == 0.5);

    // A two-label gold matched by either label is on the diagonal.
    const std::vector<LevelSet> pair = {LevelSet{Level(2), Level(3)}};
    const auto diag = confusion_and_f1(to_levels({3}), pair);
    CHECK(diag.confusion(3, 3) == 1);

    CHECK_THROWS_AS(confusion_and_f1(to_levels({0}), to_singletons({0, 1})), std::invalid_argument);
    CHECK_THROWS_AS(confusion_and_f1(std::vector<Level>{}, std::vector<LevelSet>{}), std::invalid_argument);
}

TEST_CASE("quadratic_weighted_kappa examples") {
    CHECK(std::abs(quadratic_weighted_kappa(to_levels({0, 1, 1, 1}), to_singletons({0, 0, 1, 1}), 2) - 0.5) <= 1e-9);
    CHECK(quadratic_weighted_kappa(to_levels({0, 1, 2, 3, 4, 5}), to_singletons({0, 1, 2, 3, 4, 5})) ==
          doctest::Approx(1.0).epsilon(1e-12));
    // Everything in one cell: O equals E.
    CHECK(quadratic_weighted_kappa(to_levels({2, 2, 2}), to_singletons({2, 2, 2})) == 1.0);
}

TEST_CASE("metrics agree with the brute-force oracles") {
    Rng rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> preds;
        std::vector<LevelSet> golds;
        for (int i = 0; i < 60; ++i) {
            preds.push_back(testing_support::uniform_int(rng, 0, 5));
            golds.push_back(testing_support::random_gold(rng, 6));
        }
        const auto levels = to_levels(preds);
        const auto report = evaluate(levels, golds);
        const auto f1 = oracle::per_class_f1(preds, golds, 6);
        for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(report.per_level_f1[j] - f1[j]) <= 1e-12);
        CHECK(std::abs(report.macro_f1 - oracle::macro_f1(preds, golds, 6)) <= 1e-12);
        CHECK(std::abs(report.weighted_kappa - oracle::kappa(preds, golds, 6)) <= 1e-9);
        CHECK(report.weighted_kappa >= -1.0);
        CHECK(report.weighted_kappa <= 1.0);
        CHECK(report.n == 60);
    }
}

TEST_CASE("metric invariances") {
    Rng rng(55);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> preds, gold;
        for (int i = 0; i < 40; ++i) {
            preds.push_back(testing_support::uniform_int(rng, 0, 5));
            gold.push_back(testing_support::uniform_int(rng, 0, 5));
        }
        const double f1 = macro_f1(to_levels(preds), to_singletons(gold));
        const double kappa = quadratic_weighted_kappa(to_levels(preds), to_singletons(gold));

        std::vector<std::size_t> order(preds.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<int> p2, g2, p3, g3;
        for (std::size_t i : order) {
            p2.push_back(preds[i]);
            g2.push_back(gold[i]);
        }
        for (std::size_t i = 0; i < preds.size(); ++i) {
            p3.push_back(5 - preds[i]);
            g3.push_back(5 - gold[i]);
        }
        CHECK(macro_f1(to_levels(p2), to_singletons(g2)) == doctest::Approx(f1).epsilon(1e-14));
        CHECK(quadratic_weighted_kappa(to_levels(p3), to_singletons(g3)) == doctest::Approx(kappa).epsilon(1e-12));
        if (preds != gold) CHECK(kappa < 1.0);
    }
}

TEST_CASE("multi_run_summary") {
    const std::vector<double> constant(12, 5.0);
    const auto c = multi_run_summary(constant);
    CHECK(c.mean == 5.0);
    CHECK(c.ci95 == 0.0);
    CHECK(c.retained.size() == 10);

    std::vector<double> ramp;
    for (int i = 1; i <= 12; ++i) ramp.push_back(i);
    const auto r = multi_run_summary(ramp);
    CHECK(r.mean == doctest::Approx(6.5));
    CHECK(*std::min_element(r.retained.begin(), r.retained.end()) == 2.0);
    CHECK(*std::max_element(r.retained.begin(), r.retained.end()) == 11.0);
    // t_{0.975, 9} = 2.262157; sd of 2..11 = sqrt(55/6).
    CHECK(r.ci95 == doctest::Approx(2.2621571628 * std::sqrt(55.0 / 6.0) / std::sqrt(10.0)).epsilon(1e-8));

    Rng rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> scores;
        for (int i = 0; i < 12; ++i) scores.push_back(u(rng));
        CHECK(multi_run_summary(scores).mean == doctest::Approx(oracle::trimmed_mean(scores)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(multi_run_summary(std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("pearson") {
    const std::vector<double> a = {1, 2, 3, 4};
    CHECK(pearson(a, std::vector<double>{2, 4, 6, 8}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pearson(a, std::vector<double>{-1, -2, -3, -4}) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(pearson(a, std::vector<double>{1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-14));
    CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST_CASE("report formatting") {
    const auto report = evaluate(to_levels({0, 1, 2, 3, 4, 5}), to_singletons({0, 1, 2, 3, 4, 5}));
    const auto j = report_to_json(report);
    CHECK(j["macro_f1"] == 1.0);
    CHECK(j["per_level_f1"].size() == 6);
    const auto table = format_report_table("head", report);
    CHECK(table.find("head") != std::string::npos);
    CHECK(table.find("100.0") != std::string::npos);
    std::vector<EvalReport> runs(3, report);
    CHECK(format_multi_run_table("head", runs).find("100.0") != std::string::npos);
}
