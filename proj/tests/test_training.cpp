#include <cmath>
#include <limits>
#include <sstream>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "doctest.h"

#include "cefr/evaluation.hpp"
#include "cefr/model_io.hpp"
#include "cefr/training.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cefr;
using testing_support::Rng;

namespace {

const std::vector<long> kCorpusTrainCounts = {535, 3646, 8996, 6636, 1908, 100};

std::vector<double> high_precision_weights(const std::vector<long>& counts, const char* alpha) {
    using boost::multiprecision::cpp_dec_float_50;
    const cpp_dec_float_50 a(alpha);
    std::vector<cpp_dec_float_50> powered;
    cpp_dec_float_50 total = 0;
    for (long c : counts) {
        powered.push_back(boost::multiprecision::pow(cpp_dec_float_50(c), a));
        total += powered.back();
    }
    std::vector<double> out;
    for (const auto& p : powered) out.push_back(static_cast<double>(p / total));
    return out;
}

PrototypeModel random_model(Rng& rng, int levels, int per_level, int dim, bool adapter) {
    PrototypeModel m;
    m.levels = levels;
    m.per_level = per_level;
    m.prototypes.resize(levels * per_level, dim);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int r = 0; r < m.prototypes.rows(); ++r)
        for (int c = 0; c < dim; ++c) m.prototypes(r, c) = n(rng);
    if (adapter) m.adapter = Eigen::MatrixXd::Identity(dim, dim) + 0.3 * Eigen::MatrixXd::NullaryExpr(dim, dim, [&] { return n(rng); });
    return m;
}

std::vector<double> random_weights(Rng& rng, int levels) {
    std::vector<long> counts;
    for (int j = 0; j < levels; ++j) counts.push_back(testing_support::uniform_int(rng, 1, 500));
    return loss_weights(counts, 0.5).w;
}

}  // namespace

TEST_CASE("loss_weights") {
    SUBCASE("alpha = 0 is uniform") {
        const auto w = loss_weights(kCorpusTrainCounts, 0.0).w;
        for (double v : w) CHECK(v == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    }
    SUBCASE("alpha = 1 is the normalised frequency") {
        const auto w = loss_weights(kCorpusTrainCounts, 1.0).w;
        const double total = 21821.0;
        for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(w[i] - kCorpusTrainCounts[i] / total) <= 1e-12);
        CHECK(w[0] == doctest::Approx(0.024518).epsilon(1e-5));
    }
    SUBCASE("alpha = 0.2 against 50-digit arithmetic") {
        const auto w = loss_weights(kCorpusTrainCounts, 0.2).w;
        const auto ref = high_precision_weights(kCorpusTrainCounts, "0.2");
        const std::vector<double> rounded = {0.1268, 0.1861, 0.2230, 0.2098, 0.1635, 0.0907};
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(std::abs(w[i] - ref[i]) <= 1e-12);
            CHECK(std::abs(w[i] - rounded[i]) <= 5e-4);
        }
    }
    SUBCASE("zero count is an error") {
        const std::vector<long> counts = {5, 0, 3};
        CHECK_THROWS_AS(loss_weights(counts, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(loss_weights(kCorpusTrainCounts, 1.5), std::invalid_argument);
    }
    SUBCASE("sum to one, monotone, and boost rare levels for alpha < 1") {
        Rng rng(17);
        std::uniform_real_distribution<double> alpha_dist(0.0, 1.0);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<long> counts;
            for (int j = 0; j < 6; ++j) counts.push_back(testing_support::uniform_int(rng, 1, 10000));
            const double alpha = alpha_dist(rng);
            const auto w = loss_weights(counts, alpha).w;
            double sum = 0.0;
            for (double v : w) {
                CHECK(v > 0.0);
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            for (std::size_t i = 0; i < 6; ++i) {
                for (std::size_t j = 0; j < 6; ++j) {
                    if (counts[i] >= counts[j]) CHECK(w[i] >= w[j]);
                    if (counts[i] < counts[j] && alpha < 1.0) {
                        CHECK(w[i] / w[j] > double(counts[i]) / double(counts[j]));
                    }
                }
            }
        }
    }
}

TEST_CASE("effective class weights") {
    TrainConfig cfg;
    cfg.alpha = 0.2;
    cfg.weight_mode = WeightMode::Direct;
    const auto direct = effective_class_weights(kCorpusTrainCounts, cfg);
    CHECK(direct == loss_weights(kCorpusTrainCounts, 0.2).w);
    cfg.weight_mode = WeightMode::FrequencyRatio;
    const auto ratio = effective_class_weights(kCorpusTrainCounts, cfg);
    CHECK(ratio[5] > ratio[2]);  // rare level weighted above the most frequent one
    double mean = 0.0;
    for (std::size_t i = 0; i < 6; ++i) mean += ratio[i] * kCorpusTrainCounts[i] / 21821.0;
    CHECK(mean == doctest::Approx(1.0));
    cfg.loss_weighting = false;
    CHECK(effective_class_weights(kCorpusTrainCounts, cfg) == std::vector<double>(6, 1.0));
    cfg.weight_mode = WeightMode::Direct;
    CHECK(effective_class_weights(kCorpusTrainCounts, cfg) == std::vector<double>(6, 1.0 / 6.0));
}

TEST_CASE("weighted_ce_loss") {
    const std::vector<double> unit(6, 1.0);
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(6, 1.0 / 6.0);
    CHECK(weighted_ce_loss(uniform, LevelSet{Level(2)}, unit) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
    CHECK(weighted_ce_loss(uniform, LevelSet{Level(2)}, unit) == doctest::Approx(1.79176).epsilon(1e-5));

    Eigen::VectorXd onehot = Eigen::VectorXd::Zero(6);
    onehot[4] = 1.0;
    CHECK(weighted_ce_loss(onehot, LevelSet{Level(4)}, unit) == 0.0);

    Eigen::VectorXd p(6);
    p << 0.05, 0.05, 0.5, 0.25, 0.1, 0.05;
    std::vector<double> w = {0.1, 0.1, 0.223, 0.2, 0.1, 0.1};
    CHECK(weighted_ce_loss(p, LevelSet{Level(2), Level(3)}, w) ==
          doctest::Approx(0.223 * -std::log(0.5)).epsilon(1e-14));
    CHECK(weighted_ce_loss(p, LevelSet{Level(2), Level(3)}, w) == doctest::Approx(0.15457).epsilon(1e-5));
    // The higher-level rule targets B2 regardless of probability.
    CHECK(weighted_ce_loss(p, LevelSet{Level(2), Level(3)}, w, TargetRule::HigherLevel) ==
          doctest::Approx(0.2 * -std::log(0.25)).epsilon(1e-14));

    Eigen::VectorXd tie = Eigen::VectorXd::Constant(6, 1.0 / 6.0);
    CHECK(training_target(tie, LevelSet{Level(2), Level(3)}, TargetRule::MostProbable) == Level(2));
}

TEST_CASE("batch_loss agrees with the independent loss") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto model = random_model(rng, 3, 2, 8, trial % 2 == 0);
        const auto batch = testing_support::random_batch(rng, 7, 8, 3);
        const auto w = random_weights(rng, 3);
        CHECK(batch_loss(batch, model, w) == doctest::Approx(oracle::mean_loss(batch, model, w)).epsilon(1e-12));
        CHECK(loss_gradients(batch, model, w).loss == doctest::Approx(oracle::mean_loss(batch, model, w)).epsilon(1e-12));
    }
}

TEST_CASE("loss_gradients match central finite differences") {
    Rng rng(2024);
    for (int trial = 0; trial < 6; ++trial) {
        const int levels = std::vector<int>{2, 3, 6}[static_cast<std::size_t>(trial % 3)];
        const int per_level = 1 + trial % 2;
        const auto model = random_model(rng, levels, per_level, 8, true);
        const auto batch = testing_support::random_batch(rng, 9, 8, levels);
        const auto w = random_weights(rng, levels);
        const auto g = loss_gradients(batch, model, w);
        const auto fd = oracle::finite_differences(batch, model, w, 1e-5);
        CHECK(oracle::max_relative_error(g.prototypes, fd.prototypes) <= 1e-4);
        CHECK(oracle::max_relative_error(g.adapter, fd.adapter) <= 1e-4);
    }
}

TEST_CASE("loss_gradients properties") {
    Rng rng(77);
    SUBCASE("adapter gradient is zero without an adapter") {
        const auto model = random_model(rng, 3, 2, 8, false);
        const auto batch = testing_support::random_batch(rng, 5, 8, 3);
        const auto g = loss_gradients(batch, model, std::vector<double>(3, 1.0));
        CHECK(g.adapter.rows() == 8);
        CHECK(g.adapter.isZero(0.0));
    }
    SUBCASE("duplicating the batch leaves the mean gradient unchanged") {
        const auto model = random_model(rng, 6, 3, 8, true);
        auto batch = testing_support::random_batch(rng, 6, 8, 6);
        const auto w = random_weights(rng, 6);
        const auto g1 = loss_gradients(batch, model, w);
        auto doubled = batch;
        doubled.insert(doubled.end(), batch.begin(), batch.end());
        const auto g2 = loss_gradients(doubled, model, w);
        CHECK((g1.prototypes - g2.prototypes).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((g1.adapter - g2.adapter).cwiseAbs().maxCoeff() <= 1e-14);
    }
    SUBCASE("zero loss gives a vanishing gradient") {
        // A single level: p = 1 exactly, so the loss and its gradient are 0.
        PrototypeModel m = random_model(rng, 1, 2, 5, true);
        const auto batch = testing_support::random_batch(rng, 4, 5, 1);
        const auto g = loss_gradients(batch, m, std::vector<double>{1.0});
        CHECK(g.loss <= 1e-15);
        CHECK(std::sqrt(g.prototypes.squaredNorm() + g.adapter.squaredNorm()) <= 1e-8);
    }
    SUBCASE("a small optimizer step does not increase the batch loss") {
        for (int trial = 0; trial < 20; ++trial) {
            auto model = random_model(rng, 6, 2, 8, trial % 2 == 0);
            const auto batch = testing_support::random_batch(rng, 12, 8, 6);
            const auto w = random_weights(rng, 6);
            TrainConfig cfg;
            cfg.learning_rate = 1e-6;
            AdamW opt(cfg, model);
            const auto g = loss_gradients(batch, model, w);
            opt.step(model, g);
            CHECK(batch_loss(batch, model, w) <= g.loss);
        }
    }
}

TEST_CASE("config file parsing") {
    TrainConfig cfg;
    std::istringstream in("# comment\nalpha = 0.4\nK = 5\nadapter = false\ntarget_rule = higher-level\nlr=0.01\n");
    apply_config_stream(in, cfg);
    CHECK(cfg.alpha == 0.4);
    CHECK(cfg.per_level == 5);
    CHECK_FALSE(cfg.adapter_enabled);
    CHECK(cfg.target_rule == TargetRule::HigherLevel);
    CHECK(cfg.learning_rate == 0.01);

    std::istringstream bad("nonsense = 1\n");
    CHECK_THROWS_AS(apply_config_stream(bad, cfg), DataError);
    TrainConfig invalid;
    invalid.patience = 0;
    CHECK_THROWS_AS(invalid.validate(), std::invalid_argument);
    invalid = TrainConfig{};
    invalid.alpha = 2.0;
    CHECK_THROWS_AS(invalid.validate(), std::invalid_argument);
}

TEST_CASE("train separates two Gaussian classes") {
    Rng rng(5);
    const auto train_set = testing_support::gaussian_clusters(rng, {50, 50}, 8, 8.0, 0.5, 0.5);
    const auto valid_set = testing_support::gaussian_clusters(rng, {20, 20}, 8, 8.0, 0.5, 0.5);
    // The classes are separable: the 1-NN oracle is perfect on train under leave-one-out.
    int loo_correct = 0;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        auto rest = train_set;
        rest.erase(rest.begin() + static_cast<long>(i));
        loo_correct += oracle::knn(train_set[i].vector, rest, 1) == train_set[i].gold.lowest().index();
    }
    REQUIRE(loo_correct == 100);
    TrainConfig cfg;
    cfg.per_level = 1;
    cfg.max_epochs = 50;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-2;
    const auto result = train(train_set, valid_set, cfg, 2);
    const auto preds = predict_all(train_set, result.model);
    CHECK(macro_f1(preds, testing_support::gold_sets(train_set), 2) == 1.0);
    CHECK(result.log.epochs.size() <= 51);
}

TEST_CASE("train is deterministic and respects patience") {
    Rng rng(9);
    const auto train_set = testing_support::gaussian_clusters(rng, {20, 30, 40}, 10, 1.5, 1.0, 1.0);
    const auto valid_set = testing_support::gaussian_clusters(rng, {10, 10, 10}, 10, 1.5, 1.0, 1.0);
    TrainConfig cfg;
    cfg.per_level = 2;
    cfg.max_epochs = 60;
    cfg.patience = 4;
    cfg.batch_size = 8;
    cfg.seed = 123;
    const auto a = train(train_set, valid_set, cfg, 3);
    const auto b = train(train_set, valid_set, cfg, 3);

    std::stringstream la, lb, ma, mb;
    write_train_log(la, a.log);
    write_train_log(lb, b.log);
    CHECK(la.str() == lb.str());
    write_container(ma, to_container(a.model));
    write_container(mb, to_container(b.model));
    CHECK(ma.str() == mb.str());

    const int last = a.log.epochs.back().epoch;
    CHECK(last - a.log.best_epoch <= cfg.patience);
    if (a.log.stop_reason == "early_stopping") CHECK(last - a.log.best_epoch == cfg.patience);
    for (const auto& e : a.log.epochs) CHECK(e.valid_macro_f1 <= a.log.best_valid_macro_f1 + 1e-15);
    // The returned model reproduces the best validation score.
    CHECK(macro_f1(predict_all(valid_set, a.model), testing_support::gold_sets(valid_set), 3) ==
          doctest::Approx(a.log.best_valid_macro_f1));
}

TEST_CASE("train rejects a missing level") {
    Rng rng(1);
    const auto train_set = testing_support::gaussian_clusters(rng, {10, 0, 10}, 6, 3.0, 1.0, 1.0);
    const auto valid_set = testing_support::gaussian_clusters(rng, {5, 5, 5}, 6, 3.0, 1.0, 1.0);
    CHECK_THROWS_AS(train(train_set, valid_set, TrainConfig{}, 3), std::invalid_argument);
}

TEST_CASE("train aborts on non-finite loss") {
    Rng rng(1);
    auto train_set = testing_support::gaussian_clusters(rng, {10, 10}, 4, 3.0, 1.0, 1.0);
    const auto valid_set = train_set;
    train_set[3].vector[1] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg;
    cfg.per_level = 1;
    cfg.init_from_means = false;
    cfg.max_epochs = 5;
    CHECK_THROWS_AS(train(train_set, valid_set, cfg, 2), std::runtime_error);
}
