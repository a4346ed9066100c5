#include <algorithm>
#include <sstream>

#include "doctest.h"

#include "cefr/baselines.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cefr;
using testing_support::Rng;

namespace {

std::vector<TokenAnnotation> tokens_of(const std::vector<std::string>& lemmas) {
    std::vector<TokenAnnotation> out;
    for (const auto& l : lemmas) out.push_back({l, l, "NOUN", std::nullopt, true});
    return out;
}

// Two-class corpus where "easy" lemmas mark level 0 and "hard" lemmas mark level 1.
Dataset separable_corpus(Rng& rng, int per_class) {
    const std::vector<std::string> easy = {"cat", "dog", "sun"};
    const std::vector<std::string> hard = {"ontology", "paradigm", "epistemic"};
    const std::vector<std::string> shared = {"the", "be", "of"};
    Dataset ds;
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < per_class; ++i) {
            std::vector<std::string> lemmas;
            const auto& own = c == 0 ? easy : hard;
            for (int t = 0; t < 3; ++t) lemmas.push_back(own[static_cast<std::size_t>(testing_support::uniform_int(rng, 0, 2))]);
            for (int t = 0; t < 2; ++t) lemmas.push_back(shared[static_cast<std::size_t>(testing_support::uniform_int(rng, 0, 2))]);
            LabeledSentence s;
            s.id = "c" + std::to_string(c) + "_" + std::to_string(i);
            s.text = "sentence";
            s.labels = LevelSet::single(Level(c));
            EmbeddingRecord r;
            r.tokens = tokens_of(lemmas);
            ds.add(std::move(s), std::move(r));
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("knn_predict examples") {
    std::vector<LabeledVector> train = {{{1, 0, 0}, LevelSet{Level(3)}},
                                        {{0, 1, 0}, LevelSet{Level(1)}},
                                        {{0, 0, 1}, LevelSet{Level(2)}}};
    const auto one = build_knn_index(train, 1);
    CHECK(knn_predict(std::vector<double>{1, 0, 0}, one) == Level(3));

    std::vector<LabeledVector> votes = {{{1, 0.1, 0}, LevelSet{Level(1)}},
                                        {{1, 0.2, 0}, LevelSet{Level(1)}},
                                        {{1, 0.3, 0}, LevelSet{Level(2)}},
                                        {{-1, 0, 0}, LevelSet{Level(5)}}};
    CHECK(knn_predict(std::vector<double>{1, 0, 0}, build_knn_index(votes, 3)) == Level(1));

    // Vote tie between A2 and B1 goes to the lower level.
    CHECK(knn_predict(std::vector<double>{1, 0, 0}, build_knn_index(std::vector<LabeledVector>(votes.begin() + 1, votes.end()), 2)) ==
          Level(1));

    // A two-label neighbour votes for both of its labels.
    std::vector<LabeledVector> pair = {{{1, 0}, LevelSet{Level(2), Level(3)}}, {{0.9, 0.1}, LevelSet{Level(3)}}};
    CHECK(knn_predict(std::vector<double>{1, 0}, build_knn_index(pair, 2)) == Level(3));

    CHECK_THROWS_AS(build_knn_index(train, 4), std::invalid_argument);
    CHECK_THROWS_AS(build_knn_index(train, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_knn_index(std::vector<LabeledVector>{}, 1), std::invalid_argument);
    CHECK_THROWS_AS(knn_predict(std::vector<double>{1, 0}, one), std::invalid_argument);
}

TEST_CASE("knn_predict matches the exhaustive scan") {
    Rng rng(61);
    for (int trial = 0; trial < 60; ++trial) {
        const auto n = static_cast<std::size_t>(testing_support::uniform_int(rng, 6, 80));
        const auto train = testing_support::random_batch(rng, n, 5, 6);
        for (int k : {1, 3, 6}) {
            const auto index = build_knn_index(train, k);
            for (int q = 0; q < 5; ++q) {
                const auto x = testing_support::gaussian_vector(rng, 5);
                CHECK(knn_predict(x, index).index() == oracle::knn(x, train, k));
            }
        }
    }
}

TEST_CASE("knn_predict invariances") {
    Rng rng(62);
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    for (int trial = 0; trial < 30; ++trial) {
        const auto train = testing_support::random_batch(rng, 40, 6, 6);
        auto scaled = train;
        for (auto& s : scaled) {
            const double a = scale(rng);
            for (auto& v : s.vector) v *= a;
        }
        const auto a = build_knn_index(train, 6);
        const auto b = build_knn_index(scaled, 6);
        auto x = testing_support::gaussian_vector(rng, 6);
        const Level pa = knn_predict(x, a);
        const double qs = scale(rng);
        for (auto& v : x) v *= qs;
        CHECK(knn_predict(x, b) == pa);

        // k = n votes with every point, whatever the query.
        std::vector<int> counts(6, 0);
        for (const auto& s : train)
            for (Level l : s.gold.levels()) ++counts[static_cast<std::size_t>(l.index())];
        const int majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        CHECK(knn_predict(x, build_knn_index(train, 40)).index() == majority);
    }
}

TEST_CASE("knn index container round trip") {
    Rng rng(63);
    const auto train = testing_support::random_batch(rng, 20, 4, 6);
    const auto index = build_knn_index(train, 6, true);
    std::stringstream buf;
    write_container(buf, to_container(index));
    const auto back = knn_index_from_container(read_container(buf));
    CHECK(back.vectors == index.vectors);
    CHECK(back.labels == index.labels);
    CHECK(back.k == 6);
    CHECK(back.distance_weighted);
    std::stringstream wrong;
    write_container(wrong, to_container(index));
    auto c = read_container(wrong);
    c.type = ModelType::Bow;
    CHECK_THROWS_AS(knn_index_from_container(c), DataError);
}

TEST_CASE("bow_featurize") {
    const Vocabulary vocab = {{"cat", 0}, {"dog", 1}};
    CHECK(bow_featurize(tokens_of({"cat", "cat", "dog"}), vocab) == SparseVector{{0, 2.0}, {1, 1.0}});
    CHECK(bow_featurize(tokens_of({"emu", "yak"}), vocab).empty());
    CHECK(bow_featurize(tokens_of({"dog", "emu", "cat", "cat"}), vocab) ==
          bow_featurize(tokens_of({"cat", "cat", "emu", "dog"}), vocab));
}

TEST_CASE("build_vocabulary assigns sorted contiguous columns") {
    Rng rng(1);
    const auto ds = separable_corpus(rng, 10);
    const auto vocab = build_vocabulary(ds);
    int expected = 0;
    for (const auto& [lemma, col] : vocab) CHECK(col == expected++);
    CHECK(vocab.count("ontology") == 1);
}

TEST_CASE("bow_train separates a separable toy corpus") {
    Rng rng(2);
    const auto ds = separable_corpus(rng, 25);
    const auto vocab = build_vocabulary(ds);
    std::vector<SparseVector> feats;
    std::vector<LevelSet> golds;
    for (const auto& s : ds.sentences) {
        feats.push_back(bow_featurize(*ds.record(s.id).tokens, vocab));
        golds.push_back(s.labels);
    }
    // Exhaustive margin check: w = (sum of easy columns) - (sum of hard columns) separates with margin 3.
    for (std::size_t i = 0; i < feats.size(); ++i) {
        double score = 0.0;
        for (const auto& [col, v] : feats[i]) {
            const auto it = std::find_if(vocab.begin(), vocab.end(), [&](const auto& e) { return e.second == col; });
            if (it->first == "cat" || it->first == "dog" || it->first == "sun") score += v;
            if (it->first == "ontology" || it->first == "paradigm" || it->first == "epistemic") score -= v;
        }
        CHECK((golds[i].lowest() == Level(0) ? score : -score) >= 3.0);
    }

    BowOptions opts;
    opts.gamma = 10.0;
    opts.epochs = 100;
    const auto model = bow_train(feats, golds, vocab, std::vector<double>{}, opts, 2);
    int correct = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) correct += bow_predict(feats[i], model) == golds[i].lowest();
    CHECK(correct == 50);

    SUBCASE("deterministic bytes for fixed gamma and seed") {
        const auto again = bow_train(feats, golds, vocab, std::vector<double>{}, opts, 2);
        std::stringstream a, b;
        write_container(a, to_container(model));
        write_container(b, to_container(again));
        CHECK(a.str() == b.str());
        const auto back = bow_model_from_container(read_container(a));
        CHECK(back.weights == model.weights);
        CHECK(back.bias == model.bias);
        CHECK(back.vocabulary == model.vocabulary);
    }
    SUBCASE("weighted training also separates") {
        const std::vector<double> w = {0.3, 0.7};
        const auto weighted = bow_train(feats, golds, vocab, w, opts, 2);
        int ok = 0;
        for (std::size_t i = 0; i < feats.size(); ++i) ok += bow_predict(feats[i], weighted) == golds[i].lowest();
        CHECK(ok == 50);
    }
    SUBCASE("errors") {
        std::vector<LevelSet> one_class(golds.size(), LevelSet{Level(0)});
        CHECK_THROWS_AS(bow_train(feats, one_class, vocab, std::vector<double>{}, opts, 2), std::invalid_argument);
        BowOptions bad = opts;
        bad.gamma = 0.0;
        CHECK_THROWS_AS(bow_train(feats, golds, vocab, std::vector<double>{}, bad, 2), std::invalid_argument);
    }
}

TEST_CASE("bow_predict ignores a common shift of decision values") {
    Rng rng(3);
    BowModel m;
    m.weights = Eigen::MatrixXd::Random(6, 5);
    m.bias = Eigen::VectorXd::Random(6);
    for (int trial = 0; trial < 50; ++trial) {
        SparseVector x;
        for (int c = 0; c < 5; ++c) x.emplace_back(c, static_cast<double>(testing_support::uniform_int(rng, 0, 3)));
        const Level before = bow_predict(x, m);
        BowModel shifted = m;
        shifted.bias.array() += 3.7;
        CHECK(bow_predict(x, shifted) == before);
    }
}
