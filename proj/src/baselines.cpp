#include "cefr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cefr {

using nlohmann::json;

KnnIndex build_knn_index(std::span<const LabeledVector> train, int k, bool distance_weighted) {
    if (train.empty()) throw std::invalid_argument("knn: empty index");
    if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
    if (static_cast<std::size_t>(k) > train.size()) {
        throw std::invalid_argument("knn: k = " + std::to_string(k) + " exceeds index size " +
                                    std::to_string(train.size()));
    }
    const auto dim = static_cast<Eigen::Index>(train.front().vector.size());
    KnnIndex index;
    index.k = k;
    index.distance_weighted = distance_weighted;
    index.vectors.resize(static_cast<Eigen::Index>(train.size()), dim);
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (static_cast<Eigen::Index>(train[i].vector.size()) != dim) {
            throw std::invalid_argument("knn: inconsistent vector dimension");
        }
        index.vectors.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXd>(train[i].vector.data(), dim);
        index.labels.push_back(train[i].gold);
    }
    return index;
}

Level knn_predict(std::span<const double> x, const KnnIndex& index) {
    if (index.size() == 0) throw std::invalid_argument("knn: empty index");
    if (static_cast<Eigen::Index>(x.size()) != index.vectors.cols()) {
        throw std::invalid_argument("knn: query dimension does not match index");
    }
    const Eigen::Map<const Eigen::VectorXd> q(x.data(), static_cast<Eigen::Index>(x.size()));
    const double qn = q.norm();
    if (qn == 0.0) throw std::invalid_argument("knn: zero-norm query");

    const std::size_t n = index.size();
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = index.vectors.row(static_cast<Eigen::Index>(i));
        dist[i] = 1.0 - row.dot(q) / (row.norm() * qn);
    }
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(index.k), n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });

    std::vector<double> votes(kNumLevels, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t i = order[r];
        const double weight = index.distance_weighted ? 1.0 / (std::max(dist[i], 0.0) + 1e-12) : 1.0;
        for (Level l : index.labels[i].levels()) votes[static_cast<std::size_t>(l.index())] += weight;
    }
    return Level(argmax_lowest(votes));
}

Container to_container(const KnnIndex& index) {
    Container c;
    c.type = ModelType::Knn;
    json labels = json::array();
    for (const auto& set : index.labels) {
        json l = json::array();
        for (Level lv : set.levels()) l.push_back(std::string(lv.label()));
        labels.push_back(l);
    }
    c.header = {{"format_version", kFormatVersion},
                {"k", index.k},
                {"n", index.size()},
                {"d", index.vectors.cols()},
                {"distance_weighted", index.distance_weighted},
                {"labels", labels}};
    c.payload.reserve(static_cast<std::size_t>(index.vectors.size()));
    for (Eigen::Index r = 0; r < index.vectors.rows(); ++r)
        for (Eigen::Index col = 0; col < index.vectors.cols(); ++col) c.payload.push_back(index.vectors(r, col));
    return c;
}

KnnIndex knn_index_from_container(const Container& c) {
    if (c.type != ModelType::Knn) throw DataError("model file does not hold a kNN index");
    KnnIndex index;
    Eigen::Index n = 0, d = 0;
    try {
        index.k = c.header.at("k").get<int>();
        n = c.header.at("n").get<Eigen::Index>();
        d = c.header.at("d").get<Eigen::Index>();
        index.distance_weighted = c.header.value("distance_weighted", false);
        for (const auto& l : c.header.at("labels")) {
            LevelSet set;
            for (const auto& s : l) set.insert(Level::from_label(s.get<std::string>()));
            index.labels.push_back(set);
        }
    } catch (const std::exception& e) {
        throw DataError(std::string("bad kNN index header: ") + e.what());
    }
    if (static_cast<Eigen::Index>(index.labels.size()) != n || static_cast<Eigen::Index>(c.payload.size()) != n * d ||
        index.k < 1 || index.k > n) {
        throw DataError("kNN index payload does not match header");
    }
    index.vectors.resize(n, d);
    std::size_t pos = 0;
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index col = 0; col < d; ++col) index.vectors(r, col) = c.payload[pos++];
    return index;
}

Vocabulary build_vocabulary(const Dataset& train) {
    std::vector<std::string> lemmas;
    for (const auto& s : train.sentences) {
        const auto& rec = train.record(s.id);
        if (!rec.tokens) throw DataError("sentence '" + s.id + "' lacks token annotations needed for BoW");
        for (const auto& t : *rec.tokens) lemmas.push_back(t.lemma);
    }
    std::sort(lemmas.begin(), lemmas.end());
    lemmas.erase(std::unique(lemmas.begin(), lemmas.end()), lemmas.end());
    Vocabulary vocab;
    for (std::size_t i = 0; i < lemmas.size(); ++i) vocab.emplace(lemmas[i], static_cast<int>(i));
    return vocab;
}

SparseVector bow_featurize(std::span<const TokenAnnotation> tokens, const Vocabulary& vocab) {
    std::map<int, double> counts;
    for (const auto& t : tokens) {
        if (auto it = vocab.find(t.lemma); it != vocab.end()) counts[it->second] += 1.0;
    }
    return SparseVector(counts.begin(), counts.end());
}

BowModel bow_train(std::span<const SparseVector> features, std::span<const LevelSet> golds,
                   const Vocabulary& vocab, std::span<const double> class_weights, const BowOptions& options,
                   int levels) {
    if (features.size() != golds.size()) throw std::invalid_argument("bow_train: feature/gold length mismatch");
    if (features.empty()) throw std::invalid_argument("bow_train: empty training set");
    if (!(options.gamma > 0.0)) throw std::invalid_argument("bow_train: gamma must be positive");
    if (options.epochs < 1) throw std::invalid_argument("bow_train: epochs must be >= 1");
    if (!class_weights.empty() && static_cast<int>(class_weights.size()) != levels) {
        throw std::invalid_argument("bow_train: class weight count does not match levels");
    }
    LevelSet seen;
    for (const auto& g : golds) {
        if (g.empty()) throw std::invalid_argument("bow_train: empty gold set");
        for (Level l : g.levels()) seen.insert(l);
    }
    if (seen.size() < 2) throw std::invalid_argument("bow_train: degenerate single-class training set");

    const auto n = features.size();
    const auto vocab_size = static_cast<Eigen::Index>(vocab.size());
    const double lambda = 1.0 / (options.gamma * static_cast<double>(n));

    std::vector<double> sample_weight(n, 1.0);
    if (!class_weights.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            sample_weight[i] = class_weights[static_cast<std::size_t>(golds[i].highest().index())];
        }
    }

    BowModel model;
    model.vocabulary = vocab;
    model.gamma = options.gamma;
    model.class_weights.assign(class_weights.begin(), class_weights.end());
    model.weights = Eigen::MatrixXd::Zero(levels, vocab_size);
    model.bias = Eigen::VectorXd::Zero(levels);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int c = 0; c < levels; ++c) {
        // w = scale * v keeps the per-step shrinkage O(1); the bias is feature 0 of an
        // augmented input with constant value 1.
        Eigen::VectorXd v = Eigen::VectorXd::Zero(vocab_size);
        double v_bias = 0.0;
        double scale = 1.0;
        std::mt19937_64 rng(options.seed + static_cast<std::uint64_t>(c) * 0x9E3779B97F4A7C15ull);
        long t = 0;
        for (int epoch = 0; epoch < options.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t i : order) {
                ++t;
                const double eta = 1.0 / (lambda * static_cast<double>(t));
                const double y = golds[i].contains(Level(c)) ? 1.0 : -1.0;
                double dot = v_bias;
                for (const auto& [col, val] : features[i]) dot += v[col] * val;
                const double margin = y * scale * dot;
                const double shrink = 1.0 - eta * lambda;
                if (shrink <= 0.0) {
                    v.setZero();
                    v_bias = 0.0;
                    scale = 1.0;
                } else {
                    scale *= shrink;
                }
                if (margin < 1.0) {
                    const double step = eta * sample_weight[i] * y / scale;
                    for (const auto& [col, val] : features[i]) v[col] += step * val;
                    v_bias += step;
                }
                if (scale < 1e-9) {
                    v *= scale;
                    v_bias *= scale;
                    scale = 1.0;
                }
            }
        }
        model.weights.row(c) = scale * v.transpose();
        model.bias[c] = scale * v_bias;
    }
    return model;
}

BowModel bow_train(const Dataset& train, std::span<const double> class_weights, const BowOptions& options) {
    const Vocabulary vocab = build_vocabulary(train);
    std::vector<SparseVector> feats;
    std::vector<LevelSet> golds;
    for (const auto& s : train.sentences) {
        feats.push_back(bow_featurize(*train.record(s.id).tokens, vocab));
        golds.push_back(s.labels);
    }
    return bow_train(feats, golds, vocab, class_weights, options, kNumLevels);
}

Eigen::VectorXd bow_decision_values(const SparseVector& features, const BowModel& model) {
    Eigen::VectorXd out = model.bias;
    for (const auto& [col, val] : features) {
        if (col < 0 || col >= model.weights.cols()) throw std::invalid_argument("bow: feature column out of range");
        out += val * model.weights.col(col);
    }
    return out;
}

Level bow_predict(const SparseVector& features, const BowModel& model) {
    return Level(argmax_lowest(bow_decision_values(features, model)));
}

Container to_container(const BowModel& model) {
    Container c;
    c.type = ModelType::Bow;
    std::vector<std::string> columns(model.vocabulary.size());
    for (const auto& [lemma, col] : model.vocabulary) columns.at(static_cast<std::size_t>(col)) = lemma;
    c.header = {{"format_version", kFormatVersion},
                {"J", model.levels()},
                {"V", model.weights.cols()},
                {"gamma", model.gamma},
                {"class_weights", model.class_weights},
                {"vocabulary", columns}};
    for (Eigen::Index r = 0; r < model.weights.rows(); ++r)
        for (Eigen::Index col = 0; col < model.weights.cols(); ++col) c.payload.push_back(model.weights(r, col));
    for (Eigen::Index r = 0; r < model.bias.size(); ++r) c.payload.push_back(model.bias[r]);
    return c;
}

BowModel bow_model_from_container(const Container& c) {
    if (c.type != ModelType::Bow) throw DataError("model file does not hold a BoW model");
    BowModel model;
    Eigen::Index levels = 0, vocab_size = 0;
    try {
        levels = c.header.at("J").get<Eigen::Index>();
        vocab_size = c.header.at("V").get<Eigen::Index>();
        model.gamma = c.header.at("gamma").get<double>();
        model.class_weights = c.header.at("class_weights").get<std::vector<double>>();
        const auto columns = c.header.at("vocabulary").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < columns.size(); ++i) model.vocabulary.emplace(columns[i], static_cast<int>(i));
    } catch (const json::exception& e) {
        throw DataError(std::string("bad BoW model header: ") + e.what());
    }
    if (static_cast<Eigen::Index>(model.vocabulary.size()) != vocab_size ||
        static_cast<Eigen::Index>(c.payload.size()) != levels * vocab_size + levels) {
        throw DataError("BoW model payload does not match header");
    }
    model.weights.resize(levels, vocab_size);
    model.bias.resize(levels);
    std::size_t pos = 0;
    for (Eigen::Index r = 0; r < levels; ++r)
        for (Eigen::Index col = 0; col < vocab_size; ++col) model.weights(r, col) = c.payload[pos++];
    for (Eigen::Index r = 0; r < levels; ++r) model.bias[r] = c.payload[pos++];
    return model;
}

}  // namespace cefr
