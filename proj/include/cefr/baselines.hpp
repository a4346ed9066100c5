#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cefr/container.hpp"
#include "cefr/dataset.hpp"
#include "cefr/level.hpp"

namespace cefr {

// ---- k nearest neighbours over cosine distance ---------------------------------

struct KnnIndex {
    Eigen::MatrixXd vectors;  // n x d, stored as given
    std::vector<LevelSet> labels;
    int k = 6;
    bool distance_weighted = false;

    std::size_t size() const { return labels.size(); }
};

KnnIndex build_knn_index(std::span<const LabeledVector> train, int k, bool distance_weighted = false);

// Unweighted majority vote over the k smallest cosine distances. A two-label point
// votes for both labels. Vote ties go to the lower level; distance ties at the k-th
// place go to the earlier stored point.
Level knn_predict(std::span<const double> x, const KnnIndex& index);

Container to_container(const KnnIndex& index);
KnnIndex knn_index_from_container(const Container& c);

// ---- linear bag-of-words SVM ---------------------------------------------------

using Vocabulary = std::map<std::string, int>;
using SparseVector = std::vector<std::pair<int, double>>;  // sorted by column

// Lemmas of the training tokens, columns assigned in lexicographic order.
Vocabulary build_vocabulary(const Dataset& train);

SparseVector bow_featurize(std::span<const TokenAnnotation> tokens, const Vocabulary& vocab);

struct BowOptions {
    double gamma = 4.6;  // SVM regularisation parameter (cost of margin violations)
    int epochs = 50;
    std::uint64_t seed = 0;
};

struct BowModel {
    Vocabulary vocabulary;
    Eigen::MatrixXd weights;  // J x V
    Eigen::VectorXd bias;     // J
    double gamma = 0.0;
    std::vector<double> class_weights;

    int levels() const { return static_cast<int>(weights.rows()); }
};

// One-vs-rest hinge loss with L2 regularisation, trained by seeded stochastic
// subgradient descent (Pegasos schedule). class_weights[g] multiplies the hinge term
// of each sample whose higher gold level is g; pass an empty span for unweighted.
BowModel bow_train(std::span<const SparseVector> features, std::span<const LevelSet> golds,
                   const Vocabulary& vocab, std::span<const double> class_weights, const BowOptions& options,
                   int levels = kNumLevels);
BowModel bow_train(const Dataset& train, std::span<const double> class_weights, const BowOptions& options);

Eigen::VectorXd bow_decision_values(const SparseVector& features, const BowModel& model);
Level bow_predict(const SparseVector& features, const BowModel& model);

Container to_container(const BowModel& model);
BowModel bow_model_from_container(const Container& c);

}  // namespace cefr
