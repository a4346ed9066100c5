#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cefr/dataset.hpp"
#include "cefr/level.hpp"

namespace cefr {

struct ModelMetadata {
    std::uint64_t seed = 0;
    double alpha = 0.0;
    double noise_fraction = 0.05;
    std::string config_json = "{}";  // serialized training configuration, if any

    bool operator==(const ModelMetadata&) const = default;
};

// Prototype-based metric classifier head.
//
// prototypes holds K rows per level in level-major order: prototype k of level j
// is row j*K + k. Inputs are optionally mapped through a d x d adapter before
// comparison, x' = A x.
struct PrototypeModel {
    int levels = kNumLevels;
    int per_level = 1;
    Eigen::MatrixXd prototypes;
    std::optional<Eigen::MatrixXd> adapter;
    ModelMetadata metadata;

    int dimension() const { return static_cast<int>(prototypes.cols()); }
    int rows() const { return levels * per_level; }
    int row_of(int level, int k) const { return level * per_level + k; }

    // Throws std::invalid_argument if shapes or row norms are inconsistent.
    void validate() const;
};

// Similarity to every level: mean over the level's prototypes of CosSim(A x, c).
Eigen::VectorXd level_similarities(std::span<const double> x, const PrototypeModel& model);
double level_similarity(std::span<const double> x, const PrototypeModel& model, Level level);

// Softmax over a similarity vector with max subtraction.
Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

Eigen::VectorXd level_distribution(std::span<const double> x, const PrototypeModel& model);

// Argmax of the similarities (equivalently of the distribution), ties to the lower level.
Level predict_from_similarities(const Eigen::VectorXd& similarities);
Level predict(std::span<const double> x, const PrototypeModel& model);

struct Prediction {
    Level level;
    Eigen::VectorXd probabilities;
    Eigen::VectorXd similarities;
};
Prediction predict_full(std::span<const double> x, const PrototypeModel& model);

struct InitOptions {
    int levels = kNumLevels;
    int per_level = 3;
    double noise_fraction = 0.05;
    std::uint64_t seed = 0;
    bool with_adapter = false;
};

// Class-mean initialisation: per-level means, replicated K times with Gaussian
// noise (variance = noise_fraction * variance of all class-mean elements), then
// orthonormalised by thin QR with rows sign-matched to their pre-QR vectors.
// Two-label samples contribute to the mean of both levels.
PrototypeModel init_prototypes(std::span<const LabeledVector> train, const InitOptions& options);
PrototypeModel init_prototypes(const Dataset& train, const InitOptions& options);

}  // namespace cefr
