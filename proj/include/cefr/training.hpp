#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cefr/dataset.hpp"
#include "cefr/metric_head.hpp"
#include "json.hpp"

namespace cefr {

// Which gold label a two-label sentence is trained towards.
enum class TargetRule {
    MostProbable,  // the gold label with the larger predicted probability (ties to lower)
    HigherLevel,   // always the higher gold label
};

// How LossWeights enter the per-sample loss.
enum class WeightMode {
    Direct,  // loss scaled by w_g
    // loss scaled by w_g / q_g (normalised so the weights average to 1 per sample);
    // with this mode a class's total contribution follows the multinomial w itself.
    FrequencyRatio,
};

struct TrainConfig {
    double alpha = 0.2;
    double learning_rate = 1e-3;
    int batch_size = 128;
    int patience = 10;
    double min_delta = 1e-5;
    int max_epochs = 200;
    std::uint64_t seed = 0;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int per_level = 3;
    double noise_fraction = 0.05;
    bool adapter_enabled = true;
    bool loss_weighting = true;
    bool init_from_means = true;
    TargetRule target_rule = TargetRule::MostProbable;
    WeightMode weight_mode = WeightMode::FrequencyRatio;

    // Throws std::invalid_argument when an invariant is violated.
    void validate() const;
    nlohmann::json to_json() const;
};

// Reads "key = value" lines (# starts a comment) into cfg, overriding its fields.
void apply_config_file(const std::string& path, TrainConfig& cfg);
void apply_config_stream(std::istream& in, TrainConfig& cfg, const std::string& origin = "<config>");

struct LossWeights {
    std::vector<double> w;
};

// w_i = counts_i^alpha / sum_j counts_j^alpha.
LossWeights loss_weights(std::span<const long> counts, double alpha);

// Per-level multipliers actually applied to the loss under cfg.
std::vector<double> effective_class_weights(std::span<const long> counts, const TrainConfig& cfg);

Level training_target(const Eigen::VectorXd& probabilities, const LevelSet& gold, TargetRule rule);

// -w_{g*} ln p_{g*}, g* chosen by rule.
double weighted_ce_loss(const Eigen::VectorXd& probabilities, const LevelSet& gold,
                        std::span<const double> class_weights,
                        TargetRule rule = TargetRule::MostProbable);

struct Gradients {
    Eigen::MatrixXd prototypes;
    Eigen::MatrixXd adapter;  // zero when the model has no adapter
    double loss = 0.0;        // mean batch loss at the evaluation point
};

// Mean weighted loss over a batch.
double batch_loss(std::span<const LabeledVector> batch, const PrototypeModel& model,
                  std::span<const double> class_weights, TargetRule rule = TargetRule::MostProbable);

// Exact gradients of batch_loss with respect to the prototypes and the adapter.
Gradients loss_gradients(std::span<const LabeledVector> batch, const PrototypeModel& model,
                         std::span<const double> class_weights,
                         TargetRule rule = TargetRule::MostProbable);

// Adaptive moments with decoupled weight decay.
class AdamW {
public:
    AdamW(const TrainConfig& cfg, const PrototypeModel& model);
    void step(PrototypeModel& model, const Gradients& grads);
    long steps() const { return t_; }

private:
    void update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Eigen::MatrixXd& m, Eigen::MatrixXd& v);

    double lr_, beta1_, beta2_, eps_, decay_;
    long t_ = 0;
    Eigen::MatrixXd m_c_, v_c_, m_a_, v_a_;
};

struct EpochRecord {
    int epoch = 0;  // 0 is the initialised model before any update
    double train_loss = 0.0;
    double valid_macro_f1 = 0.0;
    bool improved = false;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_valid_macro_f1 = 0.0;
    std::vector<double> class_weights;
    std::string stop_reason;
};

void write_train_log(std::ostream& out, const TrainLog& log);

struct TrainResult {
    PrototypeModel model;
    TrainLog log;
};

// Trains over `levels` classes. Every level must occur in train.
TrainResult train(std::span<const LabeledVector> train_set, std::span<const LabeledVector> valid_set,
                  const TrainConfig& cfg, int levels = kNumLevels);
TrainResult train(const Dataset& train_set, const Dataset& valid_set, const TrainConfig& cfg);

std::vector<Level> predict_all(std::span<const LabeledVector> data, const PrototypeModel& model);

}  // namespace cefr
