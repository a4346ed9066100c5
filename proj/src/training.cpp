#include "cefr/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "cefr/evaluation.hpp"

namespace cefr {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
    if (per_level < 1) throw std::invalid_argument("K (prototypes per level) must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (min_delta < 0.0) throw std::invalid_argument("min_delta must be >= 0");
    if (noise_fraction < 0.0) throw std::invalid_argument("noise_fraction must be >= 0");
}

json TrainConfig::to_json() const {
    return {{"alpha", alpha},
            {"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"patience", patience},
            {"min_delta", min_delta},
            {"max_epochs", max_epochs},
            {"seed", seed},
            {"weight_decay", weight_decay},
            {"beta1", beta1},
            {"beta2", beta2},
            {"epsilon", epsilon},
            {"K", per_level},
            {"noise_fraction", noise_fraction},
            {"adapter_enabled", adapter_enabled},
            {"loss_weighting", loss_weighting},
            {"init_from_means", init_from_means},
            {"target_rule", target_rule == TargetRule::MostProbable ? "most-probable" : "higher-level"},
            {"weight_mode", weight_mode == WeightMode::Direct ? "direct" : "frequency-ratio"}};
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

}  // namespace

void apply_config_stream(std::istream& in, TrainConfig& cfg, const std::string& origin) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "alpha") cfg.alpha = std::stod(value);
            else if (key == "learning_rate" || key == "lr") cfg.learning_rate = std::stod(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "patience") cfg.patience = std::stoi(value);
            else if (key == "min_delta") cfg.min_delta = std::stod(value);
            else if (key == "max_epochs") cfg.max_epochs = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
            else if (key == "beta1") cfg.beta1 = std::stod(value);
            else if (key == "beta2") cfg.beta2 = std::stod(value);
            else if (key == "epsilon") cfg.epsilon = std::stod(value);
            else if (key == "K" || key == "k" || key == "prototypes") cfg.per_level = std::stoi(value);
            else if (key == "noise_fraction") cfg.noise_fraction = std::stod(value);
            else if (key == "adapter_enabled" || key == "adapter") cfg.adapter_enabled = parse_bool(value);
            else if (key == "loss_weighting") cfg.loss_weighting = parse_bool(value);
            else if (key == "init_from_means") cfg.init_from_means = parse_bool(value);
            else if (key == "target_rule") {
                if (value == "most-probable") cfg.target_rule = TargetRule::MostProbable;
                else if (value == "higher-level") cfg.target_rule = TargetRule::HigherLevel;
                else throw std::invalid_argument("target_rule must be most-probable or higher-level");
            } else if (key == "weight_mode") {
                if (value == "direct") cfg.weight_mode = WeightMode::Direct;
                else if (value == "frequency-ratio") cfg.weight_mode = WeightMode::FrequencyRatio;
                else throw std::invalid_argument("weight_mode must be direct or frequency-ratio");
            } else {
                throw std::invalid_argument("unknown key '" + key + "'");
            }
        } catch (const std::logic_error& e) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void apply_config_file(const std::string& path, TrainConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file '" + path + "'");
    apply_config_stream(in, cfg, path);
}

LossWeights loss_weights(std::span<const long> counts, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("loss_weights: alpha must lie in [0, 1]");
    if (counts.empty()) throw std::invalid_argument("loss_weights: no levels");
    LossWeights out;
    out.w.reserve(counts.size());
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] <= 0) {
            throw std::invalid_argument("loss_weights: level " +
                                        (i < kLevelLabels.size() ? std::string(kLevelLabels[i]) : std::to_string(i)) +
                                        " has no training samples; merge it with a neighbouring level or "
                                        "supply data for it");
        }
        const double v = std::pow(static_cast<double>(counts[i]), alpha);
        out.w.push_back(v);
        total += v;
    }
    for (double& v : out.w) v /= total;
    return out;
}

std::vector<double> effective_class_weights(std::span<const long> counts, const TrainConfig& cfg) {
    const auto levels = counts.size();
    if (!cfg.loss_weighting) {
        const double uniform = cfg.weight_mode == WeightMode::Direct ? 1.0 / static_cast<double>(levels) : 1.0;
        return std::vector<double>(levels, uniform);
    }
    auto w = loss_weights(counts, cfg.alpha).w;
    if (cfg.weight_mode == WeightMode::FrequencyRatio) {
        double total = 0.0;
        for (long c : counts) total += static_cast<double>(c);
        for (std::size_t i = 0; i < levels; ++i) w[i] /= static_cast<double>(counts[i]) / total;
    }
    return w;
}

Level training_target(const Eigen::VectorXd& probabilities, const LevelSet& gold, TargetRule rule) {
    if (gold.empty()) throw std::invalid_argument("training_target: empty gold set");
    if (rule == TargetRule::HigherLevel) return gold.highest();
    Level best = gold.lowest();
    for (Level g : gold.levels()) {
        if (g.index() >= probabilities.size()) throw std::invalid_argument("gold level outside model range");
        if (probabilities[g.index()] > probabilities[best.index()]) best = g;
    }
    return best;
}

double weighted_ce_loss(const Eigen::VectorXd& probabilities, const LevelSet& gold,
                        std::span<const double> class_weights, TargetRule rule) {
    const Level g = training_target(probabilities, gold, rule);
    const double p = probabilities[g.index()];
    if (p <= 0.0) throw std::domain_error("weighted_ce_loss: zero probability at target level");
    return -class_weights[static_cast<std::size_t>(g.index())] * std::log(p);
}

double batch_loss(std::span<const LabeledVector> batch, const PrototypeModel& model,
                  std::span<const double> class_weights, TargetRule rule) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    double total = 0.0;
    for (const auto& sample : batch) {
        total += weighted_ce_loss(level_distribution(sample.vector, model), sample.gold, class_weights, rule);
    }
    return total / static_cast<double>(batch.size());
}

Gradients loss_gradients(std::span<const LabeledVector> batch, const PrototypeModel& model,
                         std::span<const double> class_weights, TargetRule rule) {
    if (batch.empty()) throw std::invalid_argument("loss_gradients: empty batch");
    if (static_cast<int>(class_weights.size()) != model.levels) {
        throw std::invalid_argument("loss_gradients: class weight count does not match model levels");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
    const Eigen::Index dim = model.dimension();
    const int levels = model.levels;
    const int per_level = model.per_level;

    Eigen::MatrixXd x(n, dim);
    for (Eigen::Index b = 0; b < n; ++b) {
        const auto& v = batch[static_cast<std::size_t>(b)].vector;
        if (static_cast<Eigen::Index>(v.size()) != dim) {
            throw std::invalid_argument("loss_gradients: sample dimension does not match model");
        }
        x.row(b) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), dim);
    }
    const Eigen::MatrixXd z = model.adapter ? Eigen::MatrixXd(x * model.adapter->transpose()) : x;
    const Eigen::VectorXd z_norm = z.rowwise().norm();
    if ((z_norm.array() <= 0.0).any()) throw std::invalid_argument("loss_gradients: zero-norm adapted input");
    const Eigen::MatrixXd z_hat = z_norm.cwiseInverse().asDiagonal() * z;
    const Eigen::VectorXd c_norm = model.prototypes.rowwise().norm();
    const Eigen::MatrixXd c_hat = c_norm.cwiseInverse().asDiagonal() * model.prototypes;
    const Eigen::MatrixXd cos = z_hat * c_hat.transpose();  // n x KJ

    Eigen::MatrixXd grad_cos(n, model.rows());
    double loss = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
        Eigen::VectorXd sims(levels);
        for (int j = 0; j < levels; ++j) {
            sims[j] = cos.row(b).segment(static_cast<Eigen::Index>(j) * per_level, per_level).mean();
        }
        const double m = sims.maxCoeff();
        const double log_norm = m + std::log((sims.array() - m).exp().sum());
        const Eigen::VectorXd p = (sims.array() - log_norm).exp();
        const Level g = training_target(p, batch[static_cast<std::size_t>(b)].gold, rule);
        const double w = class_weights[static_cast<std::size_t>(g.index())];
        loss += -w * (sims[g.index()] - log_norm);
        Eigen::VectorXd grad_s = w * p;
        grad_s[g.index()] -= w;
        grad_s /= static_cast<double>(n);
        for (int j = 0; j < levels; ++j) {
            for (int k = 0; k < per_level; ++k) grad_cos(b, model.row_of(j, k)) = grad_s[j] / per_level;
        }
    }
    loss /= static_cast<double>(n);

    const Eigen::MatrixXd weighted = grad_cos.cwiseProduct(cos);
    Gradients g;
    g.loss = loss;
    // d cos / d c = (z_hat - cos c_hat) / |c|
    g.prototypes = c_norm.cwiseInverse().asDiagonal() *
                   (grad_cos.transpose() * z_hat -
                    Eigen::VectorXd(weighted.colwise().sum().transpose()).asDiagonal() * c_hat);
    if (model.adapter) {
        // d cos / d z = (c_hat - cos z_hat) / |z|, and z = A x.
        const Eigen::MatrixXd grad_z =
            z_norm.cwiseInverse().asDiagonal() *
            (grad_cos * c_hat - Eigen::VectorXd(weighted.rowwise().sum()).asDiagonal() * z_hat);
        g.adapter = grad_z.transpose() * x;
    } else {
        g.adapter = Eigen::MatrixXd::Zero(dim, dim);
    }
    return g;
}

AdamW::AdamW(const TrainConfig& cfg, const PrototypeModel& model)
    : lr_(cfg.learning_rate),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.epsilon),
      decay_(cfg.weight_decay),
      m_c_(Eigen::MatrixXd::Zero(model.prototypes.rows(), model.prototypes.cols())),
      v_c_(m_c_) {
    if (model.adapter) {
        m_a_ = Eigen::MatrixXd::Zero(model.adapter->rows(), model.adapter->cols());
        v_a_ = m_a_;
    }
}

void AdamW::update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Eigen::MatrixXd& m, Eigen::MatrixXd& v) {
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    param *= (1.0 - lr_ * decay_);
    param.array() -= lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
}

void AdamW::step(PrototypeModel& model, const Gradients& grads) {
    ++t_;
    update(model.prototypes, grads.prototypes, m_c_, v_c_);
    if (model.adapter) update(*model.adapter, grads.adapter, m_a_, v_a_);
}

void write_train_log(std::ostream& out, const TrainLog& log) {
    for (const auto& e : log.epochs) {
        json j = {{"epoch", e.epoch},
                  {"train_loss", e.train_loss},
                  {"valid_macro_f1", e.valid_macro_f1},
                  {"improved", e.improved}};
        if (e.epoch == 0) j["class_weights"] = log.class_weights;
        out << j.dump() << '\n';
    }
    out << json{{"best_epoch", log.best_epoch},
                {"best_valid_macro_f1", log.best_valid_macro_f1},
                {"stop_reason", log.stop_reason}}
               .dump()
        << '\n';
}

std::vector<Level> predict_all(std::span<const LabeledVector> data, const PrototypeModel& model) {
    std::vector<Level> out;
    out.reserve(data.size());
    for (const auto& s : data) out.push_back(predict(s.vector, model));
    return out;
}

namespace {

double validation_score(std::span<const LabeledVector> valid, const PrototypeModel& model) {
    const auto preds = predict_all(valid, model);
    std::vector<LevelSet> golds;
    golds.reserve(valid.size());
    for (const auto& s : valid) golds.push_back(s.gold);
    return macro_f1(preds, golds, model.levels);
}

PrototypeModel random_model(int dim, const TrainConfig& cfg, int levels) {
    PrototypeModel model;
    model.levels = levels;
    model.per_level = cfg.per_level;
    model.prototypes.resize(static_cast<Eigen::Index>(levels) * cfg.per_level, dim);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index r = 0; r < model.prototypes.rows(); ++r)
        for (Eigen::Index c = 0; c < dim; ++c) model.prototypes(r, c) = normal(rng);
    if (cfg.adapter_enabled) model.adapter = Eigen::MatrixXd::Identity(dim, dim);
    model.metadata.seed = cfg.seed;
    model.metadata.noise_fraction = cfg.noise_fraction;
    return model;
}

}  // namespace

TrainResult train(std::span<const LabeledVector> train_set, std::span<const LabeledVector> valid_set,
                  const TrainConfig& cfg, int levels) {
    cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    if (valid_set.empty()) throw std::invalid_argument("train: empty validation set");

    std::vector<long> counts(static_cast<std::size_t>(levels), 0);
    for (const auto& s : train_set) {
        for (Level l : s.gold.levels()) {
            if (l.index() >= levels) throw std::invalid_argument("train: gold level outside level range");
            ++counts[static_cast<std::size_t>(l.index())];
        }
    }

    TrainResult result;
    result.log.class_weights = effective_class_weights(counts, cfg);
    const auto& weights = result.log.class_weights;

    const int dim = static_cast<int>(train_set.front().vector.size());
    PrototypeModel model = cfg.init_from_means
                               ? init_prototypes(train_set, InitOptions{levels, cfg.per_level, cfg.noise_fraction,
                                                                        cfg.seed, cfg.adapter_enabled})
                               : random_model(dim, cfg, levels);
    model.metadata.alpha = cfg.loss_weighting ? cfg.alpha : 0.0;
    model.metadata.config_json = cfg.to_json().dump();

    double best_score = validation_score(valid_set, model);
    PrototypeModel best = model;
    result.log.epochs.push_back({0, batch_loss(train_set, model, weights, cfg.target_rule), best_score, true});
    result.log.best_epoch = 0;
    result.log.best_valid_macro_f1 = best_score;
    result.log.stop_reason = "max_epochs";

    std::vector<LabeledVector> order(train_set.begin(), train_set.end());
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
    AdamW optimizer(cfg, model);
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
            const std::span<const LabeledVector> batch(order.data() + start, len);
            const Gradients grads = loss_gradients(batch, model, weights, cfg.target_rule);
            if (!std::isfinite(grads.loss) || !grads.prototypes.allFinite() || !grads.adapter.allFinite()) {
                throw std::runtime_error("train: non-finite loss or gradient at epoch " + std::to_string(epoch) +
                                         " (batch starting at " + std::to_string(start) +
                                         "); try a smaller learning rate");
            }
            loss_sum += grads.loss * static_cast<double>(len);
            optimizer.step(model, grads);
        }

        const double score = validation_score(valid_set, model);
        const bool improved = score > best_score + cfg.min_delta;
        result.log.epochs.push_back({epoch, loss_sum / static_cast<double>(order.size()), score, improved});
        if (improved) {
            best_score = score;
            best = model;
            result.log.best_epoch = epoch;
            result.log.best_valid_macro_f1 = score;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            result.log.stop_reason = "early_stopping";
            break;
        }
    }

    result.model = std::move(best);
    return result;
}

TrainResult train(const Dataset& train_set, const Dataset& valid_set, const TrainConfig& cfg) {
    const auto train_samples = labeled_vectors(train_set);
    const auto valid_samples = labeled_vectors(valid_set);
    return train(train_samples, valid_samples, cfg, kNumLevels);
}

}  // namespace cefr
