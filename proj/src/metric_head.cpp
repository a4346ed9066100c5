#include "cefr/metric_head.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace cefr {

namespace {

Eigen::VectorXd adapted(std::span<const double> x, const PrototypeModel& model) {
    if (static_cast<int>(x.size()) != model.dimension()) {
        throw std::invalid_argument("input dimension " + std::to_string(x.size()) +
                                    " does not match model dimension " +
                                    std::to_string(model.dimension()));
    }
    Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    if (model.adapter) return *model.adapter * v;
    return v;
}

}  // namespace

void PrototypeModel::validate() const {
    if (levels < 1 || per_level < 1) throw std::invalid_argument("model needs levels >= 1 and K >= 1");
    if (prototypes.rows() != rows()) {
        throw std::invalid_argument("prototype matrix has " + std::to_string(prototypes.rows()) +
                                    " rows, expected K*J = " + std::to_string(rows()));
    }
    if (prototypes.cols() < 1) throw std::invalid_argument("prototype dimension must be positive");
    for (Eigen::Index r = 0; r < prototypes.rows(); ++r) {
        const double n = prototypes.row(r).norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw std::invalid_argument("prototype row " + std::to_string(r) + " has zero or non-finite norm");
        }
    }
    if (adapter && (adapter->rows() != prototypes.cols() || adapter->cols() != prototypes.cols())) {
        throw std::invalid_argument("adapter must be d x d");
    }
}

Eigen::VectorXd level_similarities(std::span<const double> x, const PrototypeModel& model) {
    const Eigen::VectorXd z = adapted(x, model);
    const double zn = z.norm();
    if (zn == 0.0) throw std::invalid_argument("level_similarities: zero-norm input");
    Eigen::VectorXd sims = Eigen::VectorXd::Zero(model.levels);
    for (int j = 0; j < model.levels; ++j) {
        double acc = 0.0;
        for (int k = 0; k < model.per_level; ++k) {
            const auto c = model.prototypes.row(model.row_of(j, k));
            acc += c.dot(z) / (c.norm() * zn);
        }
        sims[j] = acc / model.per_level;
    }
    return sims;
}

double level_similarity(std::span<const double> x, const PrototypeModel& model, Level level) {
    if (level.index() >= model.levels) throw std::invalid_argument("level outside model range");
    return level_similarities(x, model)[level.index()];
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
    const double m = scores.maxCoeff();
    Eigen::VectorXd e = (scores.array() - m).exp();
    return e / e.sum();
}

Eigen::VectorXd level_distribution(std::span<const double> x, const PrototypeModel& model) {
    return softmax(level_similarities(x, model));
}

Level predict_from_similarities(const Eigen::VectorXd& similarities) {
    return Level(argmax_lowest(similarities));
}

Level predict(std::span<const double> x, const PrototypeModel& model) {
    return predict_from_similarities(level_similarities(x, model));
}

Prediction predict_full(std::span<const double> x, const PrototypeModel& model) {
    Prediction p;
    p.similarities = level_similarities(x, model);
    p.probabilities = softmax(p.similarities);
    p.level = predict_from_similarities(p.similarities);
    return p;
}

PrototypeModel init_prototypes(std::span<const LabeledVector> train, const InitOptions& options) {
    const int levels = options.levels;
    const int per_level = options.per_level;
    if (levels < 1 || per_level < 1) throw std::invalid_argument("init_prototypes: need J >= 1 and K >= 1");
    if (train.empty()) throw std::invalid_argument("init_prototypes: empty training set");
    if (options.noise_fraction < 0.0) throw std::invalid_argument("init_prototypes: negative noise fraction");
    const auto dim = static_cast<Eigen::Index>(train.front().vector.size());
    const Eigen::Index rows = static_cast<Eigen::Index>(levels) * per_level;
    if (rows > dim) {
        throw std::invalid_argument("init_prototypes: K*J = " + std::to_string(rows) +
                                    " exceeds embedding dimension " + std::to_string(dim) +
                                    "; orthonormal prototypes are impossible");
    }

    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(levels, dim);
    std::vector<long> counts(static_cast<std::size_t>(levels), 0);
    for (const auto& sample : train) {
        if (static_cast<Eigen::Index>(sample.vector.size()) != dim) {
            throw std::invalid_argument("init_prototypes: inconsistent vector dimension");
        }
        Eigen::Map<const Eigen::RowVectorXd> v(sample.vector.data(), dim);
        for (Level l : sample.gold.levels()) {
            if (l.index() >= levels) continue;
            means.row(l.index()) += v;
            ++counts[static_cast<std::size_t>(l.index())];
        }
    }
    for (int j = 0; j < levels; ++j) {
        if (counts[static_cast<std::size_t>(j)] == 0) {
            throw std::invalid_argument("init_prototypes: level " + std::string(Level(j).label()) +
                                        " has no training embeddings");
        }
        means.row(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
    }

    const double mean_all = means.mean();
    const double variance = (means.array() - mean_all).square().mean();
    const double sigma = std::sqrt(options.noise_fraction * variance);

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Eigen::MatrixXd draft(rows, dim);
    for (int j = 0; j < levels; ++j) {
        for (int k = 0; k < per_level; ++k) {
            const Eigen::Index r = static_cast<Eigen::Index>(j) * per_level + k;
            for (Eigen::Index e = 0; e < dim; ++e) draft(r, e) = means(j, e) + sigma * noise(rng);
        }
    }

    // Thin QR of draft^T: columns of Q are an orthonormal basis of the row span.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(draft.transpose());
    const Eigen::MatrixXd r_factor = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
    const double scale = r_factor.diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (!(std::abs(r_factor(i, i)) > 1e-10 * scale)) {
            throw std::invalid_argument(
                "init_prototypes: initial prototype matrix is rank deficient (identical class means "
                "with zero noise?)");
        }
    }
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, rows);
    Eigen::MatrixXd protos = q.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (protos.row(i).dot(draft.row(i)) < 0.0) protos.row(i) *= -1.0;
    }

    PrototypeModel model;
    model.levels = levels;
    model.per_level = per_level;
    model.prototypes = std::move(protos);
    if (options.with_adapter) model.adapter = Eigen::MatrixXd::Identity(dim, dim);
    model.metadata.seed = options.seed;
    model.metadata.noise_fraction = options.noise_fraction;
    return model;
}

PrototypeModel init_prototypes(const Dataset& train, const InitOptions& options) {
    const auto samples = labeled_vectors(train);
    return init_prototypes(std::span<const LabeledVector>(samples), options);
}

}  // namespace cefr
