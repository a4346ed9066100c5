#include "cefr/model_io.hpp"

#include "cefr/dataset.hpp"

namespace cefr {

using nlohmann::json;

namespace {

json header_of(const PrototypeModel& model) {
    json h;
    h["format_version"] = kFormatVersion;
    h["J"] = model.levels;
    h["K"] = model.per_level;
    h["d"] = model.dimension();
    h["has_adapter"] = model.adapter.has_value();
    h["seed"] = model.metadata.seed;
    h["alpha"] = model.metadata.alpha;
    h["row_layout"] = "level-major";
    json meta;
    meta["noise_fraction"] = model.metadata.noise_fraction;
    meta["config"] = json::parse(model.metadata.config_json);
    h["metadata"] = meta;
    return h;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

void append_row_major(std::vector<double>& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
}

}  // namespace

Container to_container(const PrototypeModel& model) {
    model.validate();
    Container c;
    c.type = ModelType::Prototype;
    c.header = header_of(model);
    append_row_major(c.payload, model.prototypes);
    if (model.adapter) append_row_major(c.payload, *model.adapter);
    return c;
}

PrototypeModel prototype_model_from_container(const Container& c) {
    if (c.type != ModelType::Prototype) throw DataError("model file does not hold a prototype model");
    PrototypeModel model;
    std::size_t expected = 0;
    int dim = 0;
    try {
        model.levels = c.header.at("J").get<int>();
        model.per_level = c.header.at("K").get<int>();
        dim = c.header.at("d").get<int>();
        const bool has_adapter = c.header.at("has_adapter").get<bool>();
        model.metadata.seed = c.header.at("seed").get<std::uint64_t>();
        model.metadata.alpha = c.header.at("alpha").get<double>();
        const auto& meta = c.header.at("metadata");
        model.metadata.noise_fraction = meta.value("noise_fraction", 0.05);
        model.metadata.config_json = meta.value("config", json::object()).dump();
        if (model.levels < 1 || model.per_level < 1 || dim < 1) throw DataError("bad model shape");
        expected = static_cast<std::size_t>(model.rows()) * dim;
        if (has_adapter) {
            expected += static_cast<std::size_t>(dim) * dim;
            model.adapter = Eigen::MatrixXd(dim, dim);
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("bad prototype model header: ") + e.what());
    }
    if (c.payload.size() != expected) throw DataError("model payload size does not match header");
    model.prototypes.resize(model.rows(), dim);
    std::size_t pos = 0;
    for (int r = 0; r < model.rows(); ++r)
        for (int col = 0; col < dim; ++col) model.prototypes(r, col) = c.payload[pos++];
    if (model.adapter) {
        for (int r = 0; r < dim; ++r)
            for (int col = 0; col < dim; ++col) (*model.adapter)(r, col) = c.payload[pos++];
    }
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("invalid prototype model: ") + e.what());
    }
    return model;
}

void save_model(const std::string& path, const PrototypeModel& model) {
    save_container(path, to_container(model));
}

PrototypeModel load_model(const std::string& path) {
    return prototype_model_from_container(load_container(path));
}

json model_to_json(const PrototypeModel& model) {
    json j = header_of(model);
    j["prototypes"] = matrix_json(model.prototypes);
    if (model.adapter) j["adapter"] = matrix_json(*model.adapter);
    return j;
}

}  // namespace cefr
