#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hts/error.hpp"
#include "hts/io.hpp"
#include "hts/neural.hpp"

namespace hts {

inline constexpr int model_format_version = 1;

inline nlohmann::json config_to_json(const EncoderConfig& c) {
    return {{"architecture", architecture_name(c.architecture)},
            {"hidden_layers", c.hidden_layers},
            {"dropout", c.dropout},
            {"learning_rate", c.learning_rate},
            {"weight_decay", c.weight_decay},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"loss", loss_name(c.loss)},
            {"ensemble_size", c.ensemble_size},
            {"seed", c.seed}};
}

inline EncoderConfig config_from_json(const nlohmann::json& j) {
    try {
        EncoderConfig c;
        c.architecture = parse_architecture(j.at("architecture").get<std::string>());
        c.hidden_layers = j.at("hidden_layers").get<std::size_t>();
        c.dropout = j.at("dropout").get<double>();
        c.learning_rate = j.at("learning_rate").get<double>();
        c.weight_decay = j.at("weight_decay").get<double>();
        c.epochs = j.at("epochs").get<std::size_t>();
        c.batch_size = j.at("batch_size").get<std::size_t>();
        c.loss = parse_loss(j.at("loss").get<std::string>());
        c.ensemble_size = j.at("ensemble_size").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("encoder config: ") + e.what());
    }
}

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto flat = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw InputError("model file: matrix size mismatch");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
    return m;
}

inline nlohmann::json encoder_to_json(const Encoder& enc) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : enc.layers) {
        std::vector<double> bias(layer.bias.data(), layer.bias.data() + layer.bias.size());
        layers.push_back({{"weights", matrix_to_json(layer.weights)},
                          {"bias", bias},
                          {"relu", layer.relu},
                          {"mask", layer.masked() ? matrix_to_json(layer.mask) : nlohmann::json(nullptr)}});
    }
    std::vector<double> scale(enc.scale.data(), enc.scale.data() + enc.scale.size());
    return {{"config", config_to_json(enc.config)}, {"scale", scale}, {"layers", layers}};
}

inline Encoder encoder_from_json(const nlohmann::json& j, const Hierarchy& h) {
    Encoder enc;
    enc.config = config_from_json(j.at("config"));
    enc.hierarchy = h;
    enc.summing = SummingMatrix(h);
    const auto scale = j.at("scale").get<std::vector<double>>();
    if (scale.size() != h.size()) throw InputError("model file: scale vector does not match the hierarchy");
    enc.scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    Eigen::Index expected_in = static_cast<Eigen::Index>(h.size());
    for (const auto& jl : j.at("layers")) {
        Layer layer;
        layer.weights = matrix_from_json(jl.at("weights"));
        const auto bias = jl.at("bias").get<std::vector<double>>();
        layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
        layer.relu = jl.at("relu").get<bool>();
        if (!jl.at("mask").is_null()) layer.mask = matrix_from_json(jl.at("mask"));
        if (layer.weights.cols() != expected_in || layer.bias.size() != layer.weights.rows() ||
            (layer.masked() && (layer.mask.rows() != layer.weights.rows() || layer.mask.cols() != layer.weights.cols())))
            throw InputError("model file: inconsistent layer shapes");
        expected_in = layer.weights.rows();
        enc.layers.push_back(std::move(layer));
    }
    if (enc.layers.empty() || expected_in != static_cast<Eigen::Index>(h.bottom_count()))
        throw InputError("model file: output size does not match the hierarchy");
    return enc;
}

} // namespace detail

/// Textual dump of an ensemble: format tag, version, node ids and members.
inline std::string ensemble_to_text(const Ensemble& ens) {
    if (ens.members.empty()) throw ContractError("save_ensemble: no members");
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : ens.members) members.push_back(detail::encoder_to_json(m));
    nlohmann::json doc = {{"format", "hts-encoder-ensemble"},
                          {"version", model_format_version},
                          {"nodes", ens.members.front().hierarchy.ids()},
                          {"members", members}};
    return doc.dump(1) + "\n";
}

inline Ensemble ensemble_from_text(const std::string& text, const Hierarchy& h) {
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.at("format").get<std::string>() != "hts-encoder-ensemble")
            throw InputError("model file: unknown format tag");
        if (doc.at("version").get<int>() != model_format_version)
            throw InputError("model file: unsupported version " + std::to_string(doc.at("version").get<int>()));
        if (doc.at("nodes").get<std::vector<std::string>>() != h.ids())
            throw InputError("model file: node list does not match the hierarchy");
        Ensemble ens;
        for (const auto& m : doc.at("members")) ens.members.push_back(detail::encoder_from_json(m, h));
        if (ens.members.empty()) throw InputError("model file: no members");
        return ens;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("model file: ") + e.what());
    }
}

inline void save_ensemble(const Ensemble& ens, const std::filesystem::path& path) {
    io::write_atomic(path, ensemble_to_text(ens));
}

inline Ensemble load_ensemble(const std::filesystem::path& path, const Hierarchy& h) {
    return ensemble_from_text(io::read_text(path), h);
}

} // namespace hts
