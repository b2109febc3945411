#pragma once

#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "asac/lstm.hpp"

namespace asac {

// Checkpoints are JSON: a metadata object plus a flat list of
// {name, shape, values} records. Doubles survive a save/load round trip
// value-exactly (the serializer emits shortest exact representations).

namespace detail {

inline nlohmann::json params_to_json(const std::vector<std::pair<std::string, const RealArray*>>& params) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [name, arr] : params) {
        nlohmann::json rec;
        rec["name"] = name;
        rec["shape"] = arr->shape;
        rec["values"] = arr->data;
        list.push_back(std::move(rec));
    }
    return list;
}

inline std::map<std::string, RealArray> params_from_json(const nlohmann::json& list) {
    std::map<std::string, RealArray> out;
    for (const auto& rec : list) {
        Shape shape = rec.at("shape").get<Shape>();
        std::vector<double> values = rec.at("values").get<std::vector<double>>();
        out.emplace(rec.at("name").get<std::string>(), RealArray(std::move(shape), std::move(values)));
    }
    return out;
}

inline nlohmann::json load_checkpoint_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("checkpoint: cannot open '" + path + "'");
    nlohmann::json doc;
    in >> doc;
    if (doc.value("format", "") != "asac-checkpoint-v1")
        throw Error("checkpoint: '" + path + "' is not an asac checkpoint");
    return doc;
}

inline void write_json_file(const std::string& path, const nlohmann::json& doc) {
    std::ofstream out(path);
    if (!out) throw Error("checkpoint: cannot write '" + path + "'");
    out << doc.dump(2) << '\n';
}

template <typename Model>
inline void restore_params(Model& model, const nlohmann::json& doc, const std::string& path) {
    auto stored = params_from_json(doc.at("params"));
    for (auto& [name, arr] : named_params(model)) {
        auto it = stored.find(name);
        if (it == stored.end()) throw Error("checkpoint: '" + path + "' is missing parameter '" + name + "'");
        if (it->second.shape != arr->shape)
            throw Error("checkpoint: parameter '" + name + "' has shape " + shape_str(it->second.shape) +
                        ", expected " + shape_str(arr->shape));
        *arr = it->second;
    }
}

}  // namespace detail

inline void save_predictor(const std::string& path, const PredictorModel& m) {
    nlohmann::json doc;
    doc["format"] = "asac-checkpoint-v1";
    doc["meta"] = {{"kind", "predictor"},
                   {"feature_dim", m.feature_dim},
                   {"hidden", m.cell.hidden_size},
                   {"task", m.task == Task::classification ? "classification" : "regression"},
                   {"classes", m.classes},
                   {"head_layers", m.head.size()}};
    doc["params"] = detail::params_to_json(named_params(m));
    detail::write_json_file(path, doc);
}

inline void save_selector(const std::string& path, const SelectorModel& m) {
    nlohmann::json doc;
    doc["format"] = "asac-checkpoint-v1";
    doc["meta"] = {{"kind", "selector"},
                   {"feature_dim", m.feature_dim},
                   {"hidden", m.cell.hidden_size},
                   {"head_layers", m.head.size()}};
    doc["params"] = detail::params_to_json(named_params(m));
    detail::write_json_file(path, doc);
}

inline PredictorModel load_predictor(const std::string& path) {
    nlohmann::json doc = detail::load_checkpoint_file(path);
    const auto& meta = doc.at("meta");
    if (meta.value("kind", "") != "predictor") throw Error("checkpoint: '" + path + "' is not a predictor");
    PredictorDims dims;
    dims.feature_dim = meta.at("feature_dim").get<std::size_t>();
    dims.hidden = meta.at("hidden").get<std::size_t>();
    dims.task = meta.at("task").get<std::string>() == "classification" ? Task::classification : Task::regression;
    dims.classes = meta.at("classes").get<std::size_t>();
    if (dims.task == Task::regression) dims.classes = 0;
    dims.head_hidden = 0;
    PredictorModel m = make_predictor(dims.task == Task::classification
                                          ? dims
                                          : PredictorDims{dims.feature_dim, dims.hidden, 0, dims.task, 0},
                                      0, InitScheme::zeros);
    if (meta.at("head_layers").get<std::size_t>() == 2) {
        // Rebuild the two-layer head with the stored hidden width.
        auto stored = detail::params_from_json(doc.at("params"));
        std::size_t head_hidden = stored.at("head.0.b").size();
        m = make_predictor({dims.feature_dim, dims.hidden, head_hidden, dims.task, dims.classes}, 0,
                           InitScheme::zeros);
    }
    detail::restore_params(m, doc, path);
    return m;
}

inline SelectorModel load_selector(const std::string& path) {
    nlohmann::json doc = detail::load_checkpoint_file(path);
    const auto& meta = doc.at("meta");
    if (meta.value("kind", "") != "selector") throw Error("checkpoint: '" + path + "' is not a selector");
    SelectorDims dims;
    dims.feature_dim = meta.at("feature_dim").get<std::size_t>();
    dims.hidden = meta.at("hidden").get<std::size_t>();
    dims.head_hidden = 0;
    if (meta.at("head_layers").get<std::size_t>() == 2) {
        auto stored = detail::params_from_json(doc.at("params"));
        dims.head_hidden = stored.at("head.0.b").size();
    }
    SelectorModel m = make_selector(dims, 0, InitScheme::zeros);
    detail::restore_params(m, doc, path);
    return m;
}

}  // namespace asac
