#include "dagcn/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace dagcn {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where, const std::set<std::string>& known) {
    if (!j.is_object()) throw ConfigError("config key '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

template <class T>
void read(const json& j, const std::string& where, const char* key, T& out) {
    if (!j.contains(key)) return;
    const std::string path = where.empty() ? key : where + "." + key;
    try {
        const json& v = j.at(key);
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError("");
        }
        out = v.get<T>();
    } catch (const std::exception&) {
        throw ConfigError("config key '" + path + "' has the wrong type");
    }
}

}  // namespace

std::string_view to_string(FeatureScheme s) noexcept {
    switch (s) {
        case FeatureScheme::Auto: return "auto";
        case FeatureScheme::OneHot: return "one-hot";
        case FeatureScheme::Degree: return "degree";
    }
    return "auto";
}

FeatureScheme parse_feature_scheme(std::string_view s) {
    if (s == "auto") return FeatureScheme::Auto;
    if (s == "one-hot") return FeatureScheme::OneHot;
    if (s == "degree") return FeatureScheme::Degree;
    throw ConfigError("unknown feature scheme '" + std::string(s) + "' (expected auto, one-hot or degree)");
}

json model_config_to_json(const ModelConfig& m) {
    return json{{"k", m.k},
                {"m", m.m},
                {"hidden", m.hidden},
                {"r", m.r},
                {"num_classes", m.num_classes},
                {"feature_dim", m.feature_dim},
                {"nonlinearity", std::string(to_string(m.nonlinearity))},
                {"hop_attention", std::string(to_string(m.hop_attention))}};
}

ModelConfig model_config_from_json(const json& j, const std::string& where) {
    reject_unknown(j, where, {"k", "m", "hidden", "r", "num_classes", "feature_dim", "nonlinearity", "hop_attention"});
    ModelConfig m;
    read(j, where, "k", m.k);
    read(j, where, "m", m.m);
    read(j, where, "hidden", m.hidden);
    read(j, where, "r", m.r);
    read(j, where, "num_classes", m.num_classes);
    read(j, where, "feature_dim", m.feature_dim);
    std::string s;
    if (j.contains("nonlinearity")) {
        read(j, where, "nonlinearity", s);
        m.nonlinearity = parse_nonlinearity(s);
    }
    if (j.contains("hop_attention")) {
        read(j, where, "hop_attention", s);
        m.hop_attention = parse_hop_attention(s);
    }
    return m;
}

json train_config_to_json(const TrainConfig& t) {
    return json{{"learning_rate", t.learning_rate}, {"l2", t.l2},         {"batch_size", t.batch_size},
                {"epochs", t.epochs},               {"folds", t.folds},   {"seed", t.seed},
                {"lr_grid", t.lr_grid},             {"grid_epochs", t.grid_epochs}};
}

json run_config_to_json(const RunConfig& c) {
    json model = model_config_to_json(c.train.model);
    model.erase("num_classes");   // derived from the dataset
    model.erase("feature_dim");
    return json{{"dataset",
                 {{"path", c.dataset_dir.string()},
                  {"name", c.dataset_name},
                  {"features", std::string(to_string(c.load.scheme))},
                  {"degree_cap", c.load.degree_cap}}},
                {"output", c.output_dir.string()},
                {"jobs", c.jobs},
                {"train", train_config_to_json(c.train)},
                {"model", model}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    if (j.is_null()) return c;
    reject_unknown(j, "", {"dataset", "output", "jobs", "train", "model"});
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        reject_unknown(d, "dataset", {"path", "name", "features", "degree_cap"});
        std::string s;
        if (d.contains("path")) {
            read(d, "dataset", "path", s);
            c.dataset_dir = s;
        }
        read(d, "dataset", "name", c.dataset_name);
        if (d.contains("features")) {
            read(d, "dataset", "features", s);
            c.load.scheme = parse_feature_scheme(s);
        }
        read(d, "dataset", "degree_cap", c.load.degree_cap);
    }
    if (j.contains("output")) {
        std::string s;
        read(j, "", "output", s);
        c.output_dir = s;
    }
    read(j, "", "jobs", c.jobs);
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t, "train",
                       {"learning_rate", "l2", "batch_size", "epochs", "folds", "seed", "lr_grid", "grid_epochs"});
        read(t, "train", "learning_rate", c.train.learning_rate);
        read(t, "train", "l2", c.train.l2);
        read(t, "train", "batch_size", c.train.batch_size);
        read(t, "train", "epochs", c.train.epochs);
        read(t, "train", "folds", c.train.folds);
        read(t, "train", "seed", c.train.seed);
        if (t.contains("lr_grid")) {
            const json& g = t.at("lr_grid");
            if (!g.is_array()) throw ConfigError("config key 'train.lr_grid' has the wrong type");
            c.train.lr_grid.clear();
            for (const json& v : g) {
                if (!v.is_number()) throw ConfigError("config key 'train.lr_grid' has the wrong type");
                c.train.lr_grid.push_back(v.get<double>());
            }
        }
        read(t, "train", "grid_epochs", c.train.grid_epochs);
    }
    if (j.contains("model")) c.train.model = model_config_from_json(j.at("model"), "model");
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return RunConfig{};
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << run_config_to_json(config).dump(2) << '\n';
}

}  // namespace dagcn
