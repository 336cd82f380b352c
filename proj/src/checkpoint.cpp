#include "dagcn/checkpoint.hpp"

#include <fstream>

#include "dagcn/run_config.hpp"

namespace dagcn {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "dagcn-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    json params = json::array();
    ck.params.for_each([&](const std::string& name, const Matrix& m) {
        params.push_back({{"name", name},
                          {"rows", m.rows()},
                          {"cols", m.cols()},
                          {"data", std::vector<double>(m.values().begin(), m.values().end())}});
    });
    const json j{{"format", kFormat},
                 {"version", kVersion},
                 {"model", model_config_to_json(ck.config)},
                 {"seed", ck.seed},
                 {"dataset", ck.dataset},
                 {"fold", ck.fold},
                 {"learning_rate", ck.learning_rate},
                 {"test_indices", ck.test_indices},
                 {"test_accuracy", ck.test_accuracy},
                 {"params", params}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << j.dump() << '\n';
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (j.value("format", std::string()) != kFormat || j.value("version", 0) != kVersion) {
        throw FormatError(path.string() + ": not a version " + std::to_string(kVersion) + " checkpoint");
    }
    Checkpoint ck;
    try {
        ck.config = model_config_from_json(j.at("model"));
        ck.config.validate();
        ck.seed = j.at("seed").get<std::uint64_t>();
        ck.dataset = j.at("dataset").get<std::string>();
        ck.fold = j.at("fold").get<std::size_t>();
        ck.learning_rate = j.at("learning_rate").get<double>();
        ck.test_indices = j.at("test_indices").get<std::vector<std::size_t>>();
        ck.test_accuracy = j.at("test_accuracy").get<double>();

        ck.params = zero_params(ck.config);
        const json& params = j.at("params");
        std::size_t i = 0;
        ck.params.for_each([&](const std::string& name, Matrix& m) {
            if (i >= params.size()) throw FormatError(path.string() + ": missing parameter " + name);
            const json& p = params[i++];
            if (p.at("name").get<std::string>() != name || p.at("rows").get<std::size_t>() != m.rows() ||
                p.at("cols").get<std::size_t>() != m.cols()) {
                throw FormatError(path.string() + ": parameter " + p.at("name").get<std::string>() +
                                  " does not match expected " + name + m.shape());
            }
            const auto data = p.at("data").get<std::vector<double>>();
            if (data.size() != m.size()) throw FormatError(path.string() + ": wrong value count for " + name);
            std::copy(data.begin(), data.end(), m.data());
        });
        if (i != params.size()) throw FormatError(path.string() + ": unexpected extra parameters");
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return ck;
}

}  // namespace dagcn
