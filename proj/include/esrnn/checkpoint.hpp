#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "esrnn/errors.hpp"
#include "esrnn/holt_winters.hpp"
#include "esrnn/network.hpp"
#include "esrnn/trainer.hpp"

namespace esrnn {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.size()) throw CheckpointError("matrix data length does not match its shape");
    m.data() = data;
    return m;
}

} // namespace detail

/// Serialized model: the frequency profile shape, every named network array
/// (row-major) and the 2 + S raw parameters of every series.
struct Checkpoint {
    std::string frequency;
    int seasonality_length = 0;
    int horizon = 0;
    int input_window = 0;
    int hidden_size = 0;
    std::vector<std::vector<int>> dilation_blocks;
    std::map<std::string, Matrix> network;                          // by parameter name
    std::vector<std::pair<std::string, PerSeriesParams>> per_series;  // dataset order
};

inline Checkpoint snapshot(const Trainer& trainer) {
    Checkpoint ck;
    const FrequencyProfile& p = trainer.profile();
    ck.frequency = to_string(p.frequency);
    ck.seasonality_length = p.seasonality_length;
    ck.horizon = p.horizon;
    ck.input_window = p.input_window;
    ck.hidden_size = p.hidden_size;
    ck.dilation_blocks = p.dilation_blocks;
    trainer.weights().for_each_param(
        [&](const std::string& name, const Matrix& m) { ck.network.emplace(name, m); });
    for (std::size_t i = 0; i < trainer.series_count(); ++i)
        ck.per_series.emplace_back(trainer.series(i).id, trainer.per_series_params(i));
    return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    nlohmann::json j;
    j["format"] = "esrnn-checkpoint";
    j["version"] = kCheckpointVersion;
    j["frequency"] = ck.frequency;
    j["seasonality_length"] = ck.seasonality_length;
    j["horizon"] = ck.horizon;
    j["input_window"] = ck.input_window;
    j["hidden_size"] = ck.hidden_size;
    j["dilation_blocks"] = ck.dilation_blocks;
    nlohmann::json net = nlohmann::json::object();
    for (const auto& [name, m] : ck.network) net[name] = detail::matrix_to_json(m);
    j["network"] = std::move(net);
    nlohmann::json series = nlohmann::json::array();
    for (const auto& [id, params] : ck.per_series)
        series.push_back({{"id", id},
                          {"alpha_raw", params.alpha_raw},
                          {"gamma_raw", params.gamma_raw},
                          {"init_seasonality_raw", params.init_seasonality_raw}});
    j["per_series"] = std::move(series);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint \"" + path + "\"");
    out << j.dump(1, '\t') << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint \"" + path + "\"");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("checkpoint \"" + path + "\" is not valid JSON: " + e.what());
    }
    if (j.value("format", "") != "esrnn-checkpoint")
        throw CheckpointError("\"" + path + "\" is not an esrnn checkpoint");
    if (j.value("version", -1) != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version in \"" + path + "\"");
    Checkpoint ck;
    ck.frequency = j.at("frequency").get<std::string>();
    ck.seasonality_length = j.at("seasonality_length").get<int>();
    ck.horizon = j.at("horizon").get<int>();
    ck.input_window = j.at("input_window").get<int>();
    ck.hidden_size = j.at("hidden_size").get<int>();
    ck.dilation_blocks = j.at("dilation_blocks").get<std::vector<std::vector<int>>>();
    for (const auto& [name, jm] : j.at("network").items())
        ck.network.emplace(name, detail::matrix_from_json(jm));
    for (const auto& js : j.at("per_series")) {
        PerSeriesParams p(static_cast<int>(js.at("init_seasonality_raw").size()));
        p.alpha_raw = js.at("alpha_raw").get<double>();
        p.gamma_raw = js.at("gamma_raw").get<double>();
        p.init_seasonality_raw = js.at("init_seasonality_raw").get<std::vector<double>>();
        ck.per_series.emplace_back(js.at("id").get<std::string>(), std::move(p));
    }
    return ck;
}

/// Install checkpoint contents into a trainer built from the same profile.
inline void apply_checkpoint(Trainer& trainer, const Checkpoint& ck) {
    const FrequencyProfile& p = trainer.profile();
    if (ck.frequency != to_string(p.frequency) || ck.seasonality_length != p.seasonality_length ||
        ck.horizon != p.horizon || ck.input_window != p.input_window ||
        ck.hidden_size != p.hidden_size || ck.dilation_blocks != p.dilation_blocks)
        throw CheckpointError("checkpoint profile incompatible with configuration");
    StackWeights w = trainer.weights();
    w.for_each_param([&](const std::string& name, Matrix& m) {
        auto it = ck.network.find(name);
        if (it == ck.network.end())
            throw CheckpointError("checkpoint missing network array \"" + name + "\"");
        if (!it->second.same_shape(m))
            throw CheckpointError("checkpoint array \"" + name + "\" has shape " +
                                  it->second.shape_str() + ", expected " + m.shape_str());
        m = it->second;
    });
    trainer.set_weights(std::move(w));
    std::map<std::string, PerSeriesParams> by_id;
    for (const auto& [id, params] : ck.per_series) by_id.emplace(id, params);
    trainer.set_per_series(by_id);
}

/// FNV-1a over a file's bytes; used for input hashes and determinism checks.
inline std::string content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot hash \"" + path + "\"");
    std::uint64_t h = 1469598103934665603ull;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a:") + hex;
}

} // namespace esrnn
