#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "esrnn/data.hpp"
#include "esrnn/errors.hpp"
#include "esrnn/trainer.hpp"

namespace esrnn {

/// Resolved run configuration: file paths plus the frequency profile and the
/// training settings after defaults and overrides are applied.
struct RunConfig {
    std::string train_csv;
    std::string info_csv;
    std::string output_dir = "out";
    std::string prepared;    // defaults to <output_dir>/prepared.json
    std::string checkpoint;  // defaults to <output_dir>/checkpoint.json

    Frequency frequency = Frequency::Quarterly;
    FrequencyProfile profile = FrequencyProfile::defaults(Frequency::Quarterly);
    TrainConfig train;

    std::string prepared_path() const {
        return prepared.empty() ? output_dir + "/prepared.json" : prepared;
    }
    std::string checkpoint_path() const {
        return checkpoint.empty() ? output_dir + "/checkpoint.json" : checkpoint;
    }

    /// Canonical text form; reparsing it reproduces this configuration.
    std::string resolved_text() const;
};

namespace detail {

inline std::string dilations_to_text(const std::vector<std::vector<int>>& blocks) {
    std::string out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (b) out += ",";
        out += "(";
        for (std::size_t j = 0; j < blocks[b].size(); ++j) {
            if (j) out += ",";
            out += std::to_string(blocks[b][j]);
        }
        out += ")";
    }
    return out;
}

inline std::vector<std::vector<int>> parse_dilations(std::string_view text, const std::string& key) {
    std::vector<std::vector<int>> blocks;
    std::string cleaned;
    for (char c : text)
        if (c != ' ' && c != '\t') cleaned += c;
    std::size_t i = 0;
    while (i < cleaned.size()) {
        if (cleaned[i] == ',') {
            ++i;
            continue;
        }
        if (cleaned[i] != '(') throw ConfigError(key + ": expected '(' in \"" + cleaned + "\"");
        const std::size_t close = cleaned.find(')', i);
        if (close == std::string::npos) throw ConfigError(key + ": unbalanced parentheses");
        std::vector<int> block;
        std::size_t p = i + 1;
        while (p < close) {
            int v = 0;
            auto [ptr, ec] = std::from_chars(cleaned.data() + p, cleaned.data() + close, v);
            if (ec != std::errc()) throw ConfigError(key + ": bad dilation in \"" + cleaned + "\"");
            block.push_back(v);
            p = static_cast<std::size_t>(ptr - cleaned.data());
            if (p < close && cleaned[p] == ',') ++p;
        }
        if (block.empty()) throw ConfigError(key + ": empty dilation block");
        blocks.push_back(std::move(block));
        i = close + 1;
    }
    if (blocks.empty()) throw ConfigError(key + ": no dilation blocks");
    return blocks;
}

inline long parse_int(const std::string& value, const std::string& key) {
    long out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(key + ": \"" + value + "\" is not an integer");
    return out;
}

inline double parse_double(const std::string& value, const std::string& key) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(key + ": \"" + value + "\" is not a number");
    return out;
}

inline bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError(key + ": \"" + value + "\" is not true/false");
}

} // namespace detail

/// Parse the flat sectioned key/value grammar:
///   # comment
///   [section]
///   key = value
/// Unknown sections or keys are rejected. Profile defaults follow the chosen
/// frequency, so [dataset] frequency is applied before [profile] overrides.
inline RunConfig parse_run_config(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::vector<std::string> order;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view s = detail::trim(line);
        if (s.empty() || s.front() == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": malformed section");
            section = std::string(s.substr(1, s.size() - 2));
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = std::string(detail::trim(s.substr(0, eq)));
        std::string value = std::string(detail::trim(s.substr(eq + 1)));
        if (section.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": key outside any section");
        const std::string full = section + "." + key;
        if (kv.count(full)) throw ConfigError("duplicate config key \"" + full + "\"");
        kv[full] = value;
        order.push_back(full);
    }

    RunConfig cfg;
    auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };

    if (auto v = take("dataset.frequency")) cfg.frequency = parse_frequency(*v);
    cfg.profile = FrequencyProfile::defaults(cfg.frequency);

    if (auto v = take("paths.train_csv")) cfg.train_csv = *v;
    if (auto v = take("paths.info_csv")) cfg.info_csv = *v;
    if (auto v = take("paths.output_dir")) cfg.output_dir = *v;
    if (auto v = take("paths.prepared")) cfg.prepared = *v;
    if (auto v = take("paths.checkpoint")) cfg.checkpoint = *v;

    if (auto v = take("profile.seasonality")) cfg.profile.seasonality_length = static_cast<int>(detail::parse_int(*v, "profile.seasonality"));
    if (auto v = take("profile.horizon")) cfg.profile.horizon = static_cast<int>(detail::parse_int(*v, "profile.horizon"));
    if (auto v = take("profile.input_window")) cfg.profile.input_window = static_cast<int>(detail::parse_int(*v, "profile.input_window"));
    if (auto v = take("profile.min_length")) cfg.profile.min_length = static_cast<int>(detail::parse_int(*v, "profile.min_length"));
    if (auto v = take("profile.hidden_size")) cfg.profile.hidden_size = static_cast<int>(detail::parse_int(*v, "profile.hidden_size"));
    if (auto v = take("profile.dilations")) cfg.profile.dilation_blocks = detail::parse_dilations(*v, "profile.dilations");

    if (auto v = take("train.epochs")) cfg.train.epochs = static_cast<int>(detail::parse_int(*v, "train.epochs"));
    if (auto v = take("train.batch_size")) cfg.train.batch_size = static_cast<int>(detail::parse_int(*v, "train.batch_size"));
    if (auto v = take("train.learning_rate_network")) cfg.train.learning_rate_network = detail::parse_double(*v, "train.learning_rate_network");
    if (auto v = take("train.learning_rate_per_series")) cfg.train.learning_rate_per_series = detail::parse_double(*v, "train.learning_rate_per_series");
    if (auto v = take("train.tau")) cfg.train.tau = detail::parse_double(*v, "train.tau");
    if (auto v = take("train.gradient_clip")) {
        if (*v == "none") cfg.train.gradient_clip.reset();
        else cfg.train.gradient_clip = detail::parse_double(*v, "train.gradient_clip");
    }
    if (auto v = take("train.seed")) cfg.train.seed = static_cast<std::uint64_t>(detail::parse_int(*v, "train.seed"));
    if (auto v = take("train.attach_es_state")) cfg.train.attach_es_state = detail::parse_bool(*v, "train.attach_es_state");
    if (auto v = take("train.patience")) cfg.train.patience = static_cast<int>(detail::parse_int(*v, "train.patience"));
    if (auto v = take("train.min_delta")) cfg.train.min_delta = detail::parse_double(*v, "train.min_delta");

    if (!kv.empty()) throw ConfigError("unknown config key \"" + kv.begin()->first + "\"");

    cfg.profile.frequency = cfg.frequency;
    cfg.profile.validate();
    cfg.train.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
    return parse_run_config(in);
}

inline std::string RunConfig::resolved_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "[paths]\n";
    if (!train_csv.empty()) out << "train_csv = " << train_csv << "\n";
    if (!info_csv.empty()) out << "info_csv = " << info_csv << "\n";
    out << "output_dir = " << output_dir << "\n";
    out << "prepared = " << prepared_path() << "\n";
    out << "checkpoint = " << checkpoint_path() << "\n";
    out << "\n[dataset]\n";
    out << "frequency = " << to_string(frequency) << "\n";
    out << "\n[profile]\n";
    out << "seasonality = " << profile.seasonality_length << "\n";
    out << "horizon = " << profile.horizon << "\n";
    out << "input_window = " << profile.input_window << "\n";
    out << "min_length = " << profile.min_length << "\n";
    out << "hidden_size = " << profile.hidden_size << "\n";
    out << "dilations = " << detail::dilations_to_text(profile.dilation_blocks) << "\n";
    out << "\n[train]\n";
    out << "epochs = " << train.epochs << "\n";
    out << "batch_size = " << train.batch_size << "\n";
    out << "learning_rate_network = " << train.learning_rate_network << "\n";
    out << "learning_rate_per_series = " << train.learning_rate_per_series << "\n";
    out << "tau = " << train.tau << "\n";
    if (train.gradient_clip) out << "gradient_clip = " << *train.gradient_clip << "\n";
    else out << "gradient_clip = none\n";
    out << "seed = " << train.seed << "\n";
    out << "attach_es_state = " << (train.attach_es_state ? "true" : "false") << "\n";
    out << "patience = " << train.patience << "\n";
    out << "min_delta = " << train.min_delta << "\n";
    return out.str();
}

} // namespace esrnn
