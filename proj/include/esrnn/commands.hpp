#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "esrnn/checkpoint.hpp"
#include "esrnn/config.hpp"
#include "esrnn/data.hpp"
#include "esrnn/log.hpp"
#include "esrnn/report.hpp"
#include "esrnn/trainer.hpp"

namespace esrnn {

inline constexpr int kDatasetVersion = 1;

// ---------------------------------------------------------------------------
// Prepared dataset bundle
// ---------------------------------------------------------------------------

inline void save_prepared(const std::string& path, Frequency frequency, int equalized_length,
                          const std::vector<SeriesRecord>& series) {
    nlohmann::json j;
    j["format"] = "esrnn-dataset";
    j["version"] = kDatasetVersion;
    j["frequency"] = to_string(frequency);
    j["equalized_length"] = equalized_length;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : series)
        arr.push_back({{"id", s.id},
                       {"category", to_string(s.category.value_or(Category::Other))},
                       {"values", s.values}});
    j["series"] = std::move(arr);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write dataset bundle \"" + path + "\"");
    out << j.dump() << "\n";
}

inline std::vector<SeriesRecord> load_prepared(const std::string& path, Frequency expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open dataset bundle \"" + path + "\" (run `esrnn prepare` first)");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("dataset bundle \"" + path + "\" is not valid JSON: " + e.what());
    }
    if (j.value("format", "") != "esrnn-dataset" || j.value("version", -1) != kDatasetVersion)
        throw ParseError("\"" + path + "\" is not an esrnn dataset bundle");
    const Frequency freq = parse_frequency(j.at("frequency").get<std::string>());
    if (freq != expected)
        throw ConfigError("dataset bundle holds " + std::string(to_string(freq)) +
                          " series but the configuration selects " + to_string(expected));
    std::vector<SeriesRecord> out;
    for (const auto& js : j.at("series")) {
        SeriesRecord rec;
        rec.id = js.at("id").get<std::string>();
        rec.category = parse_category(js.at("category").get<std::string>());
        rec.frequency = freq;
        rec.values = js.at("values").get<std::vector<double>>();
        out.push_back(std::move(rec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Length statistics (prepare)
// ---------------------------------------------------------------------------

struct LengthStats {
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double q25 = 0.0;
    double q50 = 0.0;
    double q75 = 0.0;
    double max = 0.0;
};

inline LengthStats length_stats(std::vector<std::size_t> lengths) {
    LengthStats st;
    st.count = lengths.size();
    if (lengths.empty()) return st;
    std::sort(lengths.begin(), lengths.end());
    double acc = 0.0;
    for (std::size_t v : lengths) acc += static_cast<double>(v);
    st.mean = acc / static_cast<double>(lengths.size());
    double sq = 0.0;
    for (std::size_t v : lengths) sq += (static_cast<double>(v) - st.mean) * (static_cast<double>(v) - st.mean);
    st.stddev = lengths.size() > 1 ? std::sqrt(sq / static_cast<double>(lengths.size() - 1)) : 0.0;
    auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(lengths.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        if (lo + 1 >= lengths.size()) return static_cast<double>(lengths.back());
        return static_cast<double>(lengths[lo]) * (1.0 - frac) +
               static_cast<double>(lengths[lo + 1]) * frac;
    };
    st.min = static_cast<double>(lengths.front());
    st.q25 = quantile(0.25);
    st.q50 = quantile(0.50);
    st.q75 = quantile(0.75);
    st.max = static_cast<double>(lengths.back());
    return st;
}

namespace detail {

inline void ensure_output_dir(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
}

inline Trainer make_trainer(const RunConfig& cfg) {
    auto records = load_prepared(cfg.prepared_path(), cfg.frequency);
    return Trainer(std::move(records), cfg.profile, cfg.train);
}

inline Trainer make_trainer_with_checkpoint(const RunConfig& cfg) {
    Trainer tr = make_trainer(cfg);
    apply_checkpoint(tr, load_checkpoint(cfg.checkpoint_path()));
    return tr;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void cmd_prepare(const RunConfig& cfg) {
    if (cfg.train_csv.empty() || cfg.info_csv.empty())
        throw ConfigError("prepare: paths.train_csv and paths.info_csv are required");
    std::ifstream train_in(cfg.train_csv);
    if (!train_in) throw Error("cannot open \"" + cfg.train_csv + "\"");
    std::ifstream info_in(cfg.info_csv);
    if (!info_in) throw Error("cannot open \"" + cfg.info_csv + "\"");

    auto series = parse_m4_train_csv(train_in);
    auto info = parse_info_csv(info_in);
    apply_info(series, info);

    std::vector<SeriesRecord> filtered;
    for (auto& s : series)
        if (s.frequency == cfg.frequency) filtered.push_back(std::move(s));

    std::vector<std::size_t> raw_lengths;
    for (const auto& s : filtered) raw_lengths.push_back(s.values.size());
    const LengthStats raw = length_stats(raw_lengths);

    auto kept = equalize_lengths(std::move(filtered), cfg.profile);
    if (kept.empty()) throw ValidationError("no series after filtering");

    detail::ensure_output_dir(cfg);
    save_prepared(cfg.prepared_path(), cfg.frequency, cfg.profile.equalized_length(), kept);

    std::ostringstream table;
    table << "Series length statistics (" << to_string(cfg.frequency) << ", raw input)\n";
    table << std::fixed << std::setprecision(0);
    table << std::left << std::setw(12) << "" << std::right << std::setw(8) << "Mean" << std::setw(10)
          << "Std-Dev" << std::setw(7) << "Min" << std::setw(7) << "25%" << std::setw(7) << "50%"
          << std::setw(7) << "75%" << std::setw(7) << "Max" << "\n";
    table << std::left << std::setw(12) << to_string(cfg.frequency) << std::right << std::setw(8)
          << raw.mean << std::setw(10) << raw.stddev << std::setw(7) << raw.min << std::setw(7)
          << raw.q25 << std::setw(7) << raw.q50 << std::setw(7) << raw.q75 << std::setw(7) << raw.max
          << "\n\n";
    table << "Raw series:       " << raw.count << "\n";
    table << "Kept (length >= " << cfg.profile.equalized_length() << "): " << kept.size() << "\n";
    table << "Dropped:          " << (raw.count - kept.size()) << "\n";
    table << "Equalized length: " << cfg.profile.equalized_length() << "\n";

    std::ofstream stats_txt(cfg.output_dir + "/prepare_stats.txt");
    stats_txt << table.str();
    nlohmann::json stats_json{{"frequency", to_string(cfg.frequency)},
                              {"raw_count", raw.count},
                              {"kept", kept.size()},
                              {"dropped", raw.count - kept.size()},
                              {"equalized_length", cfg.profile.equalized_length()},
                              {"raw_lengths",
                               {{"mean", raw.mean},
                                {"stddev", raw.stddev},
                                {"min", raw.min},
                                {"q25", raw.q25},
                                {"q50", raw.q50},
                                {"q75", raw.q75},
                                {"max", raw.max}}}};
    std::ofstream stats_js(cfg.output_dir + "/prepare_stats.json");
    stats_js << stats_json.dump(1, '\t') << "\n";
    log_info(table.str());
    log_info("wrote " + cfg.prepared_path());
}

inline void cmd_train(const RunConfig& cfg) {
    detail::ensure_output_dir(cfg);
    Trainer tr = detail::make_trainer(cfg);

    const std::string log_path = cfg.output_dir + "/train_log.tsv";
    std::ofstream log(log_path);
    if (!log) throw Error("cannot write \"" + log_path + "\"");
    log << "# epoch\ttrain_pinball\tval_smape\tseconds\n";
    log.flush();

    Checkpoint best = snapshot(tr);
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    double final_train = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> val_history;
    const auto run_start = std::chrono::steady_clock::now();
    int epochs_run = 0;

    for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double train_loss = tr.train_epoch();
        const ValidationResult val = tr.validate();
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::ostringstream line;
        line.precision(17);
        line << epoch << '\t' << train_loss << '\t' << val.mean_smape << '\t' << std::fixed
             << std::setprecision(3) << seconds;
        log << line.str() << "\n";
        log.flush();
        log_info("epoch " + std::to_string(epoch) + "  pinball " + std::to_string(train_loss) +
                 "  val sMAPE " + std::to_string(val.mean_smape));

        final_train = train_loss;
        epochs_run = epoch;
        val_history.push_back(val.mean_smape);
        if (val.mean_smape < best_val) {
            best_val = val.mean_smape;
            best = snapshot(tr);
            best_epoch = epoch;
        }
        if (cfg.train.patience > 0 &&
            early_stop_check(val_history, cfg.train.patience, cfg.train.min_delta)) {
            log_info("early stop after epoch " + std::to_string(epoch));
            break;
        }
    }
    const double total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();

    save_checkpoint(cfg.checkpoint_path(), best);

    const std::string resolved_path = cfg.output_dir + "/resolved_config.cfg";
    std::ofstream resolved(resolved_path);
    resolved << cfg.resolved_text();

    nlohmann::json manifest;
    manifest["format"] = "esrnn-run-manifest";
    manifest["version"] = 1;
    manifest["subcommand"] = "train";
    manifest["seed"] = cfg.train.seed;
    manifest["prepared"] = cfg.prepared_path();
    manifest["input_hash"] = content_hash(cfg.prepared_path());
    manifest["config_text"] = cfg.resolved_text();
    manifest["epochs_requested"] = cfg.train.epochs;
    manifest["epochs_run"] = epochs_run;
    if (epochs_run > 0) {
        manifest["final_train_pinball"] = final_train;
        manifest["best_val_smape"] = best_val;
        manifest["best_epoch"] = best_epoch;
    }
    manifest["total_seconds"] = total_seconds;  // wall clock, not reproducible
    std::ofstream mf(cfg.output_dir + "/manifest.json");
    mf << manifest.dump(1, '\t') << "\n";

    log_info("wrote " + cfg.checkpoint_path());
}

namespace detail {

/// Score forecasts for held-out actuals; in-sample spans everything before
/// the held-out tail.
inline std::vector<SeriesScore> score_forecasts(const Trainer& tr,
                                                const std::vector<std::vector<double>>& forecasts,
                                                bool against_test) {
    std::vector<SeriesScore> rows;
    const int s_len = tr.profile().seasonality_length;
    for (std::size_t i = 0; i < tr.series_count(); ++i) {
        const SeriesRecord& rec = tr.series(i);
        const DatasetSplit& split = tr.split(i);
        const std::vector<double>& actual = against_test ? split.test : split.validation;
        std::vector<double> insample = split.train;
        if (against_test)
            insample.insert(insample.end(), split.validation.begin(), split.validation.end());
        SeriesScore row;
        row.id = rec.id;
        row.category = rec.category.value_or(Category::Other);
        row.frequency = rec.frequency.value_or(tr.profile().frequency);
        row.forecast = forecasts[i];
        row.actual = actual;
        row.smape = smape(actual, forecasts[i]);
        row.mase = mase(insample, actual, forecasts[i], s_len);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

inline void cmd_evaluate(const RunConfig& cfg) {
    detail::ensure_output_dir(cfg);
    Trainer tr = detail::make_trainer_with_checkpoint(cfg);
    const int o_len = cfg.profile.horizon;
    const int s_len = cfg.profile.seasonality_length;

    // Model forecasts anchor at the end of train+validation; the baseline
    // repeats the last seasonal cycle of the same in-sample span.
    ForecastResult model_fc = tr.forecast_at(static_cast<std::size_t>(o_len));
    std::vector<std::vector<double>> naive_fc;
    for (std::size_t i = 0; i < tr.series_count(); ++i) {
        std::vector<double> insample = tr.split(i).train;
        insample.insert(insample.end(), tr.split(i).validation.begin(), tr.split(i).validation.end());
        naive_fc.push_back(seasonal_naive(insample, s_len, o_len));
    }
    EvaluationReport rep = build_report(detail::score_forecasts(tr, model_fc.forecasts, true),
                                        detail::score_forecasts(tr, naive_fc, true));

    const std::string text = format_report_text(rep);
    std::ofstream txt(cfg.output_dir + "/report.txt");
    txt << text;
    std::ofstream csv(cfg.output_dir + "/report.csv");
    write_report_csv(csv, rep);
    std::ofstream js(cfg.output_dir + "/report.json");
    js << report_to_json(rep).dump(1, '\t') << "\n";
    log_info(text);
}

inline void cmd_forecast(const RunConfig& cfg, const std::vector<std::string>& ids) {
    detail::ensure_output_dir(cfg);
    Trainer tr = detail::make_trainer_with_checkpoint(cfg);
    ForecastResult fc = tr.forecast_at(0);

    std::set<std::string> want(ids.begin(), ids.end());
    if (!ids.empty()) {
        std::set<std::string> have(fc.ids.begin(), fc.ids.end());
        std::string missing;
        for (const auto& id : ids)
            if (!have.count(id)) missing += missing.empty() ? id : ", " + id;
        if (!missing.empty()) throw ValidationError("unknown series ids: " + missing);
    }

    const std::string path = cfg.output_dir + "/forecasts.csv";
    std::ofstream out(path);
    if (!out) throw Error("cannot write \"" + path + "\"");
    out << "id";
    for (int j = 1; j <= cfg.profile.horizon; ++j) out << ",step" << j;
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < fc.ids.size(); ++i) {
        if (!ids.empty() && !want.count(fc.ids[i])) continue;
        out << fc.ids[i];
        for (double v : fc.forecasts[i]) out << ',' << v;
        out << "\n";
    }
    log_info("wrote " + path);
}

inline void cmd_benchmark(const RunConfig& cfg) {
    detail::ensure_output_dir(cfg);
    Trainer tr = detail::make_trainer(cfg);
    const BenchmarkReport rep = tr.benchmark_batched_vs_looped();
    nlohmann::json j{{"batched_s", rep.batched_s},
                     {"looped_s", rep.looped_s},
                     {"speedup", rep.speedup},
                     {"batch_size", rep.batch_size},
                     {"n_series", rep.n_series}};
    const std::string path = cfg.output_dir + "/benchmark.json";
    std::ofstream out(path);
    out << j.dump(1, '\t') << "\n";
    std::ostringstream msg;
    msg << "batched " << rep.batched_s << " s/epoch, looped " << rep.looped_s
        << " s/epoch, speedup " << rep.speedup << "x";
    log_info(msg.str());
}

} // namespace esrnn
