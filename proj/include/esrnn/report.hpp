#pragma once

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "esrnn/metrics.hpp"

namespace esrnn {

/// Model scores next to the seasonal-naive baseline, row-aligned by series.
struct EvaluationReport {
    std::vector<SeriesScore> model_rows;
    std::vector<SeriesScore> baseline_rows;
    ReportAggregates model;
    ReportAggregates baseline;
};

inline EvaluationReport build_report(std::vector<SeriesScore> model_rows,
                                     std::vector<SeriesScore> baseline_rows) {
    EvaluationReport rep;
    rep.model = aggregate(model_rows);
    rep.baseline = aggregate(baseline_rows);
    rep.model_rows = std::move(model_rows);
    rep.baseline_rows = std::move(baseline_rows);
    return rep;
}

/// Aligned-column text: an sMAPE-by-frequency block, then the per-category
/// breakdown with all six categories plus an Overall row.
inline std::string format_report_text(const EvaluationReport& rep) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);

    out << "sMAPE by frequency\n";
    out << std::left << std::setw(14) << "Frequency" << std::right << std::setw(8) << "Count"
        << std::setw(10) << "Model" << std::setw(10) << "Naive" << "\n";
    for (const auto& [freq, mc] : rep.model.smape_by_frequency) {
        out << std::left << std::setw(14) << freq << std::right << std::setw(8) << mc.count
            << std::setw(10) << mc.mean << std::setw(10)
            << rep.baseline.smape_by_frequency.at(freq).mean << "\n";
    }
    out << std::left << std::setw(14) << "Overall" << std::right << std::setw(8)
        << rep.model.total_series << std::setw(10) << rep.model.overall_smape << std::setw(10)
        << rep.baseline.overall_smape << "\n\n";

    out << "sMAPE and MASE by category\n";
    out << std::left << std::setw(14) << "Category" << std::right << std::setw(8) << "Count"
        << std::setw(10) << "Model" << std::setw(10) << "Naive" << std::setw(12) << "MASE"
        << std::setw(12) << "NaiveMASE" << "\n";
    auto mase_cell = [](const std::map<std::string, MeanCount>& m, const std::string& key) {
        std::ostringstream c;
        c << std::fixed << std::setprecision(3);
        auto it = m.find(key);
        if (it == m.end()) c << "-";
        else c << it->second.mean;
        return c.str();
    };
    for (int ci = 0; ci < kNumCategories; ++ci) {
        const std::string name = kCategoryNames[static_cast<std::size_t>(ci)];
        auto it = rep.model.smape_by_category.find(name);
        out << std::left << std::setw(14) << name << std::right;
        if (it == rep.model.smape_by_category.end()) {
            out << std::setw(8) << 0 << std::setw(10) << "-" << std::setw(10) << "-"
                << std::setw(12) << "-" << std::setw(12) << "-" << "\n";
            continue;
        }
        out << std::setw(8) << it->second.count << std::setw(10) << it->second.mean << std::setw(10)
            << rep.baseline.smape_by_category.at(name).mean << std::setw(12)
            << mase_cell(rep.model.mase_by_category, name) << std::setw(12)
            << mase_cell(rep.baseline.mase_by_category, name) << "\n";
    }
    out << std::left << std::setw(14) << "Overall" << std::right << std::setw(8)
        << rep.model.total_series << std::setw(10) << rep.model.overall_smape << std::setw(10)
        << rep.baseline.overall_smape << std::setw(12)
        << (rep.model.overall_mase ? (std::ostringstream() << std::fixed << std::setprecision(3)
                                                           << *rep.model.overall_mase)
                                         .str()
                                   : std::string("-"))
        << std::setw(12)
        << (rep.baseline.overall_mase ? (std::ostringstream() << std::fixed << std::setprecision(3)
                                                              << *rep.baseline.overall_mase)
                                            .str()
                                      : std::string("-"))
        << "\n";
    if (rep.model.mase_undefined_count > 0)
        out << "\n(" << rep.model.mase_undefined_count
            << " series with undefined MASE excluded from MASE aggregates)\n";
    return out.str();
}

/// One row per series: scores for the model and the baseline.
inline void write_report_csv(std::ostream& out, const EvaluationReport& rep) {
    out << "id,category,frequency,smape,mase,naive_smape,naive_mase\n";
    out.precision(17);
    for (std::size_t i = 0; i < rep.model_rows.size(); ++i) {
        const SeriesScore& m = rep.model_rows[i];
        const SeriesScore& b = rep.baseline_rows[i];
        out << m.id << ',' << to_string(m.category) << ',' << to_string(m.frequency) << ','
            << m.smape << ',';
        if (m.mase) out << *m.mase;
        out << ',' << b.smape << ',';
        if (b.mase) out << *b.mase;
        out << "\n";
    }
}

inline nlohmann::json aggregates_to_json(const ReportAggregates& agg) {
    nlohmann::json j;
    auto block = [](const std::map<std::string, MeanCount>& m) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [key, mc] : m) out[key] = {{"mean", mc.mean}, {"count", mc.count}};
        return out;
    };
    j["smape_by_frequency"] = block(agg.smape_by_frequency);
    j["smape_by_category"] = block(agg.smape_by_category);
    j["mase_by_frequency"] = block(agg.mase_by_frequency);
    j["mase_by_category"] = block(agg.mase_by_category);
    j["overall_smape"] = agg.overall_smape;
    if (agg.overall_mase) j["overall_mase"] = *agg.overall_mase;
    j["total_series"] = agg.total_series;
    j["mase_undefined_count"] = agg.mase_undefined_count;
    return j;
}

inline nlohmann::json report_to_json(const EvaluationReport& rep) {
    return nlohmann::json{{"model", aggregates_to_json(rep.model)},
                          {"seasonal_naive", aggregates_to_json(rep.baseline)}};
}

} // namespace esrnn
