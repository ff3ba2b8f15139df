#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esrnn/data.hpp"
#include "esrnn/errors.hpp"

namespace esrnn {

/// Symmetric MAPE in [0, 200]: (200/h) * sum |y - yhat| / (|y| + |yhat|),
/// with 0/0 terms counted as 0.
inline double smape(std::span<const double> actual, std::span<const double> forecast) {
    if (actual.size() != forecast.size())
        throw ShapeError("smape: length mismatch " + std::to_string(actual.size()) + " vs " +
                         std::to_string(forecast.size()));
    if (actual.empty()) throw ShapeError("smape: empty inputs");
    double acc = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double denom = std::abs(actual[i]) + std::abs(forecast[i]);
        if (denom > 0.0) acc += std::abs(actual[i] - forecast[i]) / denom;
    }
    return 200.0 * acc / static_cast<double>(actual.size());
}

/// MAE of the forecast scaled by the in-sample seasonal-naive MAE. A zero
/// denominator (perfectly periodic in-sample data) yields nullopt; callers
/// exclude such series from aggregates and count them.
inline std::optional<double> mase(std::span<const double> insample, std::span<const double> actual,
                                  std::span<const double> forecast, int season_length) {
    if (actual.size() != forecast.size())
        throw ShapeError("mase: actual/forecast length mismatch");
    if (actual.empty()) throw ShapeError("mase: empty horizon");
    const std::size_t s = static_cast<std::size_t>(season_length);
    if (insample.size() <= s)
        throw InsufficientLengthError("mase: in-sample length must exceed season length");
    double denom = 0.0;
    for (std::size_t t = s; t < insample.size(); ++t) denom += std::abs(insample[t] - insample[t - s]);
    denom /= static_cast<double>(insample.size() - s);
    if (denom == 0.0) return std::nullopt;
    double num = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) num += std::abs(actual[i] - forecast[i]);
    num /= static_cast<double>(actual.size());
    return num / denom;
}

/// Repeat the last observed seasonal cycle: forecast_i = y_{T-S+(i mod S)}.
inline std::vector<double> seasonal_naive(std::span<const double> train, int season_length, int h) {
    const std::size_t s = static_cast<std::size_t>(season_length);
    if (train.size() < s)
        throw InsufficientLengthError("seasonal_naive: train shorter than one season");
    std::vector<double> out(static_cast<std::size_t>(h));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = train[train.size() - s + (i % s)];
    return out;
}

/// Per-series evaluation row.
struct SeriesScore {
    std::string id;
    Category category = Category::Other;
    Frequency frequency = Frequency::Quarterly;
    double smape = 0.0;
    std::optional<double> mase;
    std::vector<double> forecast;
    std::vector<double> actual;
};

struct MeanCount {
    double mean = 0.0;
    std::size_t count = 0;
};

/// Aggregated report: per-category and per-frequency arithmetic means, plus a
/// series-count-weighted overall mean across frequencies.
struct ReportAggregates {
    std::map<std::string, MeanCount> smape_by_category;
    std::map<std::string, MeanCount> smape_by_frequency;
    std::map<std::string, MeanCount> mase_by_category;
    std::map<std::string, MeanCount> mase_by_frequency;
    double overall_smape = 0.0;
    std::optional<double> overall_mase;
    std::size_t total_series = 0;
    std::size_t mase_undefined_count = 0;
};

/// Count-weighted mean of per-group means.
inline double weighted_mean(std::span<const double> means, std::span<const std::size_t> counts) {
    if (means.size() != counts.size() || means.empty())
        throw ShapeError("weighted_mean: need matching non-empty means/counts");
    double acc = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) {
        acc += means[i] * static_cast<double>(counts[i]);
        total += static_cast<double>(counts[i]);
    }
    return acc / total;
}

inline ReportAggregates aggregate(const std::vector<SeriesScore>& rows) {
    if (rows.empty()) throw ContractError("aggregate: no rows");
    ReportAggregates agg;
    agg.total_series = rows.size();
    auto fold = [](std::map<std::string, MeanCount>& m, const std::string& key, double v) {
        MeanCount& mc = m[key];
        mc.mean = (mc.mean * static_cast<double>(mc.count) + v) / static_cast<double>(mc.count + 1);
        mc.count += 1;
    };
    for (const auto& r : rows) {
        fold(agg.smape_by_category, to_string(r.category), r.smape);
        fold(agg.smape_by_frequency, to_string(r.frequency), r.smape);
        if (r.mase) {
            fold(agg.mase_by_category, to_string(r.category), *r.mase);
            fold(agg.mase_by_frequency, to_string(r.frequency), *r.mase);
        } else {
            agg.mase_undefined_count += 1;
        }
    }
    std::vector<double> means;
    std::vector<std::size_t> counts;
    for (const auto& [key, mc] : agg.smape_by_frequency) {
        means.push_back(mc.mean);
        counts.push_back(mc.count);
    }
    agg.overall_smape = weighted_mean(means, counts);
    means.clear();
    counts.clear();
    for (const auto& [key, mc] : agg.mase_by_frequency) {
        means.push_back(mc.mean);
        counts.push_back(mc.count);
    }
    if (!means.empty()) agg.overall_mase = weighted_mean(means, counts);
    return agg;
}

} // namespace esrnn
