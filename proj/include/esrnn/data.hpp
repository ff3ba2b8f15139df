#pragma once

#include <array>
#include <charconv>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "esrnn/errors.hpp"

namespace esrnn {

enum class Category { Demographic, Finance, Industry, Macro, Micro, Other };
enum class Frequency { Yearly, Quarterly, Monthly };

inline constexpr int kNumCategories = 6;

inline constexpr std::array<const char*, 6> kCategoryNames = {
    "Demographic", "Finance", "Industry", "Macro", "Micro", "Other"};

inline const char* to_string(Category c) { return kCategoryNames[static_cast<int>(c)]; }

inline const char* to_string(Frequency f) {
    switch (f) {
        case Frequency::Yearly: return "Yearly";
        case Frequency::Quarterly: return "Quarterly";
        case Frequency::Monthly: return "Monthly";
    }
    return "?";
}

inline Category parse_category(std::string_view s) {
    for (int i = 0; i < kNumCategories; ++i)
        if (s == kCategoryNames[static_cast<std::size_t>(i)]) return static_cast<Category>(i);
    throw ValidationError("unknown category \"" + std::string(s) + "\"");
}

inline Frequency parse_frequency(std::string_view s) {
    if (s == "Yearly") return Frequency::Yearly;
    if (s == "Quarterly") return Frequency::Quarterly;
    if (s == "Monthly") return Frequency::Monthly;
    throw ValidationError("unknown frequency \"" + std::string(s) + "\"");
}

/// One univariate series. Category/frequency are unset until joined with the
/// info file; values are strictly positive (multiplicative model).
struct SeriesRecord {
    std::string id;
    std::optional<Category> category;
    std::optional<Frequency> frequency;
    std::vector<double> values;
};

/// Per-frequency configuration of the pipeline and the network.
struct FrequencyProfile {
    Frequency frequency = Frequency::Quarterly;
    int seasonality_length = 4;              // S, periods per cycle
    int horizon = 8;                         // O, forecast steps
    int input_window = 12;                   // I
    std::vector<std::vector<int>> dilation_blocks = {{1, 2}, {4, 8}};
    int hidden_size = 40;
    int min_length = 72;                     // C, minimum train length

    static FrequencyProfile defaults(Frequency f) {
        FrequencyProfile p;
        p.frequency = f;
        switch (f) {
            case Frequency::Yearly:
                p.seasonality_length = 1;
                p.horizon = 6;
                p.input_window = 6;
                p.dilation_blocks = {{1, 2}, {2, 6}};
                p.hidden_size = 30;
                p.min_length = 13;  // 2*horizon + 1, the legal minimum
                break;
            case Frequency::Quarterly:
                p.seasonality_length = 4;
                p.horizon = 8;
                p.input_window = 12;
                p.dilation_blocks = {{1, 2}, {4, 8}};
                p.hidden_size = 40;
                p.min_length = 72;
                break;
            case Frequency::Monthly:
                p.seasonality_length = 12;
                p.horizon = 18;
                p.input_window = 24;
                p.dilation_blocks = {{1, 3}, {6, 12}};
                p.hidden_size = 50;
                p.min_length = 72;
                break;
        }
        return p;
    }

    void validate() const {
        if (seasonality_length < 1) throw ConfigError("profile: seasonality must be >= 1");
        if (horizon < 1) throw ConfigError("profile: horizon must be >= 1");
        if (input_window < seasonality_length)
            throw ConfigError("profile: input_window must cover at least one season");
        if (dilation_blocks.empty()) throw ConfigError("profile: dilation blocks must be non-empty");
        for (const auto& block : dilation_blocks) {
            if (block.empty()) throw ConfigError("profile: empty dilation block");
            for (int d : block)
                if (d < 1) throw ConfigError("profile: dilations must be strictly positive");
        }
        if (hidden_size < 1) throw ConfigError("profile: hidden_size must be >= 1");
        if (min_length < 1) throw ConfigError("profile: min_length must be >= 1");
    }

    /// Total equalized length: train segment C plus the 2*O held-out tail.
    int equalized_length() const { return min_length + 2 * horizon; }
};

/// Train / validation / test partition of one series. Validation and test
/// both have exactly `horizon` entries; concatenation restores the input.
struct DatasetSplit {
    std::vector<double> train;
    std::vector<double> validation;
    std::vector<double> test;
};

inline DatasetSplit split_train_val_test(const std::vector<double>& values, int horizon) {
    const std::size_t n = values.size();
    const std::size_t o = static_cast<std::size_t>(horizon);
    if (n < 2 * o + 1)
        throw InsufficientLengthError("split: need at least " + std::to_string(2 * o + 1) +
                                      " values, got " + std::to_string(n));
    DatasetSplit s;
    s.train.assign(values.begin(), values.end() - 2 * static_cast<std::ptrdiff_t>(o));
    s.validation.assign(values.end() - 2 * static_cast<std::ptrdiff_t>(o),
                        values.end() - static_cast<std::ptrdiff_t>(o));
    s.test.assign(values.end() - static_cast<std::ptrdiff_t>(o), values.end());
    return s;
}

inline DatasetSplit split_train_val_test(const SeriesRecord& record, int horizon) {
    return split_train_val_test(record.values, horizon);
}

/// Drop series shorter than C + 2*O; truncate survivors to their last C + 2*O
/// values. Idempotent.
inline std::vector<SeriesRecord> equalize_lengths(std::vector<SeriesRecord> series,
                                                  const FrequencyProfile& profile) {
    const std::size_t target = static_cast<std::size_t>(profile.equalized_length());
    std::vector<SeriesRecord> kept;
    kept.reserve(series.size());
    for (auto& s : series) {
        if (s.values.size() < target) continue;
        if (s.values.size() > target)
            s.values.erase(s.values.begin(),
                           s.values.end() - static_cast<std::ptrdiff_t>(target));
        kept.push_back(std::move(s));
    }
    return kept;
}

inline std::array<double, 6> one_hot_category(Category c) {
    std::array<double, 6> v{};
    v[static_cast<std::size_t>(c)] = 1.0;
    return v;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            cells.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return cells;
}

inline double parse_number(std::string_view cell, const std::string& row_id, std::size_t column) {
    double out = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw ParseError("row " + row_id + ", column " + std::to_string(column) +
                         ": \"" + std::string(cell) + "\" is not a number");
    return out;
}

} // namespace detail

/// M4 training file: header row, then one series per row — id followed by
/// comma-separated values, read left to right until the first empty cell.
inline std::vector<SeriesRecord> parse_m4_train_csv(std::istream& in) {
    std::vector<SeriesRecord> out;
    std::set<std::string> seen;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        SeriesRecord rec;
        rec.id = std::string(cells[0]);
        if (rec.id.empty()) throw ParseError("data row with empty id");
        if (!seen.insert(rec.id).second) throw ValidationError("duplicate id \"" + rec.id + "\"");
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (cells[c].empty()) break;
            const double v = detail::parse_number(cells[c], rec.id, c + 1);
            if (!(v > 0.0))
                throw ValidationError("row " + rec.id + ", column " + std::to_string(c + 1) +
                                      ": values must be strictly positive, got " +
                                      std::string(cells[c]));
            rec.values.push_back(v);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline void write_m4_train_csv(std::ostream& out, const std::vector<SeriesRecord>& series) {
    std::size_t max_len = 0;
    for (const auto& s : series) max_len = std::max(max_len, s.values.size());
    out << "V1";
    for (std::size_t i = 1; i < max_len; ++i) out << ",V" << (i + 1);
    out << "\n";
    out.precision(17);
    for (const auto& s : series) {
        out << s.id;
        for (double v : s.values) out << ',' << v;
        out << "\n";
    }
}

/// Companion info file: header row, then id, category, frequency per row.
/// Column positions are taken from the header when it names them (id/M4id,
/// category, Frequency/SP), otherwise the first three columns are used.
inline std::map<std::string, std::pair<Category, Frequency>> parse_info_csv(std::istream& in) {
    std::map<std::string, std::pair<Category, Frequency>> out;
    std::string line;
    bool header = true;
    std::size_t id_col = 0, cat_col = 1, freq_col = 2;
    while (std::getline(in, line)) {
        auto cells = detail::split_csv_line(line);
        if (header) {
            header = false;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (cells[i] == "M4id" || cells[i] == "id") id_col = i;
                else if (cells[i] == "category" || cells[i] == "Category") cat_col = i;
                else if (cells[i] == "SP") freq_col = i;
            }
            continue;
        }
        if (detail::trim(line).empty()) continue;
        const std::size_t need = std::max({id_col, cat_col, freq_col});
        if (cells.size() <= need)
            throw ParseError("info row \"" + line + "\": expected at least " +
                             std::to_string(need + 1) + " columns");
        std::string id(cells[id_col]);
        if (out.count(id)) throw ValidationError("duplicate id \"" + id + "\" in info file");
        out.emplace(std::move(id),
                    std::make_pair(parse_category(cells[cat_col]), parse_frequency(cells[freq_col])));
    }
    return out;
}

/// Join series with their info rows; every series id must be present.
inline void apply_info(std::vector<SeriesRecord>& series,
                       const std::map<std::string, std::pair<Category, Frequency>>& info) {
    for (auto& s : series) {
        auto it = info.find(s.id);
        if (it == info.end()) throw ValidationError("series \"" + s.id + "\" missing from info file");
        s.category = it->second.first;
        s.frequency = it->second.second;
    }
}

} // namespace esrnn
