#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "esrnn/autodiff.hpp"
#include "esrnn/data.hpp"
#include "esrnn/errors.hpp"
#include "esrnn/fastmath.hpp"

namespace esrnn {

/// Logistic squashing: keeps smoothing coefficients inside (0, 1) while the
/// optimizer works on unconstrained raw values. Saturated values are nudged
/// one representable step off the endpoints so the open-interval invariant
/// survives rounding.
inline double squash(double raw) { return fastmath::logistic(raw); }

/// The 2 + S learnable values owned by one series: level and seasonality
/// smoothing (raw, logistic-squashed) and S initial seasonality values
/// (raw, exp-squashed so they stay positive).
struct PerSeriesParams {
    double alpha_raw = 0.0;
    double gamma_raw = 0.0;
    std::vector<double> init_seasonality_raw;

    explicit PerSeriesParams(int season_length = 1)
        : init_seasonality_raw(static_cast<std::size_t>(season_length), 0.0) {}

    int season_length() const { return static_cast<int>(init_seasonality_raw.size()); }
    double alpha() const { return squash(alpha_raw); }
    double gamma() const { return squash(gamma_raw); }

    std::vector<double> initial_seasonality() const {
        std::vector<double> s(init_seasonality_raw.size());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = fastmath::exp(init_seasonality_raw[i]);
        return s;
    }
};

/// Level and seasonality sequences produced by the trendless recursion.
/// seasonalities[0..S-1] are the initial values; the update computed from
/// observation t lands at index t + S, so the slice t+1 .. t+h needed for
/// re-seasonalizing an h-step forecast is always defined (wrapping whole
/// cycles once past the end of the array).
struct HWState {
    std::vector<double> levels;          // size T
    std::vector<double> seasonalities;   // size T + S
    int season_length = 1;

    double seasonal_at(std::size_t idx) const {
        const std::size_t s = static_cast<std::size_t>(season_length);
        while (idx >= seasonalities.size()) idx -= s;
        return seasonalities[idx];
    }
};

/// Trendless Holt-Winters recursion (the hybrid's pre-processing layer):
///   l_t     = alpha * (y_t / s_t)      + (1 - alpha) * l_{t-1}
///   s_{t+S} = gamma * (y_t / l_{t-1})  + (1 - gamma) * s_t
/// with l_{-1} seeded from the mean of the first S observations.
inline HWState hybrid_primer(std::span<const double> values, const PerSeriesParams& params) {
    const std::size_t s = static_cast<std::size_t>(params.season_length());
    const std::size_t t_len = values.size();
    if (t_len < s)
        throw InsufficientLengthError("hybrid_primer: series length " + std::to_string(t_len) +
                                      " shorter than season length " + std::to_string(s));
    for (std::size_t t = 0; t < t_len; ++t)
        if (!(values[t] > 0.0))
            throw NumericDomainError("hybrid_primer: non-positive observation at t=" + std::to_string(t));

    HWState st;
    st.season_length = static_cast<int>(s);
    st.seasonalities = params.initial_seasonality();
    st.seasonalities.reserve(t_len + s);
    st.levels.reserve(t_len);

    const double alpha = params.alpha();
    const double gamma = params.gamma();
    double l_prev = std::accumulate(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(s), 0.0) /
                    static_cast<double>(s);

    for (std::size_t t = 0; t < t_len; ++t) {
        const double s_t = st.seasonalities[t];
        const double level = alpha * (values[t] / s_t) + (1.0 - alpha) * l_prev;
        if (!(level > 0.0) || !std::isfinite(level))
            throw NumericDomainError("hybrid_primer: non-positive level at t=" + std::to_string(t));
        st.seasonalities.push_back(gamma * (values[t] / l_prev) + (1.0 - gamma) * s_t);
        st.levels.push_back(level);
        l_prev = level;
    }
    return st;
}

/// Classical multiplicative Holt-Winters parameters (with trend).
struct ClassicalHWParams {
    double alpha = 0.5;
    double beta = 0.5;
    double gamma = 0.5;
    double initial_level = 1.0;
    double initial_trend = 1.0;
    std::vector<double> initial_seasonality;
};

/// Full three-equation recursion plus the h-step forecast
///   y_hat_{T+h} = l_T * b_T^h * s_{T - S + ((h-1) mod S) + 1}.
inline std::vector<double> classical_hw_forecast(std::span<const double> values,
                                                 const ClassicalHWParams& p, int h) {
    const std::size_t s = p.initial_seasonality.size();
    const std::size_t t_len = values.size();
    if (s == 0) throw ConfigError("classical_hw_forecast: empty initial seasonality");
    if (t_len < s)
        throw InsufficientLengthError("classical_hw_forecast: series shorter than one season");
    if (h < 1) throw ConfigError("classical_hw_forecast: h must be >= 1");
    for (double c : {p.alpha, p.beta, p.gamma})
        if (!(c >= 0.0 && c <= 1.0))
            throw ConfigError("classical_hw_forecast: smoothing coefficients must lie in [0, 1]");

    // seas[j] holds the seasonal for (1-based) time j - S; the first S entries
    // are the initial values, updates from observation t append at t + S.
    std::vector<double> seas = p.initial_seasonality;
    seas.reserve(t_len + s);
    double level = p.initial_level;
    double trend = p.initial_trend;
    for (std::size_t t = 0; t < t_len; ++t) {
        const double s_tm = seas[t];
        const double lb = level * trend;
        const double level_new = p.alpha * (values[t] / s_tm) + (1.0 - p.alpha) * lb;
        if (!(level_new > 0.0) || !std::isfinite(level_new))
            throw NumericDomainError("classical_hw_forecast: non-positive level at t=" + std::to_string(t));
        const double trend_new = p.beta * (level_new / level) + (1.0 - p.beta) * trend;
        seas.push_back(p.gamma * (values[t] / lb) + (1.0 - p.gamma) * s_tm);
        level = level_new;
        trend = trend_new;
    }

    std::vector<double> forecast(static_cast<std::size_t>(h));
    for (int step = 1; step <= h; ++step) {
        const std::size_t wrapped = static_cast<std::size_t>((step - 1) % static_cast<int>(s)) + 1;
        // 1-based time index T - S + wrapped; the array offset for time j is j + S - 1
        const std::size_t idx = t_len - s + wrapped + s - 1;
        forecast[static_cast<std::size_t>(step - 1)] =
            level * std::pow(trend, static_cast<double>(step)) * seas[idx];
    }
    return forecast;
}

/// x_i = y_i / (l_t * s_i)
inline std::vector<double> deseasonalize_normalize(std::span<const double> window, double level,
                                                   std::span<const double> seasonality) {
    if (window.size() != seasonality.size())
        throw ShapeError("deseasonalize_normalize: window length " + std::to_string(window.size()) +
                         " vs seasonality length " + std::to_string(seasonality.size()));
    if (!(level > 0.0)) throw NumericDomainError("deseasonalize_normalize: level must be positive");
    std::vector<double> out(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) {
        if (!(seasonality[i] > 0.0))
            throw NumericDomainError("deseasonalize_normalize: non-positive seasonality");
        out[i] = window[i] / (level * seasonality[i]);
    }
    return out;
}

/// y_hat_i = r_i * l_t * s_i
inline std::vector<double> reseasonalize_denormalize(std::span<const double> network_output,
                                                     double level,
                                                     std::span<const double> seasonality) {
    if (network_output.size() != seasonality.size())
        throw ShapeError("reseasonalize_denormalize: output length " +
                         std::to_string(network_output.size()) + " vs seasonality length " +
                         std::to_string(seasonality.size()));
    if (!(level > 0.0)) throw NumericDomainError("reseasonalize_denormalize: level must be positive");
    std::vector<double> out(network_output.size());
    for (std::size_t i = 0; i < network_output.size(); ++i)
        out[i] = network_output[i] * level * seasonality[i];
    return out;
}

/// One training sample: a normalized, deseasonalized input window with its
/// category one-hot appended, the matching normalized target window, and the
/// anchor-time level/seasonality needed to undo the transform.
struct Window {
    std::vector<double> input;      // length I + 6
    std::vector<double> target;     // length O
    double level = 0.0;
    std::vector<double> seasonality_in;   // length I
    std::vector<double> seasonality_out;  // length O
    int anchor = 0;                 // 0-based index of the last input observation
};

inline std::vector<Window> window_series(std::span<const double> values, const HWState& state,
                                         const FrequencyProfile& profile,
                                         const std::array<double, 6>& category_onehot) {
    const int i_len = profile.input_window;
    const int o_len = profile.horizon;
    const int t_len = static_cast<int>(values.size());
    if (t_len < i_len + o_len)
        throw InsufficientLengthError("window_series: need at least " + std::to_string(i_len + o_len) +
                                      " values, got " + std::to_string(t_len));
    std::vector<Window> out;
    out.reserve(static_cast<std::size_t>(t_len - o_len - i_len + 1));
    for (int anchor = i_len - 1; anchor <= t_len - o_len - 1; ++anchor) {
        Window w;
        w.anchor = anchor;
        w.level = state.levels[static_cast<std::size_t>(anchor)];
        w.seasonality_in.assign(state.seasonalities.begin() + (anchor - i_len + 1),
                                state.seasonalities.begin() + (anchor + 1));
        w.seasonality_out.assign(state.seasonalities.begin() + (anchor + 1),
                                 state.seasonalities.begin() + (anchor + 1 + o_len));
        w.input = deseasonalize_normalize(values.subspan(static_cast<std::size_t>(anchor - i_len + 1),
                                                         static_cast<std::size_t>(i_len)),
                                          w.level, w.seasonality_in);
        w.input.insert(w.input.end(), category_onehot.begin(), category_onehot.end());
        w.target = deseasonalize_normalize(values.subspan(static_cast<std::size_t>(anchor + 1),
                                                          static_cast<std::size_t>(o_len)),
                                           w.level, w.seasonality_out);
        out.push_back(std::move(w));
    }
    return out;
}

/// Tape form of the state for a batch of series: levels (k, T) and
/// seasonalities (k, T + S), differentiable in the raw parameter leaves.
struct HWTapeState {
    ad::DiffArray levels;
    ad::DiffArray seasonalities;
};

/// Same recursion as hybrid_primer, vectorized across the k rows of `values`
/// and recorded on the tape so gradients reach alpha_raw (k, 1),
/// gamma_raw (k, 1) and init_seasonality_raw (k, S).
inline HWTapeState hybrid_primer_tape(ad::Tape& tape, const Matrix& values, ad::DiffArray alpha_raw,
                                      ad::DiffArray gamma_raw, ad::DiffArray init_seasonality_raw) {
    const std::size_t k = values.rows();
    const std::size_t t_len = values.cols();
    const std::size_t s = init_seasonality_raw.cols();
    if (alpha_raw.rows() != k || gamma_raw.rows() != k || init_seasonality_raw.rows() != k)
        throw ShapeError("hybrid_primer_tape: parameter row count must match series count");
    if (t_len < s) throw InsufficientLengthError("hybrid_primer_tape: series shorter than one season");

    auto alpha = ad::logistic(alpha_raw);
    auto gamma = ad::logistic(gamma_raw);
    auto ones = ad::constant(tape, Matrix(k, 1, 1.0));
    auto one_minus_alpha = ad::sub(ones, alpha);
    auto one_minus_gamma = ad::sub(ones, gamma);
    auto seas_init = ad::exp(init_seasonality_raw);

    std::vector<ad::DiffArray> seas;
    seas.reserve(t_len + s);
    for (std::size_t j = 0; j < s; ++j) seas.push_back(ad::slice_cols(seas_init, j, 1));

    Matrix l0(k, 1);
    for (std::size_t r = 0; r < k; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s; ++j) acc += values(r, j);
        l0(r, 0) = acc / static_cast<double>(s);
    }
    auto level_prev = ad::constant(tape, std::move(l0));

    std::vector<ad::DiffArray> levels;
    levels.reserve(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        Matrix yt(k, 1);
        for (std::size_t r = 0; r < k; ++r) yt(r, 0) = values(r, t);
        auto y = ad::constant(tape, std::move(yt));
        auto level = ad::add(ad::mul(alpha, ad::div(y, seas[t])), ad::mul(one_minus_alpha, level_prev));
        for (double v : level.value().data())
            if (!(v > 0.0) || !std::isfinite(v))
                throw NumericDomainError("hybrid_primer_tape: non-positive level at t=" + std::to_string(t));
        seas.push_back(ad::add(ad::mul(gamma, ad::div(y, level_prev)), ad::mul(one_minus_gamma, seas[t])));
        levels.push_back(level);
        level_prev = level;
    }

    HWTapeState st;
    st.levels = ad::stack_cols(tape, levels);
    st.seasonalities = ad::stack_cols(tape, seas);
    return st;
}

} // namespace esrnn
