#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "esrnn/autodiff.hpp"
#include "esrnn/data.hpp"
#include "esrnn/holt_winters.hpp"
#include "esrnn/matrix.hpp"
#include "esrnn/metrics.hpp"
#include "esrnn/network.hpp"

namespace esrnn {

struct TrainConfig {
    int epochs = 15;
    int batch_size = 512;
    double learning_rate_network = 1e-3;
    double learning_rate_per_series = 1e-2;
    double tau = 0.5;
    std::optional<double> gradient_clip = 20.0;
    std::uint64_t seed = 0;
    bool attach_es_state = true;   // false detaches level/seasonality from the loss
    int patience = 0;              // early stopping; 0 disables
    double min_delta = 0.0;

    void validate() const {
        if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
        if (batch_size < 1 || batch_size > 2048)
            throw ConfigError("train: batch_size must be in [1, 2048]");
        if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("train: tau must be in (0, 1)");
        if (learning_rate_network < 0.0 || learning_rate_per_series < 0.0)
            throw ConfigError("train: learning rates must be non-negative");
        if (gradient_clip && *gradient_clip <= 0.0)
            throw ConfigError("train: gradient_clip must be positive");
    }
};

/// A rectangular batch of windows. series_rows/anchors address the trainer's
/// series table; the matrices are filled with the values of the most recent
/// pass, so a consumed batch is inspectable. A mask entry of 0 removes the
/// target from the loss and from every gradient.
struct WindowBatch {
    std::vector<int> series_rows;
    std::vector<int> anchors;
    std::vector<std::string> ids;
    Matrix inputs;                       // (B, I + 6)
    Matrix targets;                      // (B, O), normalized scale
    std::vector<double> anchor_levels;   // B
    Matrix seasonality_slices;           // (B, O)
    Matrix mask;                         // (B, O)

    std::size_t size() const { return series_rows.size(); }
};

/// Masked-mean pinball loss on plain matrices.
inline double pinball_loss(const Matrix& predicted, const Matrix& actual, double tau,
                           const Matrix& mask) {
    require_same_shape(predicted, actual, "pinball_loss");
    require_same_shape(predicted, mask, "pinball_loss mask");
    if (!(tau > 0.0 && tau < 1.0)) throw ContractError("pinball_loss: tau must be in (0, 1)");
    double acc = 0.0, count = 0.0;
    for (std::size_t e = 0; e < predicted.size(); ++e) {
        if (mask.data()[e] == 0.0) continue;
        const double d = actual.data()[e] - predicted.data()[e];
        acc += (d >= 0.0) ? tau * d : (tau - 1.0) * d;
        count += 1.0;
    }
    if (count == 0.0) throw ContractError("pinball_loss: all-zero mask, mean undefined");
    return acc / count;
}

/// Shuffle the window list with the given generator and cut it into
/// rectangular batches; every window appears exactly once.
inline std::vector<WindowBatch> make_batches(std::vector<std::pair<int, int>> windows,
                                             const std::vector<std::string>& series_ids,
                                             int batch_size, int horizon, Rng& rng) {
    if (windows.empty()) throw ContractError("make_batches: no windows");
    if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");
    rng.shuffle(windows);
    std::vector<WindowBatch> out;
    out.reserve(windows.size() / static_cast<std::size_t>(batch_size) + 1);
    for (std::size_t start = 0; start < windows.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(windows.size(), start + static_cast<std::size_t>(batch_size));
        WindowBatch b;
        for (std::size_t i = start; i < stop; ++i) {
            b.series_rows.push_back(windows[i].first);
            b.anchors.push_back(windows[i].second);
            b.ids.push_back(series_ids[static_cast<std::size_t>(windows[i].first)]);
        }
        b.mask = Matrix(b.size(), static_cast<std::size_t>(horizon), 1.0);
        out.push_back(std::move(b));
    }
    return out;
}

/// Stop when the best value has not improved by more than min_delta for
/// `patience` consecutive entries; an improvement of exactly min_delta does
/// not reset the counter. patience <= 0 never stops.
inline bool early_stop_check(const std::vector<double>& history, int patience,
                             double min_delta = 0.0) {
    if (history.empty()) throw ContractError("early_stop_check: empty history");
    if (patience <= 0) return false;
    double best = history[0];
    std::size_t last_improve = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (best - history[i] > min_delta) {
            best = history[i];
            last_improve = i;
        }
    }
    return history.size() - 1 - last_improve >= static_cast<std::size_t>(patience);
}

struct ValidationResult {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> forecasts;   // real scale, length O each
    std::vector<double> smape_per_series;
    double mean_smape = 0.0;
};

struct ForecastResult {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> forecasts;   // real scale, length O each
};

struct BenchmarkReport {
    double batched_s = 0.0;
    double looped_s = 0.0;
    double speedup = 0.0;
    int batch_size = 0;
    int n_series = 0;
};

/// Gradients of one batch, for inspection; no parameters are touched.
struct BatchGradients {
    double loss = 0.0;
    std::map<std::string, Matrix> network;
    struct PerSeries {
        double alpha_raw = 0.0;
        double gamma_raw = 0.0;
        std::vector<double> init_seasonality_raw;
    };
    std::map<std::string, PerSeries> per_series;
};

/// Owns the dataset splits, the shared network weights, the per-series
/// Holt-Winters parameters and their optimizer state, and runs the joint
/// training loop over batched windows.
class Trainer {
public:
    Trainer(std::vector<SeriesRecord> series, FrequencyProfile profile, TrainConfig cfg)
        : profile_(std::move(profile)), cfg_(cfg), rng_(cfg.seed), series_(std::move(series)) {
        profile_.validate();
        cfg_.validate();
        if (series_.empty()) throw ContractError("trainer: no series");

        const std::size_t n = series_.front().values.size();
        for (const auto& s : series_)
            if (s.values.size() != n)
                throw ConfigError("trainer: rectangular batching requires equal series lengths; \"" +
                                  s.id + "\" has " + std::to_string(s.values.size()) +
                                  " values, expected " + std::to_string(n));

        const int o = profile_.horizon;
        splits_.reserve(series_.size());
        for (const auto& s : series_) splits_.push_back(split_train_val_test(s.values, o));
        train_len_ = splits_.front().train.size();
        if (static_cast<int>(train_len_) < profile_.input_window + o)
            throw InsufficientLengthError("trainer: train segment of " + std::to_string(train_len_) +
                                          " cannot hold an input window plus horizon");
        if (train_len_ < static_cast<std::size_t>(profile_.seasonality_length))
            throw InsufficientLengthError("trainer: train segment shorter than one season");

        train_matrix_ = Matrix(series_.size(), train_len_);
        onehots_.reserve(series_.size());
        for (std::size_t r = 0; r < series_.size(); ++r) {
            for (std::size_t t = 0; t < train_len_; ++t) train_matrix_(r, t) = splits_[r].train[t];
            onehots_.push_back(one_hot_category(series_[r].category.value_or(Category::Other)));
        }

        params_.assign(series_.size(), PerSeriesParams(profile_.seasonality_length));
        adam_series_.assign(series_.size(), SeriesAdam(profile_.seasonality_length));

        stack_cfg_.dilation_blocks = profile_.dilation_blocks;
        stack_cfg_.hidden_size = profile_.hidden_size;
        stack_cfg_.input_size = profile_.input_window + kNumCategories;
        stack_cfg_.output_size = o;
        weights_ = init_stack_weights(stack_cfg_, rng_);
        weights_.for_each_param([&](const std::string& name, Matrix& m) {
            adam_net_.emplace(name, AdamState{Matrix(m.rows(), m.cols()), Matrix(m.rows(), m.cols())});
        });
    }

    const FrequencyProfile& profile() const { return profile_; }
    const TrainConfig& config() const { return cfg_; }
    const StackConfig& stack_config() const { return stack_cfg_; }
    StackWeights& weights() { return weights_; }
    const StackWeights& weights() const { return weights_; }
    std::size_t series_count() const { return series_.size(); }
    const SeriesRecord& series(std::size_t i) const { return series_[i]; }
    const DatasetSplit& split(std::size_t i) const { return splits_[i]; }
    PerSeriesParams& per_series_params(std::size_t i) { return params_[i]; }
    const PerSeriesParams& per_series_params(std::size_t i) const { return params_[i]; }

    /// Every (series row, anchor) pair over the train segments, series-major.
    std::vector<std::pair<int, int>> all_windows() const {
        std::vector<std::pair<int, int>> out;
        const int i_len = profile_.input_window;
        const int o_len = profile_.horizon;
        const int t_len = static_cast<int>(train_len_);
        for (std::size_t r = 0; r < series_.size(); ++r)
            for (int a = i_len - 1; a <= t_len - o_len - 1; ++a)
                out.emplace_back(static_cast<int>(r), a);
        return out;
    }

    std::vector<std::string> series_ids() const {
        std::vector<std::string> ids;
        ids.reserve(series_.size());
        for (const auto& s : series_) ids.push_back(s.id);
        return ids;
    }

    /// One pass over all windows, shuffled, updating both the network and the
    /// per-series parameters; returns the mask-weighted mean pinball loss.
    double train_epoch() {
        auto batches = make_batches(all_windows(), series_ids(), cfg_.batch_size, profile_.horizon, rng_);
        double acc = 0.0, weight = 0.0;
        for (auto& b : batches) {
            const StepResult r = step(b, true);
            acc += r.loss * r.mask_count;
            weight += r.mask_count;
        }
        return acc / weight;
    }

    /// Real-scale O-step forecasts anchored at the end of
    /// values[0 .. N - drop_tail): the last in-sample window through the
    /// stack, then re-seasonalized and de-normalized. No gradients recorded.
    ForecastResult forecast_at(std::size_t drop_tail) const {
        const int i_len = profile_.input_window;
        const int o_len = profile_.horizon;
        const std::size_t n_total = series_.front().values.size();
        if (n_total < drop_tail + static_cast<std::size_t>(i_len))
            throw InsufficientLengthError("forecast_at: not enough in-sample data");
        const std::size_t t_ins = n_total - drop_tail;

        ForecastResult out;
        out.ids = series_ids();
        Matrix inputs(series_.size(), static_cast<std::size_t>(stack_cfg_.input_size));
        std::vector<HWState> states;
        states.reserve(series_.size());
        for (std::size_t r = 0; r < series_.size(); ++r) {
            std::span<const double> ins(series_[r].values.data(), t_ins);
            HWState st = hybrid_primer(ins, params_[r]);
            const double level = st.levels.back();
            std::vector<double> seas_in(st.seasonalities.begin() + static_cast<std::ptrdiff_t>(t_ins) - i_len,
                                        st.seasonalities.begin() + static_cast<std::ptrdiff_t>(t_ins));
            auto x = deseasonalize_normalize(ins.subspan(t_ins - static_cast<std::size_t>(i_len)), level,
                                             seas_in);
            for (int c = 0; c < i_len; ++c) inputs(r, static_cast<std::size_t>(c)) = x[static_cast<std::size_t>(c)];
            const auto onehot = onehots_[r];
            for (int c = 0; c < kNumCategories; ++c)
                inputs(r, static_cast<std::size_t>(i_len + c)) = onehot[static_cast<std::size_t>(c)];
            states.push_back(std::move(st));
        }
        Matrix pred = plain::forward_stack({inputs}, weights_, stack_cfg_);
        out.forecasts.reserve(series_.size());
        for (std::size_t r = 0; r < series_.size(); ++r) {
            const HWState& st = states[r];
            const double level = st.levels.back();
            std::vector<double> seas_out(static_cast<std::size_t>(o_len));
            for (int j = 0; j < o_len; ++j)
                seas_out[static_cast<std::size_t>(j)] = st.seasonal_at(t_ins + static_cast<std::size_t>(j));
            std::vector<double> row(static_cast<std::size_t>(o_len));
            for (int j = 0; j < o_len; ++j) row[static_cast<std::size_t>(j)] = pred(r, static_cast<std::size_t>(j));
            out.forecasts.push_back(reseasonalize_denormalize(row, level, seas_out));
        }
        return out;
    }

    /// Forecast from the train segment and score against the validation
    /// segment. Read-only.
    ValidationResult validate() const {
        ForecastResult fr = forecast_at(2 * static_cast<std::size_t>(profile_.horizon));
        ValidationResult v;
        v.ids = fr.ids;
        v.forecasts = std::move(fr.forecasts);
        double acc = 0.0;
        for (std::size_t r = 0; r < series_.size(); ++r) {
            const double s = smape(splits_[r].validation, v.forecasts[r]);
            v.smape_per_series.push_back(s);
            acc += s;
        }
        v.mean_smape = acc / static_cast<double>(series_.size());
        return v;
    }

    /// Gradients for one batch without applying any update.
    BatchGradients batch_gradients(WindowBatch& batch) {
        TapeBuild& tb = tape_build_;
        build_graph(batch, tb);
        tb.tape.backward(tb.loss.id);
        BatchGradients out;
        out.loss = tb.loss.value()(0, 0);
        std::size_t li = 0;
        collect_network_names();
        weights_.for_each_param([&](const std::string& name, Matrix&) {
            out.network.emplace(name, net_leaf_grad(tb, li, name));
            ++li;
        });
        if (cfg_.attach_es_state) {
            const int s_len = profile_.seasonality_length;
            for (std::size_t slot = 0; slot < tb.slot_series.size(); ++slot) {
                BatchGradients::PerSeries g;
                g.alpha_raw = tb.alpha_leaf.grad()(slot, 0);
                g.gamma_raw = tb.gamma_leaf.grad()(slot, 0);
                g.init_seasonality_raw.resize(static_cast<std::size_t>(s_len));
                for (int j = 0; j < s_len; ++j)
                    g.init_seasonality_raw[static_cast<std::size_t>(j)] =
                        tb.seas_leaf.grad()(slot, static_cast<std::size_t>(j));
                out.per_series.emplace(series_[static_cast<std::size_t>(tb.slot_series[slot])].id,
                                       std::move(g));
            }
        }
        return out;
    }

    /// Forward + loss for one batch; nothing is updated.
    double batch_loss(WindowBatch& batch) {
        TapeBuild& tb = tape_build_;
        build_graph(batch, tb);
        return tb.loss.value()(0, 0);
    }

    /// Forward and backward over one fixed-order epoch, once with the
    /// configured batch size and once window-by-window, without optimizer
    /// updates so both paths see identical parameters. Trials are
    /// interleaved (batched epoch, looped epoch, three rounds) and the
    /// fastest epoch per path is kept, so machine-speed drift cancels out of
    /// the ratio. Timing is reported only after the two epoch losses agree
    /// to 1e-6 relative.
    BenchmarkReport benchmark_batched_vs_looped() {
        auto make_batches_of = [&](int batch_size) {
            auto windows = all_windows();
            std::vector<WindowBatch> batches;
            for (std::size_t start = 0; start < windows.size();
                 start += static_cast<std::size_t>(batch_size)) {
                const std::size_t stop =
                    std::min(windows.size(), start + static_cast<std::size_t>(batch_size));
                WindowBatch b;
                for (std::size_t i = start; i < stop; ++i) {
                    b.series_rows.push_back(windows[i].first);
                    b.anchors.push_back(windows[i].second);
                    b.ids.push_back(series_[static_cast<std::size_t>(windows[i].first)].id);
                }
                b.mask = Matrix(b.size(), static_cast<std::size_t>(profile_.horizon), 1.0);
                batches.push_back(std::move(b));
            }
            return batches;
        };
        auto timed_epoch = [&](std::vector<WindowBatch>& batches) {
            const auto t0 = std::chrono::steady_clock::now();
            double acc = 0.0, weight = 0.0;
            for (auto& b : batches) {
                const StepResult r = step(b, false);
                acc += r.loss * r.mask_count;
                weight += r.mask_count;
            }
            const auto t1 = std::chrono::steady_clock::now();
            return std::make_pair(acc / weight, std::chrono::duration<double>(t1 - t0).count());
        };

        auto batched = make_batches_of(cfg_.batch_size);
        auto looped = make_batches_of(1);
        // untimed warm-up so page faults and allocator growth hit neither
        // measured epoch
        step(batched.front(), false);
        step(looped.front(), false);

        double loss_batched = 0.0, loss_looped = 0.0;
        double sec_batched = std::numeric_limits<double>::infinity();
        double sec_looped = std::numeric_limits<double>::infinity();
        for (int round = 0; round < 3; ++round) {
            const auto [lb, sb] = timed_epoch(batched);
            const auto [ll, sl] = timed_epoch(looped);
            loss_batched = lb;
            loss_looped = ll;
            sec_batched = std::min(sec_batched, sb);
            sec_looped = std::min(sec_looped, sl);
        }
        const double rel = std::abs(loss_batched - loss_looped) /
                           std::max(1e-30, std::abs(loss_looped));
        if (rel > 1e-6)
            throw EquivalenceError("benchmark: batched loss " + std::to_string(loss_batched) +
                                   " vs looped " + std::to_string(loss_looped) +
                                   " differ beyond 1e-6; timing withheld");
        BenchmarkReport rep;
        rep.batched_s = sec_batched;
        rep.looped_s = sec_looped;
        rep.speedup = sec_looped / sec_batched;
        rep.batch_size = cfg_.batch_size;
        rep.n_series = static_cast<int>(series_.size());
        return rep;
    }

    void set_weights(StackWeights w) {
        bool ok = w.layers.size() == weights_.layers.size();
        if (ok) {
            std::size_t li = 0;
            w.for_each_param([&](const std::string&, Matrix& m) {
                const Matrix* cur = nullptr;
                std::size_t i = 0;
                weights_.for_each_param([&](const std::string&, Matrix& own) {
                    if (i == li) cur = &own;
                    ++i;
                });
                if (!cur || !cur->same_shape(m)) ok = false;
                ++li;
            });
        }
        if (!ok) throw CheckpointError("checkpoint network shapes incompatible with configuration");
        weights_ = std::move(w);
    }

    void set_per_series(const std::map<std::string, PerSeriesParams>& by_id) {
        for (std::size_t r = 0; r < series_.size(); ++r) {
            auto it = by_id.find(series_[r].id);
            if (it == by_id.end())
                throw CheckpointError("checkpoint missing per-series parameters for \"" +
                                      series_[r].id + "\"");
            if (it->second.season_length() != profile_.seasonality_length)
                throw CheckpointError("checkpoint season length incompatible for \"" + series_[r].id +
                                      "\"");
            params_[r] = it->second;
        }
    }

private:
    struct AdamState {
        Matrix m, v;
    };
    struct SeriesAdam {
        double m_alpha = 0.0, v_alpha = 0.0;
        double m_gamma = 0.0, v_gamma = 0.0;
        std::vector<double> m_seas, v_seas;
        long steps = 0;
        explicit SeriesAdam(int s = 1)
            : m_seas(static_cast<std::size_t>(s), 0.0), v_seas(static_cast<std::size_t>(s), 0.0) {}
    };
    struct StepResult {
        double loss = 0.0;
        double mask_count = 0.0;
    };
    struct TapeBuild {
        ad::Tape tape;
        ad::DiffArray loss;
        std::vector<ad::DiffArray> net_leaves;   // for_each_param order
        ad::DiffArray alpha_leaf, gamma_leaf, seas_leaf;
        std::vector<int> slot_series;            // slot -> series row
        double mask_count = 0.0;
    };

    void collect_network_names() {
        if (!net_names_.empty()) return;
        weights_.for_each_param([&](const std::string& name, Matrix&) { net_names_.push_back(name); });
    }

    static Matrix net_leaf_grad(const TapeBuild& tb, std::size_t index, const std::string&) {
        return tb.net_leaves[index].grad();
    }

    /// Record the whole joint computation for one batch: per-series leaves ->
    /// vectorized Holt-Winters recursion -> gathered window transforms ->
    /// stack -> masked pinball. Fills the batch's materialized matrices.
    void build_graph(WindowBatch& batch, TapeBuild& tb) {
        const int i_len = profile_.input_window;
        const int o_len = profile_.horizon;
        const int s_len = profile_.seasonality_length;
        const std::size_t b_sz = batch.size();
        if (b_sz == 0) throw ContractError("batch: empty");
        if (batch.mask.rows() != b_sz || batch.mask.cols() != static_cast<std::size_t>(o_len))
            throw ShapeError("batch: mask shape " + batch.mask.shape_str());

        // Deduplicate series so each appears once in the vectorized recursion.
        std::vector<int> slot_of_row(series_.size(), -1);
        tb.slot_series.clear();
        for (int row : batch.series_rows) {
            if (slot_of_row[static_cast<std::size_t>(row)] < 0) {
                slot_of_row[static_cast<std::size_t>(row)] = static_cast<int>(tb.slot_series.size());
                tb.slot_series.push_back(row);
            }
        }
        const std::size_t k = tb.slot_series.size();

        Matrix y(k, train_len_);
        Matrix a_raw(k, 1), g_raw(k, 1), s_raw(k, static_cast<std::size_t>(s_len));
        for (std::size_t slot = 0; slot < k; ++slot) {
            const std::size_t row = static_cast<std::size_t>(tb.slot_series[slot]);
            for (std::size_t t = 0; t < train_len_; ++t) y(slot, t) = train_matrix_(row, t);
            a_raw(slot, 0) = params_[row].alpha_raw;
            g_raw(slot, 0) = params_[row].gamma_raw;
            for (int j = 0; j < s_len; ++j)
                s_raw(slot, static_cast<std::size_t>(j)) =
                    params_[row].init_seasonality_raw[static_cast<std::size_t>(j)];
        }

        ad::Tape& tape = tb.tape;
        tape.clear();
        const bool attach = cfg_.attach_es_state;
        tb.alpha_leaf = attach ? ad::leaf(tape, a_raw) : ad::constant(tape, a_raw);
        tb.gamma_leaf = attach ? ad::leaf(tape, g_raw) : ad::constant(tape, g_raw);
        tb.seas_leaf = attach ? ad::leaf(tape, s_raw) : ad::constant(tape, s_raw);
        const HWTapeState hw = hybrid_primer_tape(tape, y, tb.alpha_leaf, tb.gamma_leaf, tb.seas_leaf);

        std::vector<int> rows_in, cols_in, rows_out, cols_out, rows_lvl, cols_lvl;
        rows_in.reserve(b_sz * static_cast<std::size_t>(i_len));
        cols_in.reserve(rows_in.capacity());
        rows_out.reserve(b_sz * static_cast<std::size_t>(o_len));
        cols_out.reserve(rows_out.capacity());
        Matrix y_in(b_sz, static_cast<std::size_t>(i_len));
        Matrix y_out(b_sz, static_cast<std::size_t>(o_len));
        Matrix onehot(b_sz, kNumCategories);
        for (std::size_t b = 0; b < b_sz; ++b) {
            const std::size_t row = static_cast<std::size_t>(batch.series_rows[b]);
            const int slot = slot_of_row[row];
            const int anchor = batch.anchors[b];
            if (anchor < i_len - 1 || anchor > static_cast<int>(train_len_) - o_len - 1)
                throw ShapeError("batch: anchor " + std::to_string(anchor) + " out of range");
            for (int j = 0; j < i_len; ++j) {
                rows_in.push_back(slot);
                cols_in.push_back(anchor - i_len + 1 + j);
                y_in(b, static_cast<std::size_t>(j)) =
                    train_matrix_(row, static_cast<std::size_t>(anchor - i_len + 1 + j));
            }
            for (int j = 0; j < o_len; ++j) {
                rows_out.push_back(slot);
                cols_out.push_back(anchor + 1 + j);
                y_out(b, static_cast<std::size_t>(j)) =
                    train_matrix_(row, static_cast<std::size_t>(anchor + 1 + j));
            }
            rows_lvl.push_back(slot);
            cols_lvl.push_back(anchor);
            const auto oh = onehots_[row];
            for (int c = 0; c < kNumCategories; ++c) onehot(b, static_cast<std::size_t>(c)) = oh[static_cast<std::size_t>(c)];
        }

        auto seas_in = ad::gather(hw.seasonalities, std::move(rows_in), std::move(cols_in), b_sz,
                                  static_cast<std::size_t>(i_len));
        auto seas_out = ad::gather(hw.seasonalities, std::move(rows_out), std::move(cols_out), b_sz,
                                   static_cast<std::size_t>(o_len));
        auto level = ad::gather(hw.levels, std::move(rows_lvl), std::move(cols_lvl), b_sz, 1);

        auto x = ad::div(ad::constant(tape, std::move(y_in)),
                         ad::mul(seas_in, ad::broadcast_col(level, static_cast<std::size_t>(i_len))));
        auto inputs = ad::concat_cols(x, ad::constant(tape, std::move(onehot)));
        auto targets = ad::div(ad::constant(tape, std::move(y_out)),
                               ad::mul(seas_out, ad::broadcast_col(level, static_cast<std::size_t>(o_len))));

        tb.net_leaves.clear();
        StackLeaves leaves = lift_weights(tape, weights_);
        for (const auto& cell : leaves.layers) {
            tb.net_leaves.push_back(cell.w_input);
            tb.net_leaves.push_back(cell.w_recur);
            tb.net_leaves.push_back(cell.bias);
        }
        tb.net_leaves.push_back(leaves.nl_w);
        tb.net_leaves.push_back(leaves.nl_b);
        tb.net_leaves.push_back(leaves.out_w);
        tb.net_leaves.push_back(leaves.out_b);

        auto pred = forward_stack({inputs}, leaves, stack_cfg_);
        tb.loss = ad::pinball(pred, targets, cfg_.tau, batch.mask);

        double count = 0.0;
        for (double m : batch.mask.data()) count += (m != 0.0) ? 1.0 : 0.0;
        tb.mask_count = count;

        batch.inputs = inputs.value();
        batch.targets = targets.value();
        batch.seasonality_slices = seas_out.value();
        batch.anchor_levels.assign(level.value().data().begin(), level.value().data().end());
    }

    StepResult step(WindowBatch& batch, bool update) {
        TapeBuild& tb = tape_build_;
        build_graph(batch, tb);
        const double loss = tb.loss.value()(0, 0);
        tb.tape.backward(tb.loss.id);
        if (update) apply_updates(tb);
        return {loss, tb.mask_count};
    }

    void apply_updates(TapeBuild& tb) {
        double sq_norm = 0.0;
        for (const auto& l : tb.net_leaves)
            for (double g : l.grad().data()) sq_norm += g * g;
        if (cfg_.attach_es_state) {
            for (double g : tb.alpha_leaf.grad().data()) sq_norm += g * g;
            for (double g : tb.gamma_leaf.grad().data()) sq_norm += g * g;
            for (double g : tb.seas_leaf.grad().data()) sq_norm += g * g;
        }
        double scale = 1.0;
        if (cfg_.gradient_clip) {
            const double norm = std::sqrt(sq_norm);
            if (norm > *cfg_.gradient_clip) scale = *cfg_.gradient_clip / norm;
        }

        net_step_ += 1;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(net_step_));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(net_step_));
        std::size_t li = 0;
        weights_.for_each_param([&](const std::string& name, Matrix& param) {
            AdamState& st = adam_net_.at(name);
            const Matrix& grad = tb.net_leaves[li].grad();
            for (std::size_t e = 0; e < param.size(); ++e) {
                const double g = grad.data()[e] * scale;
                st.m.data()[e] = b1 * st.m.data()[e] + (1.0 - b1) * g;
                st.v.data()[e] = b2 * st.v.data()[e] + (1.0 - b2) * g * g;
                param.data()[e] -= cfg_.learning_rate_network * (st.m.data()[e] / bc1) /
                                   (std::sqrt(st.v.data()[e] / bc2) + eps);
            }
            ++li;
        });

        if (!cfg_.attach_es_state) return;
        for (std::size_t slot = 0; slot < tb.slot_series.size(); ++slot) {
            const std::size_t row = static_cast<std::size_t>(tb.slot_series[slot]);
            SeriesAdam& st = adam_series_[row];
            st.steps += 1;
            const double sc1 = 1.0 - std::pow(b1, static_cast<double>(st.steps));
            const double sc2 = 1.0 - std::pow(b2, static_cast<double>(st.steps));
            auto adam = [&](double& param, double& m, double& v, double g) {
                g *= scale;
                m = b1 * m + (1.0 - b1) * g;
                v = b2 * v + (1.0 - b2) * g * g;
                param -= cfg_.learning_rate_per_series * (m / sc1) / (std::sqrt(v / sc2) + eps);
            };
            PerSeriesParams& p = params_[row];
            adam(p.alpha_raw, st.m_alpha, st.v_alpha, tb.alpha_leaf.grad()(slot, 0));
            adam(p.gamma_raw, st.m_gamma, st.v_gamma, tb.gamma_leaf.grad()(slot, 0));
            for (std::size_t j = 0; j < p.init_seasonality_raw.size(); ++j)
                adam(p.init_seasonality_raw[j], st.m_seas[j], st.v_seas[j],
                     tb.seas_leaf.grad()(slot, j));
        }
    }

    FrequencyProfile profile_;
    TrainConfig cfg_;
    StackConfig stack_cfg_;
    Rng rng_;
    std::vector<SeriesRecord> series_;
    std::vector<DatasetSplit> splits_;
    std::size_t train_len_ = 0;
    Matrix train_matrix_;
    std::vector<std::array<double, 6>> onehots_;
    std::vector<PerSeriesParams> params_;
    StackWeights weights_;
    std::map<std::string, AdamState> adam_net_;
    std::vector<SeriesAdam> adam_series_;
    std::vector<std::string> net_names_;
    long net_step_ = 0;
    TapeBuild tape_build_;
};

} // namespace esrnn
