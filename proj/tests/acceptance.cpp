// Acceptance suite: one self-contained check per criterion, each printing a
// single [PASS]/[FAIL] line. Run with no arguments for all criteria or with a
// number (1-9) for one.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "esrnn/checkpoint.hpp"
#include "esrnn/commands.hpp"
#include "esrnn/config.hpp"
#include "esrnn/holt_winters.hpp"
#include "esrnn/metrics.hpp"
#include "esrnn/network.hpp"
#include "esrnn/trainer.hpp"
#include "helpers.hpp"

using namespace esrnn;
namespace ad = esrnn::ad;
using testutil::BuiltGraph;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// 1. Classical Holt-Winters against a literal reference transcription
// ---------------------------------------------------------------------------
Outcome criterion_hw_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const int s = (rep % 3 == 0) ? 1 : ((rep % 3 == 1) ? 4 : 12);
        const int lo = std::max(8, s);
        const int n = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(41 - lo)));
        std::vector<double> y;
        for (int t = 0; t < n; ++t) y.push_back(rng.uniform(2.0, 50.0));
        ClassicalHWParams p;
        p.alpha = rng.uniform(0.02, 0.98);
        p.beta = rng.uniform(0.02, 0.98);
        p.gamma = rng.uniform(0.02, 0.98);
        p.initial_level = rng.uniform(2.0, 50.0);
        p.initial_trend = rng.uniform(0.9, 1.1);
        for (int j = 0; j < s; ++j) p.initial_seasonality.push_back(rng.uniform(0.6, 1.5));
        const int h = 1 + static_cast<int>(rng.below(18));
        auto got = classical_hw_forecast(y, p, h);
        auto ref = testutil::hw_reference_forecast(y, p.alpha, p.beta, p.gamma, p.initial_level,
                                                   p.initial_trend, p.initial_seasonality, h);
        for (std::size_t i = 0; i < got.size(); ++i)
            worst = std::max(worst, testutil::rel_err(got[i], ref[i]));
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream d;
    d << "worst rel err " << worst << " over 1000 instances in " << sec << " s";
    return {worst <= 1e-10 && sec < 10.0, d.str()};
}

// ---------------------------------------------------------------------------
// 2. Gradient suite: primitives 1e-6, cell/stack 1e-4, joint pipeline 1e-3
// ---------------------------------------------------------------------------
Outcome criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream d;
    bool pass = true;
    Rng rng(201);
    auto rand_m = [&](std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
        Matrix m(r, c);
        for (double& v : m.data()) v = rng.uniform(lo, hi);
        return m;
    };
    auto weighted = [](ad::DiffArray out, std::uint64_t seed) {
        Rng wrng(seed);
        Matrix w(out.rows(), out.cols());
        for (double& v : w.data()) v = wrng.uniform(-1.0, 1.0);
        return ad::sum(ad::mul(out, ad::constant(*out.tape, w)));
    };

    // primitives
    {
        double worst = 0.0;
        {
            Matrix a0 = rand_m(3, 4, 0.4, 2.0), b0 = rand_m(3, 4, 0.4, 2.0);
            using Binary = ad::DiffArray (*)(ad::DiffArray, ad::DiffArray);
            for (Binary op : {static_cast<Binary>(ad::add), static_cast<Binary>(ad::sub),
                              static_cast<Binary>(ad::mul), static_cast<Binary>(ad::div)}) {
                auto build = [&](ad::Tape& t) -> BuiltGraph {
                    auto a = ad::leaf(t, a0);
                    auto b = ad::leaf(t, b0);
                    return {weighted(op(a, b), 7), {a, b}};
                };
                worst = std::max(worst, testutil::max_grad_rel_err(build, {&a0, &b0}));
            }
        }
        {
            Matrix a0 = rand_m(2, 5, 0.3, 1.8);
            using Unary = std::function<ad::DiffArray(ad::DiffArray)>;
            std::vector<Unary> ops = {
                [](ad::DiffArray a) { return ad::logistic(a); },
                [](ad::DiffArray a) { return ad::tanh(a); },
                [](ad::DiffArray a) { return ad::exp(a); },
                [](ad::DiffArray a) { return ad::log(a); },
                [](ad::DiffArray a) { return ad::pow_const(a, 1.7); },
            };
            for (const auto& op : ops) {
                auto build = [&](ad::Tape& t) -> BuiltGraph {
                    auto a = ad::leaf(t, a0);
                    return {weighted(op(a), 9), {a}};
                };
                worst = std::max(worst, testutil::max_grad_rel_err(build, {&a0}));
            }
        }
        {
            Matrix a0 = rand_m(3, 4), b0 = rand_m(4, 2);
            auto build = [&](ad::Tape& t) -> BuiltGraph {
                auto a = ad::leaf(t, a0);
                auto b = ad::leaf(t, b0);
                return {weighted(ad::matmul(a, b), 11), {a, b}};
            };
            worst = std::max(worst, testutil::max_grad_rel_err(build, {&a0, &b0}));
        }
        {
            Matrix a0 = rand_m(3, 2), b0 = rand_m(3, 3), r0 = rand_m(1, 4), c0 = rand_m(3, 1),
                   s0 = rand_m(1, 1);
            auto build = [&](ad::Tape& t) -> BuiltGraph {
                auto a = ad::leaf(t, a0);
                auto b = ad::leaf(t, b0);
                auto r = ad::leaf(t, r0);
                auto c = ad::leaf(t, c0);
                auto s = ad::leaf(t, s0);
                auto mixed = ad::mul(ad::slice_cols(ad::concat_cols(a, b), 1, 4),
                                     ad::broadcast_row(r, 3));
                mixed = ad::add(mixed, ad::broadcast_col(c, 4));
                mixed = ad::mul(mixed, ad::broadcast_scalar(s, 3, 4));
                auto stacked =
                    ad::stack_cols(t, {ad::slice_cols(mixed, 0, 1), ad::slice_cols(mixed, 3, 1)});
                auto gathered = ad::gather(stacked, {0, 1, 2, 0}, {0, 1, 0, 1}, 2, 2);
                return {ad::add(weighted(gathered, 13), ad::mean(mixed)), {a, b, r, c, s}};
            };
            worst = std::max(worst, testutil::max_grad_rel_err(build, {&a0, &b0, &r0, &c0, &s0}));
        }
        {
            Matrix p0 = rand_m(2, 3, 0.0, 1.0), t0m = rand_m(2, 3, 2.0, 3.0);
            Matrix mask(2, 3, 1.0);
            mask(0, 1) = 0.0;
            auto build = [&](ad::Tape& t) -> BuiltGraph {
                auto p = ad::leaf(t, p0);
                auto a = ad::leaf(t, t0m);
                return {ad::pinball(p, a, 0.6, mask), {p, a}};
            };
            worst = std::max(worst, testutil::max_grad_rel_err(build, {&p0, &t0m}));
        }
        d << "primitives " << worst;
        pass = pass && worst <= 1e-6;
    }

    // LSTM cell
    {
        const int input = 4, hidden = 3;
        Matrix w_in = rand_m(input, 4 * hidden, -0.5, 0.5);
        Matrix w_rec = rand_m(hidden, 4 * hidden, -0.5, 0.5);
        Matrix bias = rand_m(1, 4 * hidden, -0.5, 0.5);
        Matrix x0 = rand_m(2, input), h0 = rand_m(2, hidden), c0 = rand_m(2, hidden);
        auto build = [&](ad::Tape& t) -> BuiltGraph {
            CellLeaves leaves{ad::leaf(t, w_in), ad::leaf(t, w_rec), ad::leaf(t, bias), hidden};
            auto [h, c] = lstm_cell(ad::leaf(t, x0), ad::constant(t, h0), ad::constant(t, c0), leaves);
            return {ad::sum(ad::mul(h, h)), {leaves.w_input, leaves.w_recur, leaves.bias}};
        };
        const double worst = testutil::max_grad_rel_err(build, {&w_in, &w_rec, &bias});
        d << ", cell " << worst;
        pass = pass && worst <= 1e-4;
    }

    // full stack over a multi-step sequence
    {
        StackConfig cfg;
        cfg.dilation_blocks = {{1, 2}, {2}};
        cfg.hidden_size = 4;
        cfg.input_size = 5;
        cfg.output_size = 2;
        Rng wrng(301);
        StackWeights w = init_stack_weights(cfg, wrng);
        std::vector<Matrix> xs;
        for (int t = 0; t < 5; ++t) xs.push_back(rand_m(2, 5));
        std::vector<Matrix*> params;
        w.for_each_param([&](const std::string&, Matrix& m) { params.push_back(&m); });
        auto build = [&](ad::Tape& t) -> BuiltGraph {
            auto leaves = lift_weights(t, w);
            std::vector<ad::DiffArray> seq;
            for (const auto& x : xs) seq.push_back(ad::constant(t, x));
            auto out = forward_stack(seq, leaves, cfg);
            BuiltGraph g;
            g.loss = ad::mean(ad::mul(out, out));
            for (const auto& cell : leaves.layers) {
                g.leaves.push_back(cell.w_input);
                g.leaves.push_back(cell.w_recur);
                g.leaves.push_back(cell.bias);
            }
            g.leaves.push_back(leaves.nl_w);
            g.leaves.push_back(leaves.nl_b);
            g.leaves.push_back(leaves.out_w);
            g.leaves.push_back(leaves.out_b);
            return g;
        };
        const double worst = testutil::max_grad_rel_err(build, params);
        d << ", stack " << worst;
        pass = pass && worst <= 1e-4;
    }

    // joint pipeline: raw per-series params -> normalized windows -> stack ->
    // re-seasonalize -> pinball on real-scale targets
    {
        const int s_len = 4, i_len = 8, o_len = 4, t_len = 24;
        const std::size_t k = 2;
        Rng drng(401);
        Matrix y(k, t_len);
        for (std::size_t r = 0; r < k; ++r) {
            auto rec = testutil::make_multiplicative_series(drng, "j", t_len, s_len, 0.05);
            for (int t = 0; t < t_len; ++t) y(r, static_cast<std::size_t>(t)) = rec.values[static_cast<std::size_t>(t)];
        }
        Matrix a_raw(k, 1), g_raw(k, 1), s_raw(k, s_len);
        for (double& v : a_raw.data()) v = drng.uniform(-1, 1);
        for (double& v : g_raw.data()) v = drng.uniform(-1, 1);
        for (double& v : s_raw.data()) v = drng.uniform(-0.3, 0.3);

        StackConfig cfg;
        cfg.dilation_blocks = {{1, 2}};
        cfg.hidden_size = 5;
        cfg.input_size = i_len + kNumCategories;
        cfg.output_size = o_len;
        Rng wrng(402);
        StackWeights w = init_stack_weights(cfg, wrng);

        // two windows per series at different anchors
        const std::vector<int> rows = {0, 0, 1, 1};
        const std::vector<int> anchors = {i_len - 1, i_len + 3, i_len + 1, t_len - o_len - 1};
        const std::size_t b_sz = rows.size();
        Matrix mask(b_sz, o_len, 1.0);

        auto build = [&](ad::Tape& t) -> BuiltGraph {
            auto a_leaf = ad::leaf(t, a_raw);
            auto g_leaf = ad::leaf(t, g_raw);
            auto s_leaf = ad::leaf(t, s_raw);
            auto hw = hybrid_primer_tape(t, y, a_leaf, g_leaf, s_leaf);
            std::vector<int> gr_in, gc_in, gr_out, gc_out, gr_lvl, gc_lvl;
            Matrix y_in(b_sz, i_len), y_out(b_sz, o_len), onehot(b_sz, kNumCategories);
            for (std::size_t b = 0; b < b_sz; ++b) {
                for (int j = 0; j < i_len; ++j) {
                    gr_in.push_back(rows[b]);
                    gc_in.push_back(anchors[b] - i_len + 1 + j);
                    y_in(b, static_cast<std::size_t>(j)) =
                        y(static_cast<std::size_t>(rows[b]), static_cast<std::size_t>(anchors[b] - i_len + 1 + j));
                }
                for (int j = 0; j < o_len; ++j) {
                    gr_out.push_back(rows[b]);
                    gc_out.push_back(anchors[b] + 1 + j);
                    y_out(b, static_cast<std::size_t>(j)) =
                        y(static_cast<std::size_t>(rows[b]), static_cast<std::size_t>(anchors[b] + 1 + j));
                }
                gr_lvl.push_back(rows[b]);
                gc_lvl.push_back(anchors[b]);
                onehot(b, 2) = 1.0;
            }
            auto seas_in = ad::gather(hw.seasonalities, gr_in, gc_in, b_sz, i_len);
            auto seas_out = ad::gather(hw.seasonalities, gr_out, gc_out, b_sz, o_len);
            auto level = ad::gather(hw.levels, gr_lvl, gc_lvl, b_sz, 1);
            auto x = ad::div(ad::constant(t, y_in),
                             ad::mul(seas_in, ad::broadcast_col(level, i_len)));
            auto inputs = ad::concat_cols(x, ad::constant(t, onehot));
            auto leaves = lift_weights(t, w);
            auto pred_norm = forward_stack({inputs}, leaves, cfg);
            auto pred_real =
                ad::mul(pred_norm, ad::mul(seas_out, ad::broadcast_col(level, o_len)));
            BuiltGraph g;
            g.loss = ad::pinball(pred_real, ad::constant(t, y_out), 0.5, mask);
            g.leaves = {a_leaf, g_leaf, s_leaf};
            for (const auto& cell : leaves.layers) {
                g.leaves.push_back(cell.w_input);
                g.leaves.push_back(cell.w_recur);
                g.leaves.push_back(cell.bias);
            }
            g.leaves.push_back(leaves.nl_w);
            g.leaves.push_back(leaves.nl_b);
            g.leaves.push_back(leaves.out_w);
            g.leaves.push_back(leaves.out_b);

            if (!t.all_finite()) throw NumericDomainError("NaN/Inf in joint pipeline");
            return g;
        };
        // parameter list aligned with the leaves the builder returns:
        // per-series raws first, then every network array
        std::vector<Matrix*> params = {&a_raw, &g_raw, &s_raw};
        w.for_each_param([&](const std::string&, Matrix& m) { params.push_back(&m); });
        const double worst_ps =
            testutil::max_grad_rel_err(build, {&a_raw, &g_raw, &s_raw}, 1e-6);
        Rng sample_rng(403);
        const double worst_net = testutil::sampled_grad_rel_err(build, params, 200, sample_rng, 1e-6);
        const double worst = std::max(worst_ps, worst_net);
        d << ", joint " << worst;
        pass = pass && worst <= 1e-3;
    }

    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    d << " (" << sec << " s)";
    return {pass && sec < 60.0, d.str()};
}

// ---------------------------------------------------------------------------
// Shared synthetic workload builders
// ---------------------------------------------------------------------------
std::vector<SeriesRecord> quarterly_synthetic(int n, std::uint64_t seed, double noise) {
    Rng rng(seed);
    std::vector<SeriesRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out.push_back(testutil::make_multiplicative_series(rng, "Q" + std::to_string(i), 88, 4, noise));
    return out;
}

// ---------------------------------------------------------------------------
// 3. Batched equivalence: 256 windows at once vs 256 single-window passes
// ---------------------------------------------------------------------------
Outcome criterion_batched_equivalence() {
    TrainConfig cfg;
    cfg.batch_size = 256;
    cfg.seed = 5;
    Trainer tr(quarterly_synthetic(10, 31, 0.05), FrequencyProfile::defaults(Frequency::Quarterly),
               cfg);
    auto windows = tr.all_windows();
    const int o_len = tr.profile().horizon;

    WindowBatch big;
    for (int i = 0; i < 256; ++i) {
        big.series_rows.push_back(windows[static_cast<std::size_t>(i)].first);
        big.anchors.push_back(windows[static_cast<std::size_t>(i)].second);
        big.ids.push_back("w");
    }
    big.mask = Matrix(256, static_cast<std::size_t>(o_len), 1.0);
    const double batched_loss = tr.batch_loss(big);
    const Matrix batched_inputs = big.inputs;
    const Matrix batched_targets = big.targets;

    double acc = 0.0;
    double worst_elem = 0.0;
    for (int i = 0; i < 256; ++i) {
        WindowBatch one;
        one.series_rows = {windows[static_cast<std::size_t>(i)].first};
        one.anchors = {windows[static_cast<std::size_t>(i)].second};
        one.ids = {"w"};
        one.mask = Matrix(1, static_cast<std::size_t>(o_len), 1.0);
        acc += tr.batch_loss(one);
        for (std::size_t c = 0; c < one.inputs.cols(); ++c)
            worst_elem = std::max(worst_elem, testutil::rel_err(one.inputs(0, c),
                                                                batched_inputs(static_cast<std::size_t>(i), c)));
        for (std::size_t c = 0; c < one.targets.cols(); ++c)
            worst_elem = std::max(worst_elem, testutil::rel_err(one.targets(0, c),
                                                                batched_targets(static_cast<std::size_t>(i), c)));
    }
    const double combined = acc / 256.0;
    const double loss_err = testutil::rel_err(batched_loss, combined);
    std::ostringstream d;
    d << "loss rel err " << loss_err << ", window elements rel err " << worst_elem;
    return {loss_err <= 1e-6 && worst_elem <= 1e-6, d.str()};
}

// ---------------------------------------------------------------------------
// 4. Speedup: one epoch batched (256) vs per-series loop on 1,000 series
// ---------------------------------------------------------------------------
Outcome criterion_speedup() {
    TrainConfig cfg;
    cfg.batch_size = 256;
    cfg.seed = 7;
    Trainer tr(quarterly_synthetic(1000, 41, 0.05), FrequencyProfile::defaults(Frequency::Quarterly),
               cfg);
    const BenchmarkReport rep = tr.benchmark_batched_vs_looped();
    std::ostringstream d;
    d << "batched " << rep.batched_s << " s, looped " << rep.looped_s << " s, speedup "
      << rep.speedup << "x";
    return {rep.speedup >= 5.0, d.str()};
}

// ---------------------------------------------------------------------------
// 5. Overfit smoke: 4 clean seasonal series to pinball < 1e-2
// ---------------------------------------------------------------------------
Outcome criterion_overfit() {
    const auto t0 = std::chrono::steady_clock::now();
    TrainConfig cfg;
    cfg.batch_size = 256;
    cfg.seed = 11;
    cfg.learning_rate_network = 5e-3;
    Trainer tr(quarterly_synthetic(4, 51, 0.0), FrequencyProfile::defaults(Frequency::Quarterly),
               cfg);
    double loss = std::numeric_limits<double>::infinity();
    int epochs = 0;
    while (epochs < 500 && !(loss < 1e-2)) {
        loss = tr.train_epoch();
        ++epochs;
        if (!std::isfinite(loss)) break;
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream d;
    d << "pinball " << loss << " after " << epochs << " epochs in " << sec << " s";
    return {loss < 1e-2 && sec < 120.0, d.str()};
}

// ---------------------------------------------------------------------------
// 6. Forecast quality: beat seasonal naive by >= 10% relative, median of 3
// ---------------------------------------------------------------------------
Outcome criterion_forecast_quality() {
    std::vector<double> ratios;
    std::ostringstream d;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto data = quarterly_synthetic(200, 60 + seed, 0.05);
        FrequencyProfile profile = FrequencyProfile::defaults(Frequency::Quarterly);
        TrainConfig cfg;
        cfg.batch_size = 256;
        cfg.seed = seed;
        cfg.learning_rate_network = 3e-3;
        cfg.epochs = 20;
        Trainer tr(data, profile, cfg);

        double naive_acc = 0.0;
        for (std::size_t i = 0; i < tr.series_count(); ++i) {
            const DatasetSplit& split = tr.split(i);
            auto fc = seasonal_naive(split.train, profile.seasonality_length, profile.horizon);
            naive_acc += smape(split.validation, fc);
        }
        const double naive_smape = naive_acc / static_cast<double>(tr.series_count());

        for (int e = 0; e < cfg.epochs; ++e) tr.train_epoch();
        const double model_smape = tr.validate().mean_smape;
        ratios.push_back(model_smape / naive_smape);
        d << "seed " << seed << ": model " << model_smape << " vs naive " << naive_smape << "; ";
    }
    std::sort(ratios.begin(), ratios.end());
    const double median = ratios[1];
    d << "median ratio " << median;
    return {median <= 0.9, d.str()};
}

// ---------------------------------------------------------------------------
// 7. Metric golden values
// ---------------------------------------------------------------------------
Outcome criterion_metric_goldens() {
    bool pass = true;
    std::ostringstream d;
    auto expect = [&](bool ok, const char* what) {
        if (!ok) {
            pass = false;
            d << "FAILED " << what << "; ";
        }
    };
    const std::vector<double> hundred = {100.0};
    expect(smape(hundred, hundred) == 0.0, "smape exact zero");
    expect(std::abs(smape(hundred, std::vector<double>{50.0}) - 200.0 * 50.0 / 150.0) < 1e-12,
           "smape 100 vs 50");
    expect(std::abs(smape(hundred, std::vector<double>{0.0}) - 200.0) < 1e-12, "smape saturation");

    const std::vector<double> insample = {1.0, 2.0, 1.0, 2.0};
    auto m1 = mase(insample, std::vector<double>{2.0}, std::vector<double>{2.0}, 1);
    expect(m1.has_value() && *m1 == 0.0, "mase exact zero");
    auto m2 = mase(insample, std::vector<double>{2.0}, std::vector<double>{1.0}, 1);
    expect(m2.has_value() && std::abs(*m2 - 1.0) < 1e-12, "mase hand value");

    Matrix ones(1, 1, 1.0);
    expect(pinball_loss(Matrix(1, 1, 3.5), Matrix(1, 1, 3.5), 0.5, ones) == 0.0, "pinball zero");
    expect(std::abs(pinball_loss(Matrix(1, 1, 0.0), Matrix(1, 1, 2.0), 0.5, ones) - 1.0) < 1e-15,
           "pinball tau=0.5");
    expect(std::abs(pinball_loss(Matrix(1, 1, 1.0), Matrix(1, 1, 0.0), 0.9, ones) - 0.1) < 1e-15,
           "pinball tau=0.9");

    const std::vector<double> means = {14.42, 10.09, 10.81};
    const std::vector<std::size_t> counts = {23000, 24000, 48000};
    const double overall = weighted_mean(means, counts);
    expect(std::abs(std::round(overall * 100.0) / 100.0 - 11.50) < 1e-12,
           "published weighted mean 11.50");
    d << "weighted mean " << overall;
    return {pass, d.str()};
}

// ---------------------------------------------------------------------------
// 8. Masked targets produce bit-zero gradients vs the unpadded batch
// ---------------------------------------------------------------------------
Outcome criterion_masking() {
    TrainConfig cfg;
    cfg.batch_size = 64;
    cfg.seed = 13;
    Trainer tr(quarterly_synthetic(6, 71, 0.05), FrequencyProfile::defaults(Frequency::Quarterly),
               cfg);
    const int o_len = tr.profile().horizon;
    const int i_len = tr.profile().input_window;

    WindowBatch small;
    small.series_rows = {0, 1, 2, 3};
    small.anchors = {i_len - 1, i_len + 5, i_len + 9, i_len + 2};
    small.ids = {"a", "b", "c", "d"};
    small.mask = Matrix(4, static_cast<std::size_t>(o_len), 1.0);

    WindowBatch padded = small;
    padded.series_rows.push_back(4);
    padded.anchors.push_back(i_len + 7);
    padded.ids.push_back("e");
    padded.series_rows.push_back(5);
    padded.anchors.push_back(i_len + 1);
    padded.ids.push_back("f");
    padded.mask = Matrix(6, static_cast<std::size_t>(o_len), 1.0);
    for (int c = 0; c < o_len; ++c) {
        padded.mask(4, static_cast<std::size_t>(c)) = 0.0;
        padded.mask(5, static_cast<std::size_t>(c)) = 0.0;
    }

    auto gs = tr.batch_gradients(small);
    auto gp = tr.batch_gradients(padded);
    double worst = std::abs(gs.loss - gp.loss);
    for (const auto& [name, grad] : gs.network) {
        const Matrix& other = gp.network.at(name);
        for (std::size_t e = 0; e < grad.size(); ++e)
            worst = std::max(worst, std::abs(grad.data()[e] - other.data()[e]));
    }
    for (const auto& [id, g] : gs.per_series) {
        const auto& other = gp.per_series.at(id);
        worst = std::max(worst, std::abs(g.alpha_raw - other.alpha_raw));
        worst = std::max(worst, std::abs(g.gamma_raw - other.gamma_raw));
        for (std::size_t j = 0; j < g.init_seasonality_raw.size(); ++j)
            worst = std::max(worst,
                             std::abs(g.init_seasonality_raw[j] - other.init_seasonality_raw[j]));
    }
    double masked_leak = 0.0;
    for (const std::string id : {"Q4", "Q5"}) {
        if (!gp.per_series.count(id)) {
            masked_leak = std::numeric_limits<double>::infinity();
            break;
        }
        const auto& g = gp.per_series.at(id);
        masked_leak = std::max({masked_leak, std::abs(g.alpha_raw), std::abs(g.gamma_raw)});
        for (double v : g.init_seasonality_raw) masked_leak = std::max(masked_leak, std::abs(v));
    }
    std::ostringstream d;
    d << "max shared-gradient difference " << worst << ", masked-series gradient " << masked_leak;
    return {worst <= 1e-12 && masked_leak == 0.0, d.str()};
}

// ---------------------------------------------------------------------------
// 9. Determinism of cmd_train across identical runs
// ---------------------------------------------------------------------------
Outcome criterion_determinism() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "esrnn_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto data = quarterly_synthetic(6, 81, 0.05);
    std::ofstream train_csv((dir / "train.csv").string());
    write_m4_train_csv(train_csv, data);
    train_csv.close();
    std::ofstream info_csv((dir / "info.csv").string());
    info_csv << "M4id,category,SP\n";
    for (const auto& s : data)
        info_csv << s.id << ',' << to_string(*s.category) << ",Quarterly\n";
    info_csv.close();

    RunConfig cfg;
    cfg.train_csv = (dir / "train.csv").string();
    cfg.info_csv = (dir / "info.csv").string();
    cfg.output_dir = (dir / "prep").string();
    cfg.frequency = Frequency::Quarterly;
    cfg.profile = FrequencyProfile::defaults(Frequency::Quarterly);
    cfg.train.epochs = 2;
    cfg.train.batch_size = 128;
    cfg.train.seed = 123;
    cmd_prepare(cfg);

    auto run = [&](const std::string& sub) {
        RunConfig c = cfg;
        c.output_dir = (dir / sub).string();
        c.prepared = cfg.prepared_path();
        c.checkpoint.clear();
        cmd_train(c);
        return c;
    };
    RunConfig r1 = run("run1");
    RunConfig r2 = run("run2");

    const bool hashes_equal = content_hash(r1.checkpoint_path()) == content_hash(r2.checkpoint_path());

    auto loss_columns = [](const std::string& path) {
        std::ifstream in(path);
        std::string line, out;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            out += line.substr(0, line.rfind('\t'));
            out += '\n';
        }
        return out;
    };
    const bool logs_equal = loss_columns(r1.output_dir + "/train_log.tsv") ==
                            loss_columns(r2.output_dir + "/train_log.tsv");
    std::ostringstream d;
    d << "checkpoint hashes " << (hashes_equal ? "equal" : "differ") << ", epoch-loss logs "
      << (logs_equal ? "equal" : "differ");
    return {hashes_equal && logs_equal, d.str()};
}

struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "Holt-Winters oracle equivalence", criterion_hw_oracle},
    {2, "gradient suite vs central finite differences", criterion_gradients},
    {3, "batched forward+loss equals sequential single-window passes", criterion_batched_equivalence},
    {4, "batched vs per-series loop speedup >= 5x", criterion_speedup},
    {5, "overfit smoke: 4 seasonal series to pinball < 1e-2", criterion_overfit},
    {6, "validation sMAPE beats seasonal naive by >= 10%", criterion_forecast_quality},
    {7, "metric golden values", criterion_metric_goldens},
    {8, "masked targets: bit-zero gradients", criterion_masking},
    {9, "cmd_train determinism: logs and checkpoint hashes", criterion_determinism},
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);
    bool all_pass = true;
    for (const Criterion& c : kCriteria) {
        if (only != 0 && c.id != only) continue;
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s — %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name,
                    out.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && out.pass;
    }
    return all_pass ? 0 : 1;
}
