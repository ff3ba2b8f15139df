#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "esrnn/autodiff.hpp"
#include "esrnn/errors.hpp"
#include "esrnn/fastmath.hpp"
#include "esrnn/matrix.hpp"

namespace esrnn {

/// Fused weights of one LSTM cell; gate columns are ordered
/// [input | forget | candidate | output], each `hidden` wide.
struct LSTMCellWeights {
    Matrix w_input;   // (input_size, 4 * hidden)
    Matrix w_recur;   // (hidden, 4 * hidden)
    Matrix bias;      // (1, 4 * hidden)

    int hidden() const { return static_cast<int>(w_recur.rows()); }
    int input_size() const { return static_cast<int>(w_input.rows()); }
};

/// Shape of the stack: dilation blocks over a shared hidden width, a TanH
/// non-linear layer of the same width, and a linear adapter to the horizon.
struct StackConfig {
    std::vector<std::vector<int>> dilation_blocks;
    int hidden_size = 0;
    int input_size = 0;   // I + 6
    int output_size = 0;  // O

    int num_layers() const {
        int n = 0;
        for (const auto& b : dilation_blocks) n += static_cast<int>(b.size());
        return n;
    }

    void validate() const {
        if (dilation_blocks.empty()) throw ConfigError("stack: dilation blocks must be non-empty");
        for (const auto& b : dilation_blocks) {
            if (b.empty()) throw ConfigError("stack: empty dilation block");
            for (int d : b)
                if (d < 1) throw ConfigError("stack: dilation must be >= 1");
        }
        if (hidden_size < 1 || input_size < 1 || output_size < 1)
            throw ConfigError("stack: sizes must be positive");
    }
};

/// All trainable network weights. Iteration order of for_each_param is fixed
/// and defines the checkpoint layout.
struct StackWeights {
    std::vector<LSTMCellWeights> layers;
    Matrix nl_w;    // (hidden, hidden)
    Matrix nl_b;    // (1, hidden)
    Matrix out_w;   // (hidden, output)
    Matrix out_b;   // (1, output)

    template <typename Fn>
    void for_each_param(Fn&& fn) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string p = "lstm" + std::to_string(i);
            fn(p + ".w_input", layers[i].w_input);
            fn(p + ".w_recur", layers[i].w_recur);
            fn(p + ".bias", layers[i].bias);
        }
        fn("head.nl_w", nl_w);
        fn("head.nl_b", nl_b);
        fn("head.out_w", out_w);
        fn("head.out_b", out_b);
    }

    template <typename Fn>
    void for_each_param(Fn&& fn) const {
        const_cast<StackWeights*>(this)->for_each_param(
            [&](const std::string& name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
    }

    void zero() {
        for_each_param([](const std::string&, Matrix& m) { m.fill(0.0); });
    }
};

/// Uniform +-1/sqrt(hidden) weights; biases zero except the forget gate,
/// which starts at 1.
inline StackWeights init_stack_weights(const StackConfig& cfg, Rng& rng) {
    cfg.validate();
    const int h = cfg.hidden_size;
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    auto random_matrix = [&](std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (double& v : m.data()) v = rng.uniform(-bound, bound);
        return m;
    };
    StackWeights w;
    int in = cfg.input_size;
    for (const auto& block : cfg.dilation_blocks) {
        for (std::size_t j = 0; j < block.size(); ++j) {
            LSTMCellWeights cell;
            cell.w_input = random_matrix(static_cast<std::size_t>(in), static_cast<std::size_t>(4 * h));
            cell.w_recur = random_matrix(static_cast<std::size_t>(h), static_cast<std::size_t>(4 * h));
            cell.bias = Matrix(1, static_cast<std::size_t>(4 * h));
            for (int c = h; c < 2 * h; ++c) cell.bias(0, static_cast<std::size_t>(c)) = 1.0;
            w.layers.push_back(std::move(cell));
            in = h;
        }
    }
    w.nl_w = random_matrix(static_cast<std::size_t>(h), static_cast<std::size_t>(h));
    w.nl_b = Matrix(1, static_cast<std::size_t>(h));
    w.out_w = random_matrix(static_cast<std::size_t>(h), static_cast<std::size_t>(cfg.output_size));
    w.out_b = Matrix(1, static_cast<std::size_t>(cfg.output_size));
    return w;
}

/// Tape handles for one cell's weights.
struct CellLeaves {
    ad::DiffArray w_input;
    ad::DiffArray w_recur;
    ad::DiffArray bias;
    int hidden = 0;
};

/// Tape handles for the whole stack, in for_each_param order.
struct StackLeaves {
    std::vector<CellLeaves> layers;
    ad::DiffArray nl_w, nl_b, out_w, out_b;
};

inline StackLeaves lift_weights(ad::Tape& tape, const StackWeights& w) {
    StackLeaves l;
    l.layers.reserve(w.layers.size());
    for (const auto& cell : w.layers)
        l.layers.push_back(CellLeaves{ad::leaf(tape, cell.w_input), ad::leaf(tape, cell.w_recur),
                                      ad::leaf(tape, cell.bias), cell.hidden()});
    l.nl_w = ad::leaf(tape, w.nl_w);
    l.nl_b = ad::leaf(tape, w.nl_b);
    l.out_w = ad::leaf(tape, w.out_w);
    l.out_b = ad::leaf(tape, w.out_b);
    return l;
}

/// One LSTM step: i = sigma(.), f = sigma(.), g = tanh(.), o = sigma(.),
/// c = f . c_prev + i . g, h = o . tanh(c). Absent recurrent state stands for
/// structural zeros, in which case the recurrent product is skipped.
inline std::pair<ad::DiffArray, ad::DiffArray> lstm_cell(ad::DiffArray x,
                                                         std::optional<ad::DiffArray> h_prev,
                                                         std::optional<ad::DiffArray> c_prev,
                                                         const CellLeaves& w) {
    const std::size_t hidden = static_cast<std::size_t>(w.hidden);
    auto pre = ad::matmul(x, w.w_input);
    if (h_prev) pre = ad::add(pre, ad::matmul(*h_prev, w.w_recur));
    pre = ad::add(pre, ad::broadcast_row(w.bias, x.rows()));
    auto i = ad::logistic(ad::slice_cols(pre, 0, hidden));
    auto f = ad::logistic(ad::slice_cols(pre, hidden, hidden));
    auto g = ad::tanh(ad::slice_cols(pre, 2 * hidden, hidden));
    auto o = ad::logistic(ad::slice_cols(pre, 3 * hidden, hidden));
    ad::DiffArray c = c_prev ? ad::add(ad::mul(f, *c_prev), ad::mul(i, g)) : ad::mul(i, g);
    auto h = ad::mul(o, ad::tanh(c));
    return {h, c};
}

/// Unroll one cell over a sequence with recurrent skip distance d: step t
/// reads (h_{t-d}, c_{t-d}), zeros when t - d < 0.
inline std::vector<ad::DiffArray> dilated_lstm_layer(const std::vector<ad::DiffArray>& inputs,
                                                     int dilation, const CellLeaves& w) {
    if (dilation < 1) throw ConfigError("dilated_lstm_layer: dilation must be >= 1");
    std::vector<ad::DiffArray> hs, cs;
    hs.reserve(inputs.size());
    cs.reserve(inputs.size());
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        std::optional<ad::DiffArray> hp, cp;
        if (t >= static_cast<std::size_t>(dilation)) {
            hp = hs[t - static_cast<std::size_t>(dilation)];
            cp = cs[t - static_cast<std::size_t>(dilation)];
        }
        auto [h, c] = lstm_cell(inputs[t], hp, cp, w);
        hs.push_back(h);
        cs.push_back(c);
    }
    return hs;
}

/// Dilated LSTM blocks with identity skips between consecutive blocks (the
/// first block changes width, so skips start at the second), then the last
/// step's hidden state through dense-TanH and the linear adapter to the
/// horizon. Output stays on the normalized, deseasonalized scale.
inline ad::DiffArray forward_stack(const std::vector<ad::DiffArray>& sequence, const StackLeaves& w,
                                   const StackConfig& cfg) {
    cfg.validate();
    if (sequence.empty()) throw ContractError("forward_stack: empty sequence");
    for (const auto& step : sequence)
        if (step.cols() != static_cast<std::size_t>(cfg.input_size))
            throw ShapeError("forward_stack: input width " + std::to_string(step.cols()) +
                             ", expected " + std::to_string(cfg.input_size));

    std::vector<ad::DiffArray> current = sequence;
    std::size_t layer = 0;
    for (std::size_t b = 0; b < cfg.dilation_blocks.size(); ++b) {
        std::vector<ad::DiffArray> block_in = current;
        for (int d : cfg.dilation_blocks[b]) current = dilated_lstm_layer(current, d, w.layers[layer++]);
        if (b > 0)
            for (std::size_t t = 0; t < current.size(); ++t) current[t] = ad::add(current[t], block_in[t]);
    }
    auto last = current.back();
    auto z = ad::tanh(ad::add(ad::matmul(last, w.nl_w), ad::broadcast_row(w.nl_b, last.rows())));
    return ad::add(ad::matmul(z, w.out_w), ad::broadcast_row(w.out_b, z.rows()));
}

// ---------------------------------------------------------------------------
// Plain (no-tape) forward path for validation and forecasting. Mirrors the
// tape ops exactly; the test suite pins the two paths against each other.
// ---------------------------------------------------------------------------

namespace plain {

inline Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    for (std::size_t e = 0; e < out.size(); ++e) out.data()[e] += b.data()[e];
    return out;
}

inline std::pair<Matrix, Matrix> lstm_cell(const Matrix& x, const Matrix* h_prev, const Matrix* c_prev,
                                           const LSTMCellWeights& w) {
    const std::size_t hidden = static_cast<std::size_t>(w.hidden());
    Matrix pre = matmul(x, w.w_input);
    if (h_prev) pre = add(pre, matmul(*h_prev, w.w_recur));
    for (std::size_t r = 0; r < pre.rows(); ++r)
        for (std::size_t c = 0; c < pre.cols(); ++c) pre(r, c) += w.bias(0, c);
    Matrix h(x.rows(), hidden), c_new(x.rows(), hidden);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t j = 0; j < hidden; ++j) {
            const double i = fastmath::logistic(pre(r, j));
            const double f = fastmath::logistic(pre(r, hidden + j));
            const double g = fastmath::tanh(pre(r, 2 * hidden + j));
            const double o = fastmath::logistic(pre(r, 3 * hidden + j));
            const double c = (c_prev ? f * (*c_prev)(r, j) : 0.0) + i * g;
            c_new(r, j) = c;
            h(r, j) = o * fastmath::tanh(c);
        }
    }
    return {h, c_new};
}

inline std::vector<Matrix> dilated_lstm_layer(const std::vector<Matrix>& inputs, int dilation,
                                              const LSTMCellWeights& w) {
    if (dilation < 1) throw ConfigError("dilated_lstm_layer: dilation must be >= 1");
    std::vector<Matrix> hs, cs;
    hs.reserve(inputs.size());
    cs.reserve(inputs.size());
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const Matrix* hp = nullptr;
        const Matrix* cp = nullptr;
        if (t >= static_cast<std::size_t>(dilation)) {
            hp = &hs[t - static_cast<std::size_t>(dilation)];
            cp = &cs[t - static_cast<std::size_t>(dilation)];
        }
        auto [h, c] = lstm_cell(inputs[t], hp, cp, w);
        hs.push_back(std::move(h));
        cs.push_back(std::move(c));
    }
    return hs;
}

inline Matrix forward_stack(const std::vector<Matrix>& sequence, const StackWeights& w,
                            const StackConfig& cfg) {
    cfg.validate();
    if (sequence.empty()) throw ContractError("forward_stack: empty sequence");
    std::vector<Matrix> current = sequence;
    std::size_t layer = 0;
    for (std::size_t b = 0; b < cfg.dilation_blocks.size(); ++b) {
        std::vector<Matrix> block_in = current;
        for (int d : cfg.dilation_blocks[b]) current = dilated_lstm_layer(current, d, w.layers[layer++]);
        if (b > 0)
            for (std::size_t t = 0; t < current.size(); ++t) current[t] = add(current[t], block_in[t]);
    }
    Matrix z = matmul(current.back(), w.nl_w);
    for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) = fastmath::tanh(z(r, c) + w.nl_b(0, c));
    Matrix out = matmul(z, w.out_w);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += w.out_b(0, c);
    return out;
}

} // namespace plain

} // namespace esrnn
